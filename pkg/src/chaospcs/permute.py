"""Keyed permutation orders for 2-D signals.

Signals are flattened column-major before permuting, matching the
column-wise sampling that follows. Orders are stored 1-based, as
``x_star[i] = x[indices[i]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chaos import DEFAULT_BURN_IN, ESCAPE_VALUE, ChaoticKey, TentStream, iterate, iterate_batch
from .errors import DimensionError, FormatError

DEFAULT_SPARSITY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PermutationOrder:
    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).copy()
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("a permutation order needs a non-empty 1-D index list")
        n = idx.size
        seen = np.zeros(n + 1, dtype=bool)
        if idx.min() < 1 or idx.max() > n:
            raise ValueError(f"indices must lie in 1..{n}")
        seen[idx] = True
        if not seen[1:].all():
            raise ValueError("indices are not a bijection")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def n(self) -> int:
        return self.indices.size

    @property
    def zero_based(self) -> np.ndarray:
        return self.indices - 1

    def __eq__(self, other):
        return isinstance(other, PermutationOrder) and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash(self.indices.tobytes())

    @classmethod
    def identity(cls, n: int) -> "PermutationOrder":
        return cls(np.arange(1, n + 1))

    def to_text(self) -> str:
        return "".join(f"{i}\n" for i in self.indices)

    @classmethod
    def from_text(cls, text: str) -> "PermutationOrder":
        try:
            idx = [int(line) for line in text.split()]
        except ValueError:
            raise FormatError("permutation file must hold one integer per line") from None
        try:
            return cls(np.array(idx, dtype=np.int64))
        except ValueError as exc:
            raise FormatError(str(exc)) from None

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "PermutationOrder":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class SparsityVector:
    per_column: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.per_column)

    @property
    def max(self) -> int:
        return max(self.per_column, default=0)


def order_by_sorting(key: ChaoticKey, n: int, burn_in: int = DEFAULT_BURN_IN) -> PermutationOrder:
    """Index sorting: ``indices[i]`` is the rank of z(m+i) in the sorted orbit.

    Ties (possible in floating point) keep their original order.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    z = iterate(key, burn_in, n).values
    order = np.argsort(z, kind="stable")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(1, n + 1)
    return PermutationOrder(rank)


def order_by_flags(key: ChaoticKey, n: int, burn_in: int = DEFAULT_BURN_IN,
                   max_draws: int | None = None) -> PermutationOrder:
    """Flag method: draw slot ``max(1, ceil(n*z))`` per iterate, keeping first hits.

    Slots are assigned in order of their first appearance. Once a single
    slot remains it is assigned directly. The draw count is bounded by
    ``max_draws`` (default ``10**6 * n``); if the bound is reached the
    unassigned slots are appended in ascending order. Orbits that collapse
    onto the escape cycle (e.g. mu = 0.5 in binary floating point) stop
    early with the same result.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if max_draws is None:
        max_draws = 10**6 * n
    stream = TentStream(key, burn_in)
    flag = np.zeros(n + 1, dtype=bool)
    flag[0] = True
    picked: list[np.ndarray] = []
    assigned = 0
    draws = 0
    escapes = 0
    chunk = max(256, 2 * n)
    while assigned < n - 1 and draws < max_draws:
        take = min(chunk, max_draws - draws)
        z = stream.take(take)
        draws += take
        escapes += int(np.count_nonzero(z == ESCAPE_VALUE))
        if escapes >= 2:
            # back on the escape value: the orbit is periodic from here on and
            # the rest of this chunk already covers a full period
            max_draws = draws
        chi = np.maximum(1, np.ceil(n * z).astype(np.int64))
        np.minimum(chi, n, out=chi)
        fresh = chi[~flag[chi]]
        if fresh.size == 0:
            continue
        slots, first = np.unique(fresh, return_index=True)
        slots = slots[np.argsort(first, kind="stable")]
        if assigned + slots.size > n - 1:
            slots = slots[: n - 1 - assigned]
        flag[slots] = True
        picked.append(slots)
        assigned += slots.size
    picked.append(np.flatnonzero(~flag))
    return PermutationOrder(np.concatenate(picked))


def _first_hits(z: np.ndarray, n: int) -> PermutationOrder | None:
    # flag method applied to a fixed draw sequence; None if it runs dry
    chi = np.minimum(np.maximum(1, np.ceil(n * z).astype(np.int64)), n)
    slots, first = np.unique(chi, return_index=True)
    if slots.size < n - 1:
        return None
    slots = slots[np.argsort(first, kind="stable")][: n - 1]
    flag = np.zeros(n + 1, dtype=bool)
    flag[0] = True
    flag[slots] = True
    return PermutationOrder(np.concatenate([slots, np.flatnonzero(~flag)]))


def orders_by_flags(keys, n: int, burn_in: int = DEFAULT_BURN_IN, batch: int = 2048) -> list[PermutationOrder]:
    """:func:`order_by_flags` for many keys, iterating the keys side by side.

    Results are identical to calling :func:`order_by_flags` per key.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    keys = list(keys)
    if n == 1:
        return [PermutationOrder.identity(1) for _ in keys]
    # coupon-collector draws for n - 1 slots, with headroom
    draws = int(n * (math.log(n) + 4.0)) + 16
    out: list[PermutationOrder | None] = [None] * len(keys)
    pending = list(range(len(keys)))
    # slowly mixing keys (mu near 0 or 1) need many more draws; retry those with a bigger budget
    for _ in range(2):
        missed = []
        for lo in range(0, len(pending), batch):
            group = pending[lo:lo + batch]
            z = iterate_batch([keys[i].mu for i in group], [keys[i].z0 for i in group], burn_in, draws)
            for i, row in zip(group, z):
                out[i] = _first_hits(row, n)
                if out[i] is None:
                    missed.append(i)
        pending = missed
        if not pending:
            break
        draws *= 4
    for i in pending:
        out[i] = order_by_flags(keys[i], n, burn_in)
    return out


def zigzag_order(M: int, N: int) -> PermutationOrder:
    """Anti-diagonal zigzag scan of an M x N grid, as in JPEG.

    Cell (0, 0) first, then (0, 1), (1, 0), (2, 0), (1, 1), ... The i-th
    visited cell supplies entry i of the column-major permuted signal.
    """
    if M < 1 or N < 1:
        raise ValueError("M and N must be positive")
    visits = []
    for d in range(M + N - 1):
        rows = range(max(0, d - N + 1), min(d, M - 1) + 1)
        # even diagonals run bottom-left to top-right
        if d % 2 == 0:
            rows = reversed(rows)
        for r in rows:
            visits.append(r + (d - r) * M + 1)
    return PermutationOrder(np.array(visits))


def _check_order(x: np.ndarray, order: PermutationOrder) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2:
        raise DimensionError(f"expected a 2-D signal, got shape {x.shape}")
    if order.n != x.size:
        raise DimensionError(f"order of length {order.n} does not match {x.shape[0]}x{x.shape[1]} signal")
    return x


def apply(x: np.ndarray, order: PermutationOrder) -> np.ndarray:
    x = _check_order(x, order)
    flat = x.ravel(order="F")
    return flat[order.zero_based].reshape(x.shape, order="F")


def invert_apply(x_star: np.ndarray, order: PermutationOrder) -> np.ndarray:
    x_star = _check_order(x_star, order)
    out = np.empty(x_star.size, dtype=x_star.dtype)
    out[order.zero_based] = x_star.ravel(order="F")
    return out.reshape(x_star.shape, order="F")


def sparsity_vector(x: np.ndarray, tol: float = DEFAULT_SPARSITY_TOL) -> SparsityVector:
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    x = np.asarray(x)
    counts = np.count_nonzero(np.abs(x) > tol, axis=0)
    return SparsityVector(tuple(int(c) for c in counts))


def is_acceptable(x: np.ndarray, order: PermutationOrder, tol: float = DEFAULT_SPARSITY_TOL) -> bool:
    """True when permuting strictly lowers the worst column sparsity."""
    before = sparsity_vector(x, tol).max
    after = sparsity_vector(apply(x, order), tol).max
    return after < before


def acceptability_probability(N: int, s: int, s_max: int | None = None, approximate: bool = False) -> float:
    """Chance that a uniform random permutation is acceptable.

    The exact form is ``1 - (N**(N+1-s_max) - 1) / ((N-1) * N**N)``;
    the approximation is ``1 - N**-ceil(s/N)``. Both are evaluated through
    logarithms so large N does not overflow.
    """
    if N < 1:
        raise ValueError("N must be positive")
    if s < 0:
        raise ValueError("s must be nonnegative")
    if N == 1:
        return 0.0
    log_n = math.log(N)
    if approximate:
        return 1.0 - math.exp(-math.ceil(s / N) * log_n)
    if s_max is None or s_max < 1:
        raise ValueError("exact form needs s_max >= 1")
    if s_max > s:
        raise ValueError("s_max cannot exceed s")
    # (N^(N+1-s_max) - 1) / ((N-1) N^N) = (N^(1-s_max) - N^-N) / (N-1)
    tail = (math.exp((1 - s_max) * log_n) - math.exp(-N * log_n)) / (N - 1)
    return min(1.0, max(0.0, 1.0 - tail))
