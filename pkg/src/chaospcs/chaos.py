"""Skew tent map iteration.

This module is the only source of keyed pseudo-randomness in the package.
All arithmetic is plain IEEE-754 double precision so that a key reproduces
the same sequence on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError

DEFAULT_BURN_IN = 1000

# Replacement for an iterate that falls on 0 or 1; both lead to the fixed point 0.
ESCAPE_VALUE = 0.1234567890123456


def _check_unit(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 < value < 1.0):
        raise DomainError(f"{name} must lie in the open interval (0, 1), got {value!r}")
    return value


@dataclass(frozen=True)
class ChaoticKey:
    """Control parameter ``mu`` and initial state ``z0`` of the skew tent map."""

    mu: float
    z0: float

    def __post_init__(self):
        object.__setattr__(self, "mu", _check_unit("mu", self.mu))
        object.__setattr__(self, "z0", _check_unit("z0", self.z0))
        if self.mu == self.z0:
            raise DomainError("key requires mu != z0")

    def perturbed(self, d_mu: float = 0.0, d_z0: float = 0.0) -> "ChaoticKey":
        return ChaoticKey(self.mu + d_mu, self.z0 + d_z0)


@dataclass(frozen=True)
class ChaoticSequence:
    values: np.ndarray
    burn_in: int

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class SampledSequence:
    values: np.ndarray
    distance: int
    offset: int

    def __len__(self):
        return len(self.values)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def tent_step(z: float, mu: float) -> float:
    """One step of the skew tent map.

    >>> tent_step(0.3, 0.6)
    0.5
    """
    z = _check_unit("z", z)
    mu = _check_unit("mu", mu)
    nxt = z / mu if z < mu else (1.0 - z) / (1.0 - mu)
    if nxt <= 0.0 or nxt >= 1.0:
        return ESCAPE_VALUE
    return nxt


class TentStream:
    """Stateful iterator over the orbit of a key, after discarding a burn-in.

    ``take(n)`` returns the next ``n`` iterates. The first value returned is
    z(burn_in + 1).
    """

    def __init__(self, key: ChaoticKey, burn_in: int = DEFAULT_BURN_IN):
        if burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        self.key = key
        self._z = key.z0
        self.position = 0
        self.skip(burn_in)

    def skip(self, count: int) -> None:
        mu = self.key.mu
        inv_mu = 1.0 - mu
        z = self._z
        for _ in range(count):
            z = z / mu if z < mu else (1.0 - z) / inv_mu
            if z <= 0.0 or z >= 1.0:
                z = ESCAPE_VALUE
        self._z = z
        self.position += count

    def take(self, count: int) -> np.ndarray:
        mu = self.key.mu
        inv_mu = 1.0 - mu
        z = self._z
        out = [0.0] * count
        for i in range(count):
            z = z / mu if z < mu else (1.0 - z) / inv_mu
            if z <= 0.0 or z >= 1.0:
                z = ESCAPE_VALUE
            out[i] = z
        self._z = z
        self.position += count
        return np.array(out, dtype=np.float64)


def iterate(key: ChaoticKey, burn_in: int = DEFAULT_BURN_IN, length: int = 1) -> ChaoticSequence:
    """Return z(burn_in + 1) .. z(burn_in + length)."""
    if length < 1:
        raise ValueError("length must be at least 1")
    values = TentStream(key, burn_in).take(length)
    return ChaoticSequence(_frozen(values), burn_in)


def sample(key: ChaoticKey, distance: int, offset: int = DEFAULT_BURN_IN, count: int = 1) -> SampledSequence:
    """Every ``distance``-th post-burn-in iterate, ``offset`` being the burn-in.

    ``values[i]`` is element ``i * distance`` of ``iterate(key, offset, ...)``.
    """
    if distance < 1:
        raise ValueError("distance must be at least 1")
    if count < 1:
        raise ValueError("count must be at least 1")
    stream = TentStream(key, offset)
    full = stream.take((count - 1) * distance + 1)
    return SampledSequence(_frozen(full[::distance].copy()), distance, offset)


def iterate_batch(mus, z0s, burn_in: int = DEFAULT_BURN_IN, length: int = 1) -> np.ndarray:
    """Iterate many keys at once; row ``i`` equals ``iterate(key_i, ...)``.

    The per-element arithmetic is the same as the scalar path, so the result
    is bitwise identical to it.
    """
    mu = np.asarray(mus, dtype=np.float64)
    z = np.array(z0s, dtype=np.float64)
    if mu.shape != z.shape or mu.ndim != 1:
        raise ValueError("mus and z0s must be 1-D arrays of equal length")
    if np.any((mu <= 0) | (mu >= 1)) or np.any((z <= 0) | (z >= 1)):
        raise DomainError("all key components must lie in (0, 1)")
    inv_mu = 1.0 - mu
    out = np.empty((mu.size, length), dtype=np.float64)

    def step(z):
        nxt = np.where(z < mu, z / mu, (1.0 - z) / inv_mu)
        return np.where((nxt <= 0.0) | (nxt >= 1.0), ESCAPE_VALUE, nxt)

    for _ in range(burn_in):
        z = step(z)
    for i in range(length):
        z = step(z)
        out[:, i] = z
    return out


def lyapunov_exponent(mu: float) -> float:
    """Lyapunov exponent of the skew tent map, -mu ln mu - (1-mu) ln(1-mu)."""
    mu = _check_unit("mu", mu)
    return -mu * math.log(mu) - (1.0 - mu) * math.log(1.0 - mu)


# -- key files ---------------------------------------------------------------

def format_value(x: float) -> str:
    # 17 significant digits round-trip any double
    return format(float(x), ".17g")


def parse_key_text(text: str) -> dict[str, float]:
    """Parse ``name=<decimal>`` lines into a dict. Blank lines and ``#`` comments are skipped."""
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, val = line.partition("=")
        if not sep:
            raise FormatError(f"key line {lineno}: expected name=value, got {raw!r}")
        name = name.strip()
        if name in values:
            raise FormatError(f"key line {lineno}: duplicate entry {name!r}")
        try:
            values[name] = float(val.strip())
        except ValueError:
            raise FormatError(f"key line {lineno}: {val.strip()!r} is not a decimal number") from None
        if not math.isfinite(values[name]):
            raise FormatError(f"key line {lineno}: value must be finite")
    return values


def key_to_text(key: ChaoticKey) -> str:
    return f"mu={format_value(key.mu)}\nz0={format_value(key.z0)}\n"


def key_from_text(text: str) -> ChaoticKey:
    values = parse_key_text(text)
    if set(values) != {"mu", "z0"}:
        raise FormatError(f"single key file needs exactly mu and z0, got {sorted(values)}")
    try:
        return ChaoticKey(values["mu"], values["z0"])
    except DomainError as exc:
        raise FormatError(str(exc)) from None


def save_key(key: ChaoticKey, path) -> None:
    Path(path).write_text(key_to_text(key))


def load_key(path) -> ChaoticKey:
    return key_from_text(Path(path).read_text())
