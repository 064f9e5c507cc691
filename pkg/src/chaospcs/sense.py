"""Chaotic measurement matrices and column-wise (parallel) sampling."""

from __future__ import annotations

import hashlib
import itertools
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .chaos import DEFAULT_BURN_IN, ChaoticKey, format_value, sample
from .errors import DimensionError, FormatError, SizeLimitError

DEFAULT_DISTANCE = 15
CIPHERTEXT_MAGIC = b"SCS1"
CIPHERTEXT_VERSION = 1
RIP_MAX_COLUMNS = 20

_HEADER = struct.Struct("<4s5I")


def key_fingerprint(key: ChaoticKey) -> str:
    digest = hashlib.sha256(f"{format_value(key.mu)}:{format_value(key.z0)}".encode())
    return digest.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class MeasurementMatrix:
    entries: np.ndarray
    d: int = DEFAULT_DISTANCE
    burn_in: int = DEFAULT_BURN_IN
    key_fingerprint: str = ""

    def __post_init__(self):
        a = np.array(self.entries, dtype=np.float64)
        if a.ndim != 2:
            raise DimensionError("measurement matrix must be 2-D")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @property
    def M(self) -> int:
        return self.entries.shape[1]


@dataclass(frozen=True, eq=False)
class Ciphertext:
    """K x N measurements plus the metadata needed to decode them."""

    measurements: np.ndarray
    M: int
    d: int = DEFAULT_DISTANCE
    format_version: int = CIPHERTEXT_VERSION

    def __post_init__(self):
        y = np.array(self.measurements, dtype=np.float64)
        if y.ndim != 2:
            raise DimensionError("ciphertext measurements must be 2-D")
        y.setflags(write=False)
        object.__setattr__(self, "measurements", y)

    @property
    def K(self) -> int:
        return self.measurements.shape[0]

    @property
    def N(self) -> int:
        return self.measurements.shape[1]

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.K, self.M, self.N

    def replace(self, measurements: np.ndarray) -> "Ciphertext":
        if np.shape(measurements) != self.measurements.shape:
            raise DimensionError("replacement measurements must keep the K x N shape")
        return Ciphertext(measurements, self.M, self.d, self.format_version)

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(CIPHERTEXT_MAGIC, self.K, self.M, self.N, self.d, self.format_version)
        body = np.asarray(self.measurements, dtype="<f8").tobytes(order="F")
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        if len(data) < _HEADER.size:
            raise FormatError("ciphertext is shorter than its header")
        magic, K, M, N, d, version = _HEADER.unpack_from(data)
        if magic != CIPHERTEXT_MAGIC:
            raise FormatError(f"bad ciphertext magic {magic!r}")
        if version != CIPHERTEXT_VERSION:
            raise FormatError(f"unsupported ciphertext format version {version}")
        if min(K, M, N, d) < 1:
            raise FormatError("ciphertext dimensions must be positive")
        expected = _HEADER.size + 8 * K * N
        if len(data) != expected:
            raise FormatError(f"ciphertext body has {len(data) - _HEADER.size} bytes, expected {8 * K * N}")
        y = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape((K, N), order="F")
        if not np.all(np.isfinite(y)):
            raise FormatError("ciphertext holds non-finite values")
        return cls(y.astype(np.float64), M, d, version)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Ciphertext":
        return cls.from_bytes(Path(path).read_bytes())


def build_matrix(key: ChaoticKey, K: int, M: int, d: int = DEFAULT_DISTANCE,
                 burn_in: int = DEFAULT_BURN_IN) -> MeasurementMatrix:
    """K x M matrix sqrt(2/K) * (1 - 2 * z'(burn_in + 1 + i*d)), filled column by column."""
    if K < 1 or M < 1 or d < 1:
        raise ValueError("K, M and d must be positive")
    delta = sample(key, d, burn_in, K * M).values
    theta = 1.0 - 2.0 * delta
    entries = math.sqrt(2.0 / K) * theta.reshape((K, M), order="F")
    return MeasurementMatrix(entries, d, burn_in, key_fingerprint(key))


def _matrix(phi) -> np.ndarray:
    return phi.entries if isinstance(phi, MeasurementMatrix) else np.asarray(phi, dtype=np.float64)


def pcs_sample(x_star: np.ndarray, phi: MeasurementMatrix) -> Ciphertext:
    """Sample every column of ``x_star`` with the same matrix: Y[:, j] = Phi @ X[:, j]."""
    a = _matrix(phi)
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.ndim != 2 or x_star.shape[0] != a.shape[1]:
        raise DimensionError(f"signal of shape {x_star.shape} cannot be sampled by a {a.shape[0]}x{a.shape[1]} matrix")
    d = phi.d if isinstance(phi, MeasurementMatrix) else DEFAULT_DISTANCE
    return Ciphertext(a @ x_star, x_star.shape[0], d)


def rip_constant_estimate(phi, s: int) -> float:
    """Restricted isometry constant of order ``s`` by exhaustive support search.

    Only practical for small matrices; more than 20 columns is refused.
    """
    a = _matrix(phi)
    M = a.shape[1]
    if M > RIP_MAX_COLUMNS:
        raise SizeLimitError(f"exhaustive RIP search is capped at {RIP_MAX_COLUMNS} columns, got {M}")
    if not 1 <= s <= M:
        raise ValueError(f"order s must lie in 1..{M}")
    delta = 0.0
    for support in itertools.combinations(range(M), s):
        sv = np.linalg.svd(a[:, support], compute_uv=False)
        # a K x s block with K < s has s - K zero singular values
        smin = sv[-1] if sv.size == s else 0.0
        delta = max(delta, sv[0] ** 2 - 1.0, 1.0 - smin ** 2)
    return float(delta)


def required_measurements(s_max: int, M: int, C: float = 1.0) -> int:
    """Measurements per column, ceil(C * s_max * ln(M / s_max)), but at least s_max + 1."""
    if not 1 <= s_max <= M:
        raise ValueError("need 1 <= s_max <= M")
    if C <= 0:
        raise ValueError("C must be positive")
    return max(math.ceil(C * s_max * math.log(M / s_max)), s_max + 1)
