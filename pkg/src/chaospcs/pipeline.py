"""Keyed codec: sparsify, permute, measure; and the reverse."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import permute as perm
from .chaos import DEFAULT_BURN_IN, ChaoticKey, format_value, parse_key_text
from .errors import DimensionError, DomainError, FormatError
from .imaging import check_image_shape, dct2, best_s_term, idct2
from .recover import Reconstruction, SolverConfig, pcs_reconstruct
from .sense import DEFAULT_DISTANCE, Ciphertext, build_matrix, pcs_sample

KEY_FIELDS = ("mu", "z0", "mu_prime", "z0_prime")
_KEYGEN_TAG = b"chaospcs/keygen/v1"
_KEYGEN_ATTEMPTS = 64
# Generated control parameters stay away from 0 and 1: there the map barely
# expands and a one-ulp change in z0 can be rounded away within a few steps.
KEYGEN_MU_RANGE = (0.3, 0.7)


@dataclass(frozen=True)
class KeyBundle:
    """The four secret values: (mu, z0) drive the permutation, (mu', z0') the matrix.

    ``d`` and ``burn_in`` are public parameters carried alongside.
    """

    perm_key: ChaoticKey
    matrix_key: ChaoticKey
    d: int = DEFAULT_DISTANCE
    burn_in: int = DEFAULT_BURN_IN

    def __post_init__(self):
        if self.d < 1 or self.burn_in < 0:
            raise ValueError("d must be positive and burn_in nonnegative")

    @classmethod
    def from_values(cls, mu, z0, mu_prime, z0_prime, d=DEFAULT_DISTANCE, burn_in=DEFAULT_BURN_IN):
        return cls(ChaoticKey(mu, z0), ChaoticKey(mu_prime, z0_prime), d, burn_in)

    def values(self) -> dict[str, float]:
        return {"mu": self.perm_key.mu, "z0": self.perm_key.z0,
                "mu_prime": self.matrix_key.mu, "z0_prime": self.matrix_key.z0}

    def with_component(self, name: str, value: float) -> "KeyBundle":
        vals = self.values()
        if name not in vals:
            raise KeyError(name)
        vals[name] = value
        return KeyBundle.from_values(**vals, d=self.d, burn_in=self.burn_in)

    def perturbed(self, name: str, delta: float) -> "KeyBundle":
        return self.with_component(name, self.values()[name] + delta)

    def to_text(self) -> str:
        return "".join(f"{k}={format_value(v)}\n" for k, v in self.values().items())

    @classmethod
    def from_text(cls, text: str, d: int = DEFAULT_DISTANCE, burn_in: int = DEFAULT_BURN_IN) -> "KeyBundle":
        vals = parse_key_text(text)
        if set(vals) != set(KEY_FIELDS):
            raise FormatError(f"key file needs exactly {', '.join(KEY_FIELDS)}; got {', '.join(sorted(vals)) or 'nothing'}")
        try:
            return cls.from_values(**vals, d=d, burn_in=burn_in)
        except DomainError as exc:
            raise FormatError(str(exc)) from None

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path, d: int = DEFAULT_DISTANCE, burn_in: int = DEFAULT_BURN_IN) -> "KeyBundle":
        return cls.from_text(Path(path).read_text(), d, burn_in)


@dataclass(frozen=True)
class EncodeProfile:
    cr: float
    s: int | None = None
    sparsify: bool = True
    permute: bool = True

    def __post_init__(self):
        if not 0.0 < self.cr <= 1.0:
            raise ValueError(f"compression ratio must lie in (0, 1], got {self.cr}")
        if self.s is not None and self.s < 1:
            raise ValueError("s must be positive")

    def measurements(self, M: int) -> int:
        # guard against cr*M landing a hair above an integer
        return max(1, math.ceil(self.cr * M - 1e-9))


@dataclass
class Decoded:
    output: np.ndarray
    reconstruction: Reconstruction = field(repr=False)

    @property
    def converged(self) -> bool:
        return self.reconstruction.all_converged


def permutation_for(keys: KeyBundle, M: int, N: int, enabled: bool = True) -> perm.PermutationOrder:
    if not enabled:
        return perm.PermutationOrder.identity(M * N)
    return perm.order_by_flags(keys.perm_key, M * N, keys.burn_in)


def sparse_signal(img: np.ndarray, profile: EncodeProfile) -> np.ndarray:
    x = np.asarray(img, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"expected a 2-D signal, got shape {x.shape}")
    if not profile.sparsify:
        return x
    check_image_shape(x.shape)
    coeffs = dct2(x)
    return coeffs if profile.s is None else best_s_term(coeffs, min(profile.s, coeffs.size))


def encode(img: np.ndarray, keys: KeyBundle, profile: EncodeProfile) -> Ciphertext:
    x = sparse_signal(img, profile)
    M, N = x.shape
    x_star = perm.apply(x, permutation_for(keys, M, N, profile.permute))
    phi = build_matrix(keys.matrix_key, profile.measurements(M), M, keys.d, keys.burn_in)
    return pcs_sample(x_star, phi)


def decode(ct: Ciphertext, keys: KeyBundle, profile: EncodeProfile,
           cfg: SolverConfig | None = None, threads: int | None = None) -> Decoded:
    """Invert :func:`encode`. The matrix size comes from the ciphertext header."""
    K, M, N = ct.dims
    if ct.d != keys.d:
        raise DimensionError(f"ciphertext was sampled with d={ct.d}, keys specify d={keys.d}")
    phi = build_matrix(keys.matrix_key, K, M, keys.d, keys.burn_in)
    rec = pcs_reconstruct(ct, phi, cfg, threads)
    x = perm.invert_apply(rec.signal, permutation_for(keys, M, N, profile.permute))
    if profile.sparsify:
        x = np.clip(idct2(x), 0.0, 255.0)
    return Decoded(x, rec)


def _unit_from_bytes(chunk: bytes) -> float:
    # top 53 bits -> k / 2**53, exact in double precision
    return (int.from_bytes(chunk, "big") >> 11) / float(1 << 53)


def keygen(seed_entropy: bytes, d: int = DEFAULT_DISTANCE, burn_in: int = DEFAULT_BURN_IN) -> KeyBundle:
    """Derive a key bundle deterministically from 32 bytes of entropy.

    Component ``i`` is sliced from SHA-256(tag || seed || i || attempt);
    control parameters (mu, mu') are mapped into :data:`KEYGEN_MU_RANGE`,
    initial values stay uniform on (0, 1). Attempts are retried while the
    value is 0 or equals its partner (mu == z0). After 64 failed attempts a fixed fallback is used, which
    for SHA-256 output does not happen in practice.
    """
    seed = bytes(seed_entropy)
    if len(seed) != 32:
        raise ValueError("seed_entropy must be exactly 32 bytes")
    fallback = (0.6180339887498949, 0.3819660112501051, 0.4142135623730950, 0.2928932188134524)
    vals: list[float] = []
    for i in range(4):
        partner = vals[i - 1] if i % 2 == 1 else None
        for attempt in range(_KEYGEN_ATTEMPTS):
            digest = hashlib.sha256(_KEYGEN_TAG + seed + bytes([i, attempt])).digest()
            v = _unit_from_bytes(digest[:8])
            if i % 2 == 0:
                lo, hi = KEYGEN_MU_RANGE
                v = lo + (hi - lo) * v
            if 0.0 < v < 1.0 and v != partner:
                break
        else:
            v = fallback[i]
        vals.append(v)
    return KeyBundle.from_values(*vals, d=d, burn_in=burn_in)
