"""Experiments and security checks on the codec.

Every experiment is a deterministic function of its arguments and seeds;
attack noise comes from numpy's seeded generator, never from the keys.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import permute as perm
from .chaos import DEFAULT_BURN_IN, ChaoticKey
from .imaging import idct2, psnr
from .pipeline import KEYGEN_MU_RANGE, EncodeProfile, KeyBundle, decode, encode, permutation_for, sparse_signal
from .recover import SolverConfig
from .sense import DEFAULT_DISTANCE, Ciphertext, build_matrix, pcs_sample

KEY_COMPONENTS = ("mu", "z0", "mu_prime", "z0_prime")


@dataclass
class ExperimentReport:
    """Rows of named values, written as CSV with 6 significant digits."""

    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, **row) -> None:
        self.rows.append(row)

    def column(self, name: str) -> list:
        return [r.get(name) for r in self.rows]

    def find(self, **match) -> dict:
        for r in self.rows:
            if all(r.get(k) == v for k, v in match.items()):
                return r
        raise KeyError(match)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_fmt(r.get(c, "")) for c in self.columns])
        return buf.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.to_csv())


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(float(v), ".6g")
    return str(v)


# -- attacks -------------------------------------------------------------------

def awgn_attack(ct: Ciphertext, variance: float = 1.0, noise_seed: int = 0) -> Ciphertext:
    if variance <= 0:
        raise ValueError("variance must be positive")
    rng = np.random.default_rng(noise_seed)
    noise = rng.normal(0.0, math.sqrt(variance), size=ct.measurements.shape)
    return ct.replace(ct.measurements + noise)


def crop_block_shape(K: int, N: int, fraction: float) -> tuple[int, int]:
    """Rows and columns of the zeroed corner block: ceil(K/2) x ceil(2*fraction*N), clipped to N."""
    if not 0.0 < fraction < 1.0:
        raise ValueError("crop fraction must lie in (0, 1)")
    return math.ceil(K / 2), min(N, math.ceil(2.0 * fraction * N - 1e-9))


def crop_attack(ct: Ciphertext, fraction: float = 1 / 8) -> Ciphertext:
    """Zero the upper-left block of the measurement matrix."""
    rows, cols = crop_block_shape(ct.K, ct.N, fraction)
    y = ct.measurements.copy()
    y[:rows, :cols] = 0.0
    return ct.replace(y)


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    awgn_variance: float = 1.0
    crop_fraction: float = 1 / 8
    noise_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("awgn", "crop"):
            raise ValueError(f"unknown attack {self.kind!r}")

    def apply(self, ct: Ciphertext) -> Ciphertext:
        if self.kind == "awgn":
            return awgn_attack(ct, self.awgn_variance, self.noise_seed)
        return crop_attack(ct, self.crop_fraction)

    def describe(self, ct: Ciphertext) -> str:
        if self.kind == "awgn":
            return f"awgn var={self.awgn_variance:g} seed={self.noise_seed}"
        rows, cols = crop_block_shape(ct.K, ct.N, self.crop_fraction)
        return f"crop {rows}x{cols}"


# -- reconstruction experiments ------------------------------------------------

def cr_sweep(img, keys: KeyBundle, crs, with_permutation: bool = True, attack: AttackSpec | None = None,
             cfg: SolverConfig | None = None, s: int | None = None, threads: int | None = None) -> ExperimentReport:
    """PSNR of decode(attack(encode(img))) at each compression ratio.

    The unpermuted baseline samples with the same chaotic matrix.
    """
    img = np.asarray(img, dtype=np.float64)
    setting = ("E" if with_permutation else "N") + (f"-{attack.kind}" if attack else "")
    report = ExperimentReport(["setting", "cr", "K", "psnr_db", "psnr_vs_sparse_db", "converged", "attack"])
    best = None
    for cr in crs:
        profile = EncodeProfile(cr, s, sparsify=True, permute=with_permutation)
        if best is None:
            best = np.clip(_reference(img, profile), 0.0, 255.0)
        ct = encode(img, keys, profile)
        note = ""
        if attack is not None:
            note = attack.describe(ct)
            ct = attack.apply(ct)
        out = decode(ct, keys, profile, cfg, threads)
        report.add(setting=setting, cr=cr, K=ct.K, psnr_db=psnr(img, out.output),
                   psnr_vs_sparse_db=psnr(best, out.output), converged=out.converged, attack=note)
    return report


def _reference(img, profile):
    return idct2(sparse_signal(img, profile))


def psnr_table(img, keys: KeyBundle, crs, cfg: SolverConfig | None = None, s: int | None = None,
               noise_seed: int = 0, crop_fraction: float = 1 / 8, threads: int | None = None) -> ExperimentReport:
    """Six settings per CR (clean, AWGN, crop; each without and with permutation) and their differences.

    Rows are labelled G1..G6 in that order, followed by G2-G1, G4-G3 and G6-G5.
    """
    plans = [
        ("G1", False, None), ("G2", True, None),
        ("G3", False, AttackSpec("awgn", noise_seed=noise_seed)), ("G4", True, AttackSpec("awgn", noise_seed=noise_seed)),
        ("G5", False, AttackSpec("crop", crop_fraction=crop_fraction)), ("G6", True, AttackSpec("crop", crop_fraction=crop_fraction)),
    ]
    report = ExperimentReport(["row", "setting"] + [f"cr={cr:g}" for cr in crs])
    values: dict[str, list[float]] = {}
    for label, with_perm, attack in plans:
        sweep = cr_sweep(img, keys, crs, with_perm, attack, cfg, s, threads)
        values[label] = sweep.column("psnr_db")
        report.add(row=label, setting=sweep.rows[0]["setting"], **{f"cr={cr:g}": v for cr, v in zip(crs, values[label])})
    for hi, lo in (("G2", "G1"), ("G4", "G3"), ("G6", "G5")):
        diff = [a - b for a, b in zip(values[hi], values[lo])]
        report.add(row=f"{hi}-{lo}", setting="difference", **{f"cr={cr:g}": v for cr, v in zip(crs, diff)})
    report.meta["values"] = values
    return report


def key_sensitivity_suite(img, keys: KeyBundle, perturbation: float = 1e-16, cfg: SolverConfig | None = None,
                          cr: float = 0.2, s: int | None = None, threads: int | None = None) -> ExperimentReport:
    """Decode with the right keys, then with each key component nudged by ``perturbation``."""
    if perturbation < 0:
        raise ValueError("perturbation must be nonnegative")
    img = np.asarray(img, dtype=np.float64)
    profile = EncodeProfile(cr, s)
    ct = encode(img, keys, profile)
    report = ExperimentReport(["component", "perturbation", "value", "psnr_db"])
    base = decode(ct, keys, profile, cfg, threads).output
    report.add(component="none", perturbation=0.0, value=float("nan"), psnr_db=psnr(img, base))
    for name in KEY_COMPONENTS:
        wrong = keys.perturbed(name, perturbation)
        out = decode(ct, wrong, profile, cfg, threads).output
        report.add(component=name, perturbation=perturbation, value=wrong.values()[name], psnr_db=psnr(img, out))
    return report


# -- statistics ----------------------------------------------------------------

def concentrated_signal(M: int, N: int, s: int, uniform: bool = False) -> np.ndarray:
    """Signal with ``s`` unit entries packed into as few columns as possible, or spread evenly."""
    if not 0 <= s <= M * N:
        raise ValueError("s must lie in 0..M*N")
    flat = np.zeros(M * N)
    flat[:s] = 1.0
    # column-major fill packs columns; row-major fill deals entries round-robin
    return flat.reshape((M, N), order="C" if uniform else "F")


def random_keys(rng: np.random.Generator, count: int, mu_range=(0.0, 1.0)) -> list[ChaoticKey]:
    keys = []
    while len(keys) < count:
        mu = rng.uniform(*mu_range)
        z0 = rng.uniform(0.0, 1.0)
        if 0.0 < mu < 1.0 and 0.0 < z0 < 1.0 and mu != z0:
            keys.append(ChaoticKey(mu, z0))
    return keys


def random_bundles(rng: np.random.Generator, count: int, d: int = DEFAULT_DISTANCE,
                   burn_in: int = DEFAULT_BURN_IN) -> list[KeyBundle]:
    """Random key bundles drawn from the same parameter ranges as :func:`keygen`."""
    pairs = random_keys(rng, 2 * count, KEYGEN_MU_RANGE)
    return [KeyBundle(pairs[2 * i], pairs[2 * i + 1], d, burn_in) for i in range(count)]


def acceptability_montecarlo(M: int, N: int, s: int, trials: int = 10_000, rng_seed: int = 0,
                             uniform: bool = False, burn_in: int | None = None) -> tuple[float, float]:
    """Fraction of keyed random orders that are acceptable, and the closed-form approximation."""
    if not 0 <= s <= M * N:
        raise ValueError("s must lie in 0..M*N")
    if trials < 1000:
        raise ValueError("at least 1000 trials are required")
    x = concentrated_signal(M, N, s, uniform)
    formula = perm.acceptability_probability(N, s, approximate=True)
    if N == 1 or s == 0:
        return 0.0, formula
    kwargs = {} if burn_in is None else {"burn_in": burn_in}
    rng = np.random.default_rng(rng_seed)
    nz = np.flatnonzero(x.ravel(order="F") != 0)
    before = perm.sparsity_vector(x, 0.0).max
    hits = 0
    for order in perm.orders_by_flags(random_keys(rng, trials), M * N, **kwargs):
        # column of each nonzero after permuting: x_star[i] = x[idx[i]]
        inverse = np.empty(M * N, dtype=np.int64)
        inverse[order.zero_based] = np.arange(M * N)
        counts = np.bincount(inverse[nz] // M, minlength=N)
        hits += counts.max() < before
    return hits / trials, formula


def through_origin_fit(x, y) -> tuple[float, float]:
    """Least-squares slope of y = k x and the uncentred R^2."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    denom = float(x @ x)
    if denom == 0.0:
        return 0.0, 0.0
    k = float(x @ y) / denom
    ss_tot = float(y @ y)
    r2 = 1.0 - float(((y - k * x) ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return k, r2


def secrecy_statistics(plaintexts, keys: KeyBundle, profile: EncodeProfile, labels=None) -> ExperimentReport:
    """Ciphertext entry statistics against plaintext power W = ||X||_F^2 / (M N).

    Plaintexts are used as given (no sparsification). The report carries
    one row per plaintext plus a final ``fit`` row with the slope and R^2
    of variance against power through the origin.
    """
    plaintexts = [np.asarray(p, dtype=np.float64) for p in plaintexts]
    if len(plaintexts) < 2:
        raise ValueError("need at least two plaintexts")
    labels = labels or [f"x{i}" for i in range(len(plaintexts))]
    raw = EncodeProfile(profile.cr, None, sparsify=False, permute=profile.permute)
    report = ExperimentReport(["label", "power", "permuted_power", "mean", "variance", "excess_kurtosis", "slope", "r2"])
    powers, variances = [], []
    for label, x in zip(labels, plaintexts):
        M, N = x.shape
        order = permutation_for(keys, M, N, raw.permute)
        x_star = perm.apply(x, order)
        phi = build_matrix(keys.matrix_key, raw.measurements(M), M, keys.d, keys.burn_in)
        y = pcs_sample(x_star, phi).measurements.ravel()
        w = float(np.mean(x * x))
        var = float(np.var(y))
        centred = y - y.mean()
        kurt = float(np.mean(centred ** 4) / var ** 2 - 3.0) if var > 0 else float("nan")
        powers.append(w)
        variances.append(var)
        report.add(label=label, power=w, permuted_power=float(np.mean(x_star * x_star)), mean=float(y.mean()),
                   variance=var, excess_kurtosis=kurt)
    k, r2 = through_origin_fit(powers, variances)
    report.add(label="fit", slope=k, r2=r2)
    report.meta.update(slope=k, r2=r2, powers=powers, variances=variances)
    return report
