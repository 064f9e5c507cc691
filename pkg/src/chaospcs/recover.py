"""Sparse recovery: l1 minimisation per column and an exhaustive l0 oracle.

The l1 solver runs monotone FISTA on ``lam*||x||_1 + 0.5*||Ax - y||^2``
and halves ``lam`` until the residual target is met. After every stage the
current support is refit by least squares, and the refit is taken as soon
as a duality-gap certificate shows it optimal for the equality-constrained
problem.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionError, SizeLimitError
from .sense import Ciphertext, MeasurementMatrix

BLOCK_COLUMNS = 128
L0_MAX_COLUMNS = 20
L0_MAX_SPARSITY = 4


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 5000
    convergence_tol: float = 1e-8
    noise_epsilon: float = 0.0
    mode: str = "equality"
    # equality mode stops once ||Ax - y|| <= residual_rtol * ||y||
    residual_rtol: float = 1e-6
    max_stages: int = 60
    debias: bool = True
    # relative duality gap that certifies a refit as the l1 minimiser
    gap_rtol: float = 1e-4
    power_iterations: int = 20
    track_objective: bool = False

    def __post_init__(self):
        if self.mode not in ("equality", "noisy"):
            raise ValueError(f"mode must be 'equality' or 'noisy', got {self.mode!r}")
        if self.max_iterations < 1 or self.max_stages < 1:
            raise ValueError("iteration limits must be positive")
        if not self.convergence_tol > 0 or not self.residual_rtol > 0:
            raise ValueError("tolerances must be positive")
        if self.noise_epsilon < 0:
            raise ValueError("noise_epsilon must be nonnegative")
        if self.mode == "equality" and self.noise_epsilon != 0:
            object.__setattr__(self, "noise_epsilon", 0.0)

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class RecoveryResult:
    solution: np.ndarray
    residual_norm: float
    iterations_used: int
    converged: bool
    stages: int = 0
    objective_history: list = field(default_factory=list)


@dataclass
class Reconstruction:
    """Output of :func:`pcs_reconstruct`: the signal plus per-column diagnostics."""

    signal: np.ndarray
    converged: np.ndarray
    residual_norms: np.ndarray
    iterations: np.ndarray

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))

    def summary(self) -> str:
        bad = int(np.count_nonzero(~self.converged))
        return (f"{self.converged.size - bad}/{self.converged.size} columns converged, "
                f"max residual {float(np.max(self.residual_norms, initial=0.0)):.3g}, "
                f"iterations {int(np.sum(self.iterations))}")


def _entries(phi) -> np.ndarray:
    return phi.entries if isinstance(phi, MeasurementMatrix) else np.asarray(phi, dtype=np.float64)


def power_norm_sq(A: np.ndarray, iterations: int = 20) -> float:
    """Estimate ||A||_2^2 by power iteration on A^T A from a fixed start vector."""
    v = np.full(A.shape[1], 1.0 / math.sqrt(A.shape[1]))
    est = 0.0
    for _ in range(iterations):
        w = A.T @ (A @ v)
        est = float(np.linalg.norm(w))
        if est == 0.0:
            return 0.0
        v = w / est
    return est


def _soft(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _col_norm(a):
    return np.sqrt(np.einsum("ij,ij->j", a, a))


def _fista_stage(A, Y, X, AX, lam, L, cfg, history):
    """Monotone FISTA at fixed per-column ``lam``; one column per problem.

    Momentum restarts for a column whenever its trial point is rejected.
    """
    B = Y.shape[1]
    X = X.copy()
    AX = AX.copy()
    L = L.copy()
    iters = np.zeros(B, dtype=np.int64)

    live = np.arange(B)
    x, ax = X, AX
    y_pt, ay = x.copy(), ax.copy()
    t = np.ones(B)
    res = ax - Y
    fx = 0.5 * np.einsum("ij,ij->j", res, res) + lam * np.abs(x).sum(axis=0)
    yk, lk, lamk = Y, L, lam
    for _ in range(cfg.max_iterations):
        r_y = ay - yk
        grad = A.T @ r_y
        f_y = 0.5 * np.einsum("ij,ij->j", r_y, r_y)
        while True:
            v = y_pt - grad / lk
            z = np.sign(v) * np.maximum(np.abs(v) - lamk / lk, 0.0)
            az = A @ z
            r_z = az - yk
            f_z = 0.5 * np.einsum("ij,ij->j", r_z, r_z)
            step = z - y_pt
            step_sq = np.einsum("ij,ij->j", step, step)
            bound = f_y + np.einsum("ij,ij->j", grad, step) + 0.5 * lk * step_sq
            bad = f_z > bound + 1e-12 * np.abs(bound)
            if not bad.any():
                break
            lk = np.where(bad, 2.0 * lk, lk)
        f_z += lamk * np.abs(z).sum(axis=0)
        take = f_z <= fx
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        a, b = t / t_new, (t - 1.0) / t_new
        if take.all():
            y_pt = z + b * (z - x)
            ay = az + b * (az - ax)
            x, ax, fx = z, az, f_z
        else:
            x_new = np.where(take, z, x)
            ax_new = np.where(take, az, ax)
            fx = np.where(take, f_z, fx)
            y_pt = x_new + a * (z - x_new) + b * (x_new - x)
            ay = ax_new + a * (az - ax_new) + b * (ax_new - ax)
            # restart: rejected columns continue from x_new with no momentum
            y_pt[:, ~take] = x_new[:, ~take]
            ay[:, ~take] = ax_new[:, ~take]
            t_new[~take] = 1.0
            x, ax = x_new, ax_new
        t = t_new
        if history is not None:
            history.append(fx.copy())
        iters[live] += 1

        done = step_sq <= (cfg.convergence_tol ** 2) * np.maximum(np.einsum("ij,ij->j", z, z), 1e-300)
        if done.any():
            X[:, live[done]] = x[:, done]
            AX[:, live[done]] = ax[:, done]
            L[live[done]] = lk[done]
            keep = ~done
            live = live[keep]
            if live.size == 0:
                break
            x, ax, y_pt, ay = x[:, keep], ax[:, keep], y_pt[:, keep], ay[:, keep]
            fx, lk, lamk, yk, t = fx[keep], lk[keep], lamk[keep], yk[:, keep], t[keep]
    if live.size:
        X[:, live] = x
        AX[:, live] = ax
        L[live] = lk
    return X, AX, L, iters


def _refit(A, y, x, lam, target, gap_rtol):
    """Least-squares refit on supp(x), kept only if certified l1-optimal.

    Any ``w`` bounds the equality-constrained optimum from below by
    ``w.y / ||A^T w||_inf``. The dual used is the scaled residual of the
    penalised solution, corrected so that ``A_S^T w = sign(x_S)`` holds
    exactly on the refit support; the bound is then
    ``||x_S||_1 / ||A^T w||_inf``.
    """
    support = np.flatnonzero(x)
    if support.size == 0 or support.size > A.shape[0]:
        return None
    coef, *_ = np.linalg.lstsq(A[:, support], y, rcond=None)
    big = np.abs(coef) > 1e-10 * np.max(np.abs(coef))
    support, coef = support[big], coef[big]
    cand = np.zeros_like(x)
    cand[support] = coef
    if np.linalg.norm(A @ cand - y) > target:
        return None
    sub = A[:, support]
    w = (y - A @ x) / lam
    fix, *_ = np.linalg.lstsq(sub.T, np.sign(coef) - sub.T @ w, rcond=None)
    w += fix
    if np.max(np.abs(sub.T @ w - np.sign(coef))) > 1e-9:
        return None
    if np.max(np.abs(A.T @ w)) > 1.0 + gap_rtol:
        return None
    return cand


def solve_block(A: np.ndarray, Y: np.ndarray, cfg: SolverConfig, L0: float | None = None):
    """Solve every column of ``Y`` independently. Returns (X, residuals, iterations, stages, converged, history)."""
    K, M = A.shape
    B = Y.shape[1]
    ynorm = _col_norm(Y)
    if cfg.mode == "noisy":
        target = np.full(B, cfg.noise_epsilon)
    else:
        target = cfg.residual_rtol * ynorm
    X = np.zeros((M, B))
    AX = np.zeros((K, B))
    iters = np.zeros(B, dtype=np.int64)
    stages = np.zeros(B, dtype=np.int64)
    done = ynorm <= target
    if L0 is None:
        L0 = power_norm_sq(A, cfg.power_iterations)
    L = np.full(B, max(L0, 1e-300))
    lam = np.max(np.abs(A.T @ Y), axis=0) / 2.0
    history = [] if cfg.track_objective else None
    refit = cfg.debias and cfg.mode == "equality"

    for _ in range(cfg.max_stages):
        live = np.flatnonzero(~done)
        if live.size == 0:
            break
        hist = [] if history is not None else None
        Xs, AXs, Ls, its = _fista_stage(A, Y[:, live], X[:, live], AX[:, live], lam[live], L[live], cfg, hist)
        if history is not None:
            history.append(hist)
        X[:, live], AX[:, live], L[live] = Xs, AXs, Ls
        iters[live] += its
        stages[live] += 1
        res = _col_norm(AX[:, live] - Y[:, live])
        for j, col in enumerate(live):
            if res[j] <= target[col]:
                done[col] = True
            elif refit:
                cand = _refit(A, Y[:, col], X[:, col], lam[col], target[col], cfg.gap_rtol)
                if cand is not None:
                    X[:, col] = cand
                    AX[:, col] = A @ cand
                    done[col] = True
        lam[~done] /= 2.0
    residuals = _col_norm(A @ X - Y)
    converged = residuals <= target * (1.0 + 1e-9)
    return X, residuals, iters, stages, converged, history


def l1_solve(phi, y, cfg: SolverConfig | None = None) -> RecoveryResult:
    """Minimise ||x||_1 subject to ||phi x - y||_2 <= eps for a single measurement vector."""
    cfg = cfg or SolverConfig()
    A = _entries(phi)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1 or y.size != A.shape[0]:
        raise DimensionError(f"measurement vector of length {y.size} does not match {A.shape[0]} rows")
    X, res, its, stages, conv, hist = solve_block(A, y[:, None], cfg)
    history = [np.array([h[0] for h in stage]) for stage in hist] if hist is not None else []
    return RecoveryResult(X[:, 0], float(res[0]), int(its[0]), bool(conv[0]), int(stages[0]), history)


def pcs_reconstruct(ct: Ciphertext, phi, cfg: SolverConfig | None = None,
                    threads: int | None = None) -> Reconstruction:
    """Recover every column of the ciphertext independently.

    Columns are split into fixed blocks of ``BLOCK_COLUMNS``; ``threads`` only
    decides how many blocks run at once, so the output does not depend on it.
    """
    cfg = cfg or SolverConfig()
    A = _entries(phi)
    Y = ct.measurements if isinstance(ct, Ciphertext) else np.asarray(ct, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != A.shape[0]:
        raise DimensionError(f"ciphertext with {Y.shape[0]} rows does not match a {A.shape[0]}x{A.shape[1]} matrix")
    if isinstance(ct, Ciphertext) and ct.M != A.shape[1]:
        raise DimensionError(f"ciphertext expects M={ct.M}, matrix has {A.shape[1]} columns")
    N = Y.shape[1]
    L0 = power_norm_sq(A, cfg.power_iterations)
    blocks = [slice(i, min(i + BLOCK_COLUMNS, N)) for i in range(0, N, BLOCK_COLUMNS)]

    def run(sl):
        return solve_block(A, np.ascontiguousarray(Y[:, sl]), cfg, L0)

    workers = threads if threads is not None else (os.cpu_count() or 1)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(blocks))) as pool:
            outs = list(pool.map(run, blocks))
    else:
        outs = [run(sl) for sl in blocks]
    X = np.zeros((A.shape[1], N))
    res = np.zeros(N)
    its = np.zeros(N, dtype=np.int64)
    conv = np.zeros(N, dtype=bool)
    for sl, (Xb, rb, ib, _, cb, _) in zip(blocks, outs):
        X[:, sl], res[sl], its[sl], conv[sl] = Xb, rb, ib, cb
    return Reconstruction(X, conv, res, its)


def l0_oracle(phi, y, s_max: int, tol: float = 1e-9):
    """Exhaustive search for the sparsest x with ||phi x - y|| <= tol.

    Supports are tried by increasing size, then lexicographically; the first
    hit is returned as ``(support, coefficients)`` with 0-based column
    indices. Returns ``None`` when no support of size <= s_max fits.
    """
    A = _entries(phi)
    y = np.asarray(y, dtype=np.float64)
    K, M = A.shape
    if M > L0_MAX_COLUMNS or s_max > L0_MAX_SPARSITY:
        raise SizeLimitError(f"l0 oracle is capped at M <= {L0_MAX_COLUMNS}, s_max <= {L0_MAX_SPARSITY}")
    if y.shape != (K,):
        raise DimensionError(f"measurement vector of length {y.size} does not match {K} rows")
    if np.linalg.norm(y) <= tol:
        return (), np.zeros(0)
    for size in range(1, s_max + 1):
        for support in itertools.combinations(range(M), size):
            sub = A[:, support]
            coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
            if np.linalg.norm(sub @ coef - y) <= tol:
                return support, coef
    return None
