import numpy as np
import pytest
from scipy.optimize import linprog

from chaospcs.chaos import ChaoticKey
from chaospcs.errors import DimensionError, SizeLimitError
from chaospcs.harness import random_keys
from chaospcs.pipeline import KEYGEN_MU_RANGE
from chaospcs.recover import (BLOCK_COLUMNS, SolverConfig, l0_oracle, l1_solve, pcs_reconstruct,
                              power_norm_sq)
from chaospcs.sense import Ciphertext, build_matrix, pcs_sample, required_measurements


def basis_pursuit_lp(A, y):
    # independent oracle: min ||x||_1 s.t. Ax = y as a linear program in (x+, x-)
    M = A.shape[1]
    res = linprog(np.ones(2 * M), A_eq=np.hstack([A, -A]), b_eq=y, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.x[:M] - res.x[M:]


def sparse_columns(gen, M, N, max_s):
    x = np.zeros((M, N))
    for j in range(N):
        s = gen.integers(1, max_s + 1)
        x[gen.choice(M, s, replace=False), j] = gen.normal(size=s)
    return x


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(mode="exact")
    with pytest.raises(ValueError):
        SolverConfig(convergence_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(noise_epsilon=-1.0, mode="noisy")
    assert SolverConfig(noise_epsilon=0.5).noise_epsilon == 0.0
    assert SolverConfig(noise_epsilon=0.5, mode="noisy").noise_epsilon == 0.5


def test_zero_measurements():
    phi = build_matrix(ChaoticKey(0.63, 0.33), 6, 10)
    r = l1_solve(phi, np.zeros(6))
    assert not r.solution.any() and r.residual_norm == 0.0 and r.converged


def test_square_system_is_pinned():
    phi = build_matrix(ChaoticKey(0.41, 0.77), 8, 8)
    y = np.random.default_rng(1).normal(size=8)
    r = l1_solve(phi, y)
    assert r.converged
    np.testing.assert_allclose(r.solution, np.linalg.solve(phi.entries, y), rtol=1e-6, atol=1e-6)


def test_one_sparse_matches_l0():
    phi = build_matrix(ChaoticKey(0.55, 0.19), 6, 8)
    x = np.zeros(8)
    x[5] = -1.7
    y = phi.entries @ x
    support, coef = l0_oracle(phi, y, 1)
    r = l1_solve(phi, y)
    assert support == (5,)
    est = np.zeros(8)
    est[list(support)] = coef
    assert np.linalg.norm(r.solution - est) <= 1e-6 * np.linalg.norm(est)


def test_dimension_checks():
    phi = build_matrix(ChaoticKey(0.55, 0.19), 6, 8)
    with pytest.raises(DimensionError):
        l1_solve(phi, np.zeros(5))
    with pytest.raises(DimensionError):
        pcs_reconstruct(np.zeros((5, 2)), phi)
    with pytest.raises(DimensionError):
        pcs_reconstruct(Ciphertext(np.zeros((6, 2)), M=9), phi)


def test_residual_certificate_and_converged_invariant():
    gen = np.random.default_rng(2)
    phi = build_matrix(ChaoticKey(0.37, 0.52), 20, 40)
    cfg = SolverConfig()
    for _ in range(10):
        x = sparse_columns(gen, 40, 1, 5)[:, 0]
        y = phi.entries @ x + 1e-3 * gen.normal(size=20)
        r = l1_solve(phi, y, cfg)
        assert abs(r.residual_norm - np.linalg.norm(phi.entries @ r.solution - y)) <= 1e-12
        if r.converged:
            assert r.residual_norm <= cfg.noise_epsilon + cfg.residual_rtol * np.linalg.norm(y)


def test_noisy_mode_meets_epsilon():
    gen = np.random.default_rng(3)
    phi = build_matrix(ChaoticKey(0.37, 0.52), 20, 40)
    x = sparse_columns(gen, 40, 1, 3)[:, 0]
    y = phi.entries @ x + 0.01 * gen.normal(size=20)
    cfg = SolverConfig(mode="noisy", noise_epsilon=0.05)
    r = l1_solve(phi, y, cfg)
    assert r.converged and r.residual_norm <= 0.05 * (1 + 1e-9)
    assert np.abs(r.solution).sum() <= np.abs(l1_solve(phi, y).solution).sum()


def test_objective_never_increases():
    gen = np.random.default_rng(4)
    phi = build_matrix(ChaoticKey(0.62, 0.44), 24, 64)
    y = phi.entries @ sparse_columns(gen, 64, 1, 6)[:, 0]
    r = l1_solve(phi, y, SolverConfig(track_objective=True, debias=False))
    assert r.objective_history
    for stage in r.objective_history:
        assert np.all(np.diff(stage) <= 1e-12 * np.abs(stage[:-1]))


def test_power_norm_estimate():
    a = np.random.default_rng(5).normal(size=(12, 30))
    exact = np.linalg.norm(a, 2) ** 2
    assert power_norm_sq(a, 200) == pytest.approx(exact, rel=1e-6)
    assert power_norm_sq(a, 20) <= exact * (1 + 1e-12)
    assert power_norm_sq(np.zeros((3, 4))) == 0.0


def test_reconstruct_examples():
    phi = build_matrix(ChaoticKey(0.48, 0.21), 16, 32)
    zero = pcs_reconstruct(Ciphertext(np.zeros((16, 4)), M=32), phi)
    assert not zero.signal.any() and zero.all_converged
    x = sparse_columns(np.random.default_rng(6), 32, 4, 2)
    rec = pcs_reconstruct(pcs_sample(x, phi), phi)
    err = np.linalg.norm(rec.signal - x, axis=0) / np.linalg.norm(x, axis=0)
    assert np.all(err < 1e-3)
    one = pcs_reconstruct(pcs_sample(x[:, :1], phi), phi)
    assert one.signal[:, 0].tobytes() == l1_solve(phi, phi.entries @ x[:, 0]).solution.tobytes()
    assert "4/4 columns converged" in rec.summary()


def test_reconstruct_independent_of_threads():
    gen = np.random.default_rng(7)
    phi = build_matrix(ChaoticKey(0.33, 0.68), 12, 24)
    x = sparse_columns(gen, 24, 2 * BLOCK_COLUMNS + 17, 3)
    ct = pcs_sample(x, phi)
    a = pcs_reconstruct(ct, phi, threads=1)
    b = pcs_reconstruct(ct, phi, threads=4)
    assert a.signal.tobytes() == b.signal.tobytes()
    assert np.array_equal(a.iterations, b.iterations)


def test_lemma_regime_exact_recovery():
    # M = 64, K = 32, at most 4 nonzeros per column, 20 seeded trials
    gen = np.random.default_rng(8)
    for key in random_keys(gen, 20, KEYGEN_MU_RANGE):
        phi = build_matrix(key, 32, 64)
        x = sparse_columns(gen, 64, 16, 4)
        rec = pcs_reconstruct(pcs_sample(x, phi), phi)
        err = np.linalg.norm(rec.signal - x, axis=0) / np.linalg.norm(x, axis=0)
        assert err.max() < 1e-3


def test_l0_examples():
    phi = build_matrix(ChaoticKey(0.52, 0.36), 6, 10)
    support, coef = l0_oracle(phi, 2.5 * phi.entries[:, 2], 2)
    assert support == (2,)
    assert coef[0] == pytest.approx(2.5, rel=1e-12)
    assert l0_oracle(phi, np.zeros(6), 2) == ((), pytest.approx(np.zeros(0)))


def test_l0_limits():
    with pytest.raises(SizeLimitError):
        l0_oracle(np.zeros((4, 21)), np.zeros(4), 1)
    with pytest.raises(SizeLimitError):
        l0_oracle(np.zeros((4, 8)), np.zeros(4), 5)
    with pytest.raises(DimensionError):
        l0_oracle(np.zeros((4, 8)), np.zeros(3), 1)


def test_wrong_matrix_has_no_sparse_explanation():
    gen = np.random.default_rng(9)
    misses = 0
    for _ in range(100):
        k1, k2 = random_keys(gen, 2, KEYGEN_MU_RANGE)
        M = int(gen.integers(6, 17))
        s = int(gen.integers(1, 3))
        K = required_measurements(s, M, 2.0)
        x = np.zeros(M)
        x[gen.choice(M, s, replace=False)] = gen.normal(size=s)
        y = build_matrix(k2, K, M).entries @ x
        misses += l0_oracle(build_matrix(k1, K, M), y, s) is None
    assert misses >= 95


def test_l1_reaches_lp_optimum_even_when_l0_differs():
    # instances where a denser vector has the smaller l1 norm: the solver
    # must still find that minimiser
    gen = np.random.default_rng(10)
    for key in random_keys(gen, 40, KEYGEN_MU_RANGE):
        M = int(gen.integers(4, 17))
        s = int(gen.integers(1, 3))
        K = min(M, required_measurements(s, M, 2.0))
        phi = build_matrix(key, K, M)
        x = np.zeros(M)
        x[gen.choice(M, s, replace=False)] = gen.normal(size=s)
        y = phi.entries @ x
        ours = np.abs(l1_solve(phi, y).solution).sum()
        best = np.abs(basis_pursuit_lp(phi.entries, y)).sum()
        assert ours == pytest.approx(best, rel=1e-6)
