"""Tests for the optimization kernels, checked against independent oracles."""

import itertools

import numpy as np
import pytest

from psdmap.numcore import child_rng, circulant, gaussian_matrix, rng_from_seed
from psdmap.solvers import BpdnOptions, bpdn, fit_filter, min_l1_equality


def l0_support_oracle(mat, target, max_sparsity):
    """Exhaustive support enumeration: least-squares fit on every support of
    size <= max_sparsity, smallest residual wins, ties broken by the
    lexicographically smallest support."""
    n = mat.shape[1]
    best = (np.inf, ())
    for k in range(max_sparsity + 1):
        for supp in itertools.combinations(range(n), k):
            if k == 0:
                resid = float(np.linalg.norm(target))
            else:
                sol, *_ = np.linalg.lstsq(mat[:, list(supp)], target, rcond=None)
                resid = float(np.linalg.norm(mat[:, list(supp)] @ sol - target))
            if resid < best[0] - 1e-12:
                best = (resid, supp)
    return set(best[1])


def lp_vertex_oracle(mat, target, weights):
    """Weighted-l1 minimum over {z: mat z = target} by vertex enumeration.

    Every LP optimum is attained at a basic solution supported on at most
    m coordinates; enumerate all such supports on these tiny instances.
    """
    m, n = mat.shape
    scale = 1.0 + float(np.linalg.norm(target))
    best = np.inf
    for k in range(0, m + 1):
        for supp in itertools.combinations(range(n), k):
            if k == 0:
                if np.linalg.norm(target) <= 1e-9 * scale:
                    best = min(best, 0.0)
                continue
            sub = mat[:, list(supp)]
            sol, *_ = np.linalg.lstsq(sub, target, rcond=None)
            if np.linalg.norm(sub @ sol - target) <= 1e-9 * scale:
                best = min(best, float(np.abs(sol) @ weights[list(supp)]))
    return best


def bpdn_support(solution, rel_threshold=1e-3):
    peak = float(np.max(np.abs(solution)))
    if peak == 0.0:
        return set()
    return set(np.flatnonzero(np.abs(solution) > rel_threshold * peak))


class TestBpdn:
    def test_identity_soft_threshold(self):
        v = np.array([3.0, -1.5, 0.2, 0.0, 5.0])
        report = bpdn(np.eye(5), v, BpdnOptions(lam=1.0, tolerance=1e-12))
        expected = np.sign(v) * np.maximum(np.abs(v) - 1.0, 0.0)
        assert np.allclose(report.solution, expected, atol=1e-10)
        assert report.converged

    def test_zero_data_gives_zero(self):
        report = bpdn(gaussian_matrix(4, 6, child_rng(0, 0)), np.zeros(4), BpdnOptions(lam=0.5))
        assert np.array_equal(report.solution, np.zeros(6))
        assert report.converged

    def test_one_sparse_support_matches_enumeration(self):
        rng = child_rng(20, 0)
        mat = gaussian_matrix(6, 8, rng)
        z = np.zeros(8)
        z[3] = 1.2
        target = mat @ z
        report = bpdn(mat, target, BpdnOptions(lam_scale=1e-4, tolerance=1e-11, max_iterations=50000))
        assert bpdn_support(report.solution) == l0_support_oracle(mat, target, 2) == {3}

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            bpdn(np.array([[np.inf, 1.0]]), np.array([1.0]))

    def test_monotone_objective_and_report(self):
        rng = child_rng(21, 0)
        mat = gaussian_matrix(10, 20, rng)
        target = rng.normal(size=10)
        report = bpdn(mat, target, BpdnOptions())
        assert np.isfinite(report.objective)
        assert report.iterations <= BpdnOptions().max_iterations
        assert report.wall_time >= 0.0

    def test_lambda_to_zero_approaches_least_squares(self):
        rng = child_rng(22, 0)
        mat = gaussian_matrix(12, 5, rng)
        target = rng.normal(size=12)
        ls = np.linalg.lstsq(mat, target, rcond=None)[0]
        gaps = []
        for lam in (1e-1, 1e-3, 1e-5):
            rep = bpdn(mat, target, BpdnOptions(lam=lam, tolerance=1e-11, max_iterations=50000))
            gaps.append(np.linalg.norm(rep.solution - ls))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] < 1e-3

    def test_non_convergence_flagged_not_raised(self):
        rng = child_rng(23, 0)
        mat = gaussian_matrix(30, 60, rng)
        target = rng.normal(size=30)
        report = bpdn(mat, target, BpdnOptions(tolerance=1e-14, max_iterations=3))
        assert not report.converged


class TestMinL1Equality:
    def test_identical_signals_zero_innovations(self):
        # feasible split with zero objective exists when weights free the common block
        n, j = 6, 3
        rng = child_rng(24, 0)
        z_shared = rng.normal(size=n)
        mat = np.hstack([np.tile(np.eye(n), (j, 1)), np.kron(np.eye(j), np.eye(n))])
        target = np.tile(z_shared, j)
        weights = np.concatenate([np.zeros(n), np.ones(n * j)])
        report = min_l1_equality(mat, target, weights)
        assert report.converged
        assert report.objective < 1e-8
        assert np.allclose(report.solution[:n], z_shared, atol=1e-6)

    def test_matches_lp_vertex_oracle(self):
        hits = 0
        for trial in range(20):
            rng = child_rng(25, trial)
            m = int(rng.integers(2, 5))
            n = int(rng.integers(m + 1, 7))
            mat = gaussian_matrix(m, n, rng)
            z0 = np.zeros(n)
            support = rng.choice(n, size=m, replace=False)
            z0[support] = rng.normal(size=m)
            target = mat @ z0
            weights = np.ones(n)
            report = min_l1_equality(mat, target, weights)
            oracle = lp_vertex_oracle(mat, target, weights)
            assert report.converged
            assert abs(report.objective - oracle) <= 1e-6 * (1.0 + oracle)
            hits += 1
        assert hits == 20

    def test_free_common_block_never_beats_all_ones_on_innovations(self):
        rng = child_rng(26, 0)
        n, j = 4, 2
        edges = [rng.normal(size=n) for _ in range(j)]
        mat = np.hstack([np.tile(np.eye(n), (j, 1)), np.kron(np.eye(j), np.eye(n))])
        target = np.concatenate(edges)
        all_ones = np.ones(n * (j + 1))
        inn_only = all_ones.copy()
        inn_only[:n] = 0.0
        rep_all = min_l1_equality(mat, target, all_ones)
        rep_inn = min_l1_equality(mat, target, inn_only)
        inn_l1_all = np.abs(rep_all.solution[n:]).sum()
        inn_l1_inn = np.abs(rep_inn.solution[n:]).sum()
        assert inn_l1_inn <= inn_l1_all + 1e-6

    def test_feasibility_contract(self):
        rng = child_rng(27, 0)
        mat = gaussian_matrix(3, 8, rng)
        target = mat @ rng.normal(size=8)
        report = min_l1_equality(mat, target, np.ones(8))
        assert report.converged
        assert report.feasibility_residual <= 1e-6 * (1.0 + np.linalg.norm(target))

    def test_bad_weights_rejected(self):
        with pytest.raises(ValueError):
            min_l1_equality(np.eye(3), np.ones(3), np.array([0.5, 1.0, 1.0]))


class TestFitFilter:
    def test_unit_impulse_pilot(self):
        r = np.array([0.3, -0.1, 2.0, 0.7])
        assert np.allclose(fit_filter(np.eye(4), r), r)

    def test_exact_inversion_noiseless(self):
        rng = child_rng(28, 0)
        pilot = rng.normal(size=16)
        taps = np.zeros(16)
        taps[[0, 1, 2]] = [1.0, 0.9, 0.8]
        mat = circulant(pilot)
        received = mat @ taps
        est = fit_filter(mat, received)
        assert np.linalg.norm(est - taps) <= 1e-8 * np.linalg.norm(taps)

    def test_error_shrinks_with_noise(self):
        taps = np.zeros(24)
        taps[[0, 1, 2]] = [1.0, 0.9, 0.8]
        med_errors = []
        for snr_db in (0.0, 20.0):
            errors = []
            for seed in range(20):
                rng = child_rng(29, seed)
                pilot = rng.normal(size=24)
                mat = circulant(pilot)
                clean = mat @ taps
                sigma = np.sqrt(float(clean @ clean) * 10 ** (-snr_db / 10) / clean.size)
                received = clean + rng.normal(0.0, sigma, size=24)
                est = fit_filter(mat, received, ridge=1e-8)
                errors.append(np.linalg.norm(est - taps) / np.linalg.norm(taps))
            med_errors.append(np.median(errors))
        assert med_errors[1] < med_errors[0]

    def test_normal_equation_residual(self):
        rng = child_rng(30, 0)
        pilot = rng.normal(size=12)
        mat = circulant(pilot)
        received = rng.normal(size=12)
        est = fit_filter(mat, received)
        grad = mat.T @ (mat @ est - received)
        assert np.linalg.norm(grad) <= 1e-8 * (np.linalg.norm(mat.T @ received) + 1.0)
