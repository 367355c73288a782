import os

import numpy as np
import pytest
from scipy.optimize import brentq

from suffreduce.estimators import (
    ConvergenceError,
    EstimatorSpec,
    Family,
    NoSolutionError,
    SolverOptions,
    fantope_project,
    fantope_spca,
    glasso,
    ising_logpartition,
    ising_pmle,
    kkt_residual,
    lasso,
    nnls,
    objective_at,
    positive_invcov,
    reduction_for,
    solve,
    solve_decomposed,
    sparse_cov,
)
from suffreduce.instances import random_instance, sign_instance
from suffreduce.linkage import threshold_components
from suffreduce.penalty import GroupId, PenaltyKind, PenaltySpec
from suffreduce.symmat import SymMatrix

OPTS = SolverOptions(tol=1e-9)


def sym(rows):
    return SymMatrix.from_dense(np.array(rows, dtype=float))


def certificate_ok(spec, x, report, factor=10.0):
    scale = 1.0 + float(np.max(np.abs(x.dense() if isinstance(x, SymMatrix) else x)))
    return kkt_residual(spec, x, report.theta) <= factor * spec.opts.tol * scale


class TestClosedForms:
    def test_lasso(self):
        x = np.array([2.0, -0.3, 0.5, -1.5])
        assert np.array_equal(lasso(x, 0.5), [1.5, 0.0, 0.0, -1.0])

    def test_nnls(self):
        assert np.array_equal(nnls(np.array([1.0, -2.0])), [1.0, 0.0])

    def test_solve_dispatch_vector(self):
        spec = EstimatorSpec(Family.LASSO, PenaltySpec(PenaltyKind.ENTRYWISE_L1, 0.5))
        rep = solve(spec, np.array([2.0, 0.1]))
        assert np.array_equal(rep.theta, [1.5, 0.0])
        assert rep.converged and rep.kkt_residual == 0.0
        assert np.array_equal(rep.support, [True, False])


class TestGlasso:
    def test_identity_unpenalized(self):
        rep = glasso(sym(np.eye(3)), 0.0, OPTS)
        assert np.allclose(rep.theta.dense(), np.eye(3), atol=1e-9)

    def test_offdiag_penalty_below_level_gives_identity(self):
        # off-diagonal 0.9 <= 0.95 zeroes out; unpenalized diagonal matches
        rep = glasso(sym([[1.0, 0.9], [0.9, 1.0]]), 0.95, OPTS)
        assert np.allclose(rep.theta.dense(), np.eye(2), atol=1e-8)
        assert rep.theta.entry(0, 1) == 0.0

    def test_penalized_diagonal_closed_form(self):
        x = sym(np.diag([2.0, 5.0]))
        rep = glasso(x, 0.5, OPTS, penalize_diagonal=True)
        assert np.allclose(rep.theta.dense(), np.diag([1 / 2.5, 1 / 5.5]), atol=1e-9)

    def test_inverse_relation_unpenalized(self, rng):
        x = random_instance(rng, 6)
        rep = glasso(x, 0.0, OPTS)
        assert np.allclose(rep.theta.dense() @ x.dense(), np.eye(6), atol=1e-7)

    def test_matrix_weights(self):
        lam = np.array([[0.0, 0.95], [0.95, 0.0]])
        rep = glasso(sym([[1.0, 0.9], [0.9, 1.0]]), lam, OPTS)
        assert np.allclose(rep.theta.dense(), np.eye(2), atol=1e-8)

    def test_unpenalized_nonpositive_diagonal_rejected(self):
        with pytest.raises(NoSolutionError):
            glasso(sym([[0.0, 0.0], [0.0, 1.0]]), 0.5, OPTS)

    def test_certificate(self, rng):
        for _ in range(5):
            x = random_instance(rng, int(rng.integers(3, 12)))
            lam = float(rng.uniform(0.05, 0.5))
            spec = EstimatorSpec(
                Family.GLASSO, PenaltySpec(PenaltyKind.SYMMETRIC_L1, lam), opts=OPTS
            )
            rep = solve(spec, x)
            assert rep.converged
            assert certificate_ok(spec, x, rep)

    def test_support_components_match_threshold_graph(self, rng):
        x = random_instance(rng, 12, n_blocks=3)
        for lam in (0.2, 0.4, 0.7):
            rep = glasso(x, lam, OPTS)
            td = rep.theta.dense()
            keep = (np.abs(td) > 1e-8 * np.abs(td).max()).astype(float)
            got = threshold_components(SymMatrix.wrap(keep), 0.5)
            assert got == threshold_components(x, lam)

    def test_nonconvergence_raises(self, rng):
        x = random_instance(rng, 8)
        with pytest.raises(ConvergenceError):
            glasso(x, 0.1, SolverOptions(tol=1e-9, max_iter=3))


class TestFantopeProject:
    def test_rank_one_projection(self):
        got = fantope_project(sym(np.diag([3.0, 2.0, 1.0])), 1)
        assert np.allclose(got.dense(), np.diag([1.0, 0.0, 0.0]), atol=1e-11)

    def test_idempotent_on_projections(self, rng):
        q, _ = np.linalg.qr(rng.standard_normal((5, 2)))
        proj = q @ q.T
        got = fantope_project(SymMatrix.from_dense(proj), 2)
        assert np.allclose(got.dense(), proj, atol=1e-10)

    def test_tie_splits_evenly(self):
        # shifting by nu=0.1 leaves 0.5 on each tied eigenvalue
        got = fantope_project(sym(np.diag([0.6, 0.6])), 1)
        assert np.allclose(got.dense(), np.diag([0.5, 0.5]), atol=1e-11)

    def test_feasibility(self, rng):
        a = rng.standard_normal((6, 6))
        m = SymMatrix.from_dense((a + a.T) / 2)
        for k in (1, 3, 6):
            w = np.linalg.eigvalsh(fantope_project(m, k).dense())
            assert w.min() >= -1e-10 and w.max() <= 1 + 1e-10
            assert np.sum(w) == pytest.approx(k, abs=1e-9)

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            fantope_project(sym(np.eye(2)), 3)


class TestFantopeSpca:
    def test_top_eigenvector_at_zero_penalty(self):
        rep = fantope_spca(sym(np.diag([3.0, 1.0])), 0.0, 1, OPTS)
        assert np.allclose(rep.theta.dense(), np.diag([1.0, 0.0]), atol=1e-7)

    def test_matches_eigh_oracle(self, rng):
        x = random_instance(rng, 6)
        w, q = np.linalg.eigh(x.dense())
        target = q[:, -2:] @ q[:, -2:].T
        rep = fantope_spca(x, 0.0, 2, OPTS)
        assert np.allclose(rep.theta.dense(), target, atol=1e-6)

    def test_huge_penalty_full_rank_forces_identity(self):
        x = sym([[1.0, 0.4], [0.4, 2.0]])
        rep = fantope_spca(x, 100.0, 2, OPTS)
        assert np.allclose(rep.theta.dense(), np.eye(2), atol=1e-7)

    def test_certificate(self, rng):
        for _ in range(4):
            x = random_instance(rng, 7)
            lam = float(rng.uniform(0.05, 0.4))
            spec = EstimatorSpec(
                Family.FANTOPE_SPCA,
                PenaltySpec(PenaltyKind.SYMMETRIC_L1, lam),
                k=2,
                opts=OPTS,
            )
            rep = solve(spec, x)
            assert rep.converged
            assert certificate_ok(spec, x, rep)


class TestSparseCov:
    def test_floor_binds(self):
        rep = sparse_cov(sym(np.diag([5.0, 1.0])), 0.0, 2.0, OPTS)
        assert np.allclose(rep.theta.dense(), np.diag([5.0, 2.0]), atol=1e-8)

    def test_soft_threshold_when_already_feasible(self):
        rep = sparse_cov(sym([[5.0, 0.1], [0.1, 5.0]]), 1.0, 0.01, OPTS)
        assert np.allclose(rep.theta.dense(), np.diag([4.0, 4.0]), atol=1e-12)
        assert rep.iterations == 0

    def test_identity_at_zero_penalty(self, rng):
        x = random_instance(rng, 5)
        w = np.linalg.eigvalsh(x.dense())
        eps = 0.5 * float(w.min())
        rep = sparse_cov(x, 0.0, eps, OPTS)
        assert np.allclose(rep.theta.dense(), x.dense(), atol=1e-9)

    def test_feasible_and_certified(self, rng):
        for _ in range(5):
            x = random_instance(rng, int(rng.integers(3, 10)))
            lam = float(rng.uniform(0.1, 0.6))
            spec = EstimatorSpec(
                Family.SPARSE_COV,
                PenaltySpec(PenaltyKind.SYMMETRIC_L1, lam),
                eps=0.05,
                opts=OPTS,
            )
            rep = solve(spec, x)
            assert rep.converged
            assert np.linalg.eigvalsh(rep.theta.dense())[0] >= 0.05 - 1e-10
            assert certificate_ok(spec, x, rep)

    def test_eps_required(self):
        with pytest.raises(ValueError):
            sparse_cov(sym(np.eye(2)), 0.1, 0.0, OPTS)


class TestPositiveInvCov:
    def test_diagonal_input(self):
        rep = positive_invcov(sym(np.diag([2.0, 4.0])), OPTS)
        assert np.allclose(rep.theta.dense(), np.diag([0.5, 0.25]), atol=1e-8)

    def test_negative_offdiag_unconstrained(self):
        # inverse of [[1,.5],[.5,1]] has nonpositive off-diagonal already
        x = sym([[1.0, 0.5], [0.5, 1.0]])
        rep = positive_invcov(x, OPTS)
        assert np.allclose(rep.theta.dense(), np.linalg.inv(x.dense()), atol=1e-8)

    def test_positive_offdiag_constraint_binds(self):
        # inverse would have positive off-diagonal, so the fit pins it to 0
        x = sym([[1.0, -0.5], [-0.5, 1.0]])
        rep = positive_invcov(x, OPTS)
        assert np.allclose(rep.theta.dense(), np.eye(2), atol=1e-8)

    def test_feasible_and_certified(self, rng):
        for _ in range(5):
            x = random_instance(rng, int(rng.integers(3, 10)))
            spec = EstimatorSpec(
                Family.POSITIVE_INVCOV,
                PenaltySpec(PenaltyKind.OFFDIAG_POSITIVITY),
                opts=OPTS,
            )
            rep = solve(spec, x)
            off = ~np.eye(x.p, dtype=bool)
            assert rep.converged
            assert np.all(rep.theta.dense()[off] <= 0.0)
            assert certificate_ok(spec, x, rep)


class TestIsing:
    def test_p2_logpartition_closed_form(self):
        for t in (-0.7, 0.0, 0.3, 1.1):
            theta = sym([[0.0, t], [t, 0.0]])
            logz, moment = ising_logpartition(theta)
            assert logz == pytest.approx(np.log(2 * np.exp(2 * t) + 2 * np.exp(-2 * t)), abs=1e-12)
            assert moment.entry(0, 1) == pytest.approx(np.tanh(2 * t), abs=1e-12)
            assert moment.entry(0, 0) == 1.0

    def test_independent_coordinates(self):
        theta = sym(np.zeros((3, 3)))
        logz, moment = ising_logpartition(theta)
        assert logz == pytest.approx(3 * np.log(2), abs=1e-12)
        assert np.allclose(moment.dense(), np.eye(3))

    def test_moment_matches_finite_difference(self, rng):
        """Perturbing one symmetric pair of entries moves the log partition
        by twice the corresponding moment."""
        for p in (2, 3, 5):
            a = rng.standard_normal((p, p)) * 0.4
            theta = (a + a.T) / 2
            np.fill_diagonal(theta, 0.0)
            _, moment = ising_logpartition(SymMatrix.from_dense(theta))
            h = 1e-5
            for i, j in [(0, 1), (0, p - 1)]:
                up, dn = theta.copy(), theta.copy()
                up[i, j] = up[j, i] = theta[i, j] + h
                dn[i, j] = dn[j, i] = theta[i, j] - h
                fd = (
                    ising_logpartition(SymMatrix.wrap(up))[0]
                    - ising_logpartition(SymMatrix.wrap(dn))[0]
                ) / (2 * h)
                assert fd == pytest.approx(2 * moment.entry(i, j), abs=1e-6)

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(ValueError):
            ising_logpartition(sym(np.eye(2)))

    def test_p_cap(self):
        with pytest.raises(ValueError):
            ising_logpartition(SymMatrix.from_dense(np.zeros((16, 16))))
        with pytest.raises(ValueError):
            ising_pmle(SymMatrix.from_dense(np.eye(16)), 0.1)

    def test_p2_stationary_point(self):
        """Unpenalized fit matches the scalar moment equation root."""
        x = sym([[1.0, 0.5], [0.5, 1.0]])
        rep = ising_pmle(x, 0.0, OPTS)
        root = brentq(lambda t: np.tanh(2 * t) - 0.5, 0.0, 2.0, xtol=1e-14)
        assert rep.theta.entry(0, 1) == pytest.approx(root, abs=1e-8)
        assert root == pytest.approx(np.arctanh(0.5) / 2, abs=1e-12)

    def test_zero_solution_at_large_penalty(self, rng):
        x = sign_instance(rng, 5)
        lam = float(np.abs(x.dense()[~np.eye(5, dtype=bool)]).max())
        rep = ising_pmle(x, lam + 0.01, OPTS)
        assert np.array_equal(rep.theta.dense(), np.zeros((5, 5)))

    def test_certificate(self, rng):
        for p in (4, 6):
            x = sign_instance(rng, p)
            spec = EstimatorSpec(
                Family.ISING_PMLE, PenaltySpec(PenaltyKind.SYMMETRIC_L1, 0.2), opts=OPTS
            )
            rep = solve(spec, x)
            assert rep.converged
            assert certificate_ok(spec, x, rep)


class TestSolveDispatcher:
    def test_penalty_kind_enforced(self):
        spec = EstimatorSpec(Family.GLASSO, PenaltySpec(PenaltyKind.ENTRYWISE_L1, 0.5))
        with pytest.raises(ValueError):
            solve(spec, sym(np.eye(2)))

    def test_reduction_pairs(self):
        spec = EstimatorSpec(Family.GLASSO, PenaltySpec(PenaltyKind.SYMMETRIC_L1, 0.3))
        pen, group = reduction_for(spec)
        assert pen.kind is PenaltyKind.SYMMETRIC_L1 and group is GroupId.DIAGONAL_CONJUGATION
        spec = EstimatorSpec(Family.POSITIVE_INVCOV, PenaltySpec(PenaltyKind.OFFDIAG_POSITIVITY))
        pen, group = reduction_for(spec)
        assert pen.kind is PenaltyKind.OFFDIAG_POSITIVITY
        spec = EstimatorSpec(Family.LASSO, PenaltySpec(PenaltyKind.ENTRYWISE_L1, 0.3))
        assert reduction_for(spec)[1] is GroupId.SIGN_FLIP_VECTOR

    def test_objective_at_matches_report(self, rng):
        x = random_instance(rng, 6)
        spec = EstimatorSpec(
            Family.GLASSO, PenaltySpec(PenaltyKind.SYMMETRIC_L1, 0.3), opts=OPTS
        )
        rep = solve(spec, x)
        assert objective_at(spec, x, rep.theta) == pytest.approx(rep.objective, abs=1e-12)


class TestSolveDecomposed:
    def test_matches_direct(self, rng):
        x = random_instance(rng, 18, n_blocks=3, cross=0.0)
        spec = EstimatorSpec(
            Family.GLASSO, PenaltySpec(PenaltyKind.SYMMETRIC_L1, 0.3), opts=OPTS
        )
        direct = solve(spec, x)
        dec = solve_decomposed(spec, x)
        assert dec.converged
        assert np.max(np.abs(direct.theta.dense() - dec.theta.dense())) <= 1e-6
        assert dec.blocks is not None and len(dec.blocks) >= 2

    def test_thread_cap_respected(self, rng, monkeypatch):
        monkeypatch.setenv("SUFFREDUCE_THREADS", "1")
        x = random_instance(rng, 12, n_blocks=4, cross=0.0)
        spec = EstimatorSpec(
            Family.GLASSO, PenaltySpec(PenaltyKind.SYMMETRIC_L1, 0.3), opts=OPTS
        )
        rep = solve_decomposed(spec, x)
        assert rep.converged

    def test_bad_thread_env_rejected(self, rng, monkeypatch):
        monkeypatch.setenv("SUFFREDUCE_THREADS", "0")
        x = random_instance(rng, 6, n_blocks=2, cross=0.0)
        spec = EstimatorSpec(
            Family.GLASSO, PenaltySpec(PenaltyKind.SYMMETRIC_L1, 0.3), opts=OPTS
        )
        with pytest.raises(ValueError):
            solve_decomposed(spec, x)

    def test_vector_family_rejected(self):
        spec = EstimatorSpec(Family.LASSO, PenaltySpec(PenaltyKind.ENTRYWISE_L1, 0.5))
        with pytest.raises(ValueError):
            solve_decomposed(spec, np.ones(4))

    def test_sparse_cov_blocks(self, rng):
        x = random_instance(rng, 12, n_blocks=3, cross=0.0)
        spec = EstimatorSpec(
            Family.SPARSE_COV,
            PenaltySpec(PenaltyKind.SYMMETRIC_L1, 0.3),
            eps=0.05,
            opts=OPTS,
        )
        direct = solve(spec, x)
        dec = solve_decomposed(spec, x)
        assert np.max(np.abs(direct.theta.dense() - dec.theta.dense())) <= 1e-6
