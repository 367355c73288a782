"""Reference solvers for the supported penalized estimator families.

Matrix families run a shared ADMM pattern (one smooth/constrained step, one
soft-threshold or projection step, scaled dual update, over-relaxation and
residual-balanced rho).  Convergence is declared only when an independently
recomputed KKT residual at the reported point falls below
``opts.tol * (1 + max|input|)``; the same residual functions are exposed for
verification, so the certificate never reuses solver state.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np

from .linkage import Partition
from .penalty import GroupId, PenaltyKind, PenaltySpec
from .reductions import ReducedProblem, reduce_input, reassemble_blocks
from .symmat import SymMatrix, eigh_dense

__all__ = [
    "Family",
    "SolverOptions",
    "EstimatorSpec",
    "SolveReport",
    "BlockStat",
    "ConvergenceError",
    "NoSolutionError",
    "lasso",
    "nnls",
    "glasso",
    "fantope_project",
    "fantope_spca",
    "sparse_cov",
    "positive_invcov",
    "ising_logpartition",
    "ising_pmle",
    "solve",
    "solve_decomposed",
    "objective_at",
    "kkt_residual",
    "reduction_for",
]

SUPPORT_REL_TOL = 1e-8  # support mask: |theta| > tol * max|theta|
ISING_MAX_P = 15


class ConvergenceError(RuntimeError):
    """Solver exhausted its iteration budget before certifying optimality."""


class NoSolutionError(RuntimeError):
    """The requested minimizer does not exist for this input."""


class Family(Enum):
    LASSO = "lasso"
    NNLS = "nnls"
    GLASSO = "glasso"
    FANTOPE_SPCA = "fantope_spca"
    SPARSE_COV = "sparse_cov"
    POSITIVE_INVCOV = "positive_invcov"
    ISING_PMLE = "ising_pmle"


MATRIX_FAMILIES = {
    Family.GLASSO,
    Family.FANTOPE_SPCA,
    Family.SPARSE_COV,
    Family.POSITIVE_INVCOV,
    Family.ISING_PMLE,
}


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9
    max_iter: int = 10000
    rho: float = 1.0
    over_relax: float = 1.6
    adapt_rho: bool = True
    check_every: int = 25


@dataclass(frozen=True)
class EstimatorSpec:
    """Family plus enough parameters to solve and to reduce.

    ``penalty`` carries the regularizer; ``k`` is the trace budget of the
    Fantope family, ``eps`` the eigenvalue floor of the covariance family.
    """

    family: Family
    penalty: PenaltySpec
    k: int | None = None
    eps: float | None = None
    penalize_diagonal: bool = False
    opts: SolverOptions = field(default_factory=SolverOptions)


@dataclass(frozen=True)
class BlockStat:
    indices: tuple[int, ...]
    iterations: int
    seconds: float


@dataclass(frozen=True)
class SolveReport:
    theta: np.ndarray | SymMatrix
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    support: np.ndarray
    blocks: tuple[BlockStat, ...] | None = None


def _soft(a, t):
    return np.sign(a) * np.maximum(np.abs(a) - t, 0.0)


def _scale(a) -> float:
    return 1.0 + float(np.max(np.abs(a))) if np.size(a) else 1.0


def _support(theta: np.ndarray) -> np.ndarray:
    m = float(np.max(np.abs(theta))) if theta.size else 0.0
    return np.abs(theta) > SUPPORT_REL_TOL * m


def _report_matrix(theta, objective, kkt, iters, converged) -> SolveReport:
    return SolveReport(
        SymMatrix.wrap(theta), objective, kkt, iters, converged, _support(theta)
    )


# =====================================================================
# closed-form vector families
# =====================================================================

def lasso(x, lam) -> np.ndarray:
    """Entrywise soft threshold: the l1-penalized proximal point of x."""
    x = np.asarray(x, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), x.shape)
    if np.any(lam < 0):
        raise ValueError("penalty weights must be nonnegative")
    return np.where(np.abs(x) > lam, x - lam * np.sign(x), 0.0)


def nnls(x) -> np.ndarray:
    """Nonnegative least squares with identity design: the positive part."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0.0, x, 0.0)


# =====================================================================
# graphical lasso
# =====================================================================

def _lambda_matrix(lam, p: int, penalize_diagonal: bool) -> np.ndarray:
    lam_arr = np.asarray(lam, dtype=float)
    if lam_arr.ndim == 0:
        out = np.full((p, p), float(lam_arr))
        if not penalize_diagonal:
            np.fill_diagonal(out, 0.0)
        return out
    if lam_arr.shape != (p, p):
        raise ValueError(f"weight matrix must be ({p}, {p})")
    if np.max(np.abs(lam_arr - lam_arr.T)) > 0:
        raise ValueError("weight matrix must be symmetric")
    if np.any(lam_arr < 0):
        raise ValueError("penalty weights must be nonnegative")
    return lam_arr.copy()


def _glasso_kkt(s, lam_mat, z) -> float:
    w, q = np.linalg.eigh(z)
    if w[0] <= 0.0:
        return np.inf
    inv = (q / w) @ q.T
    e = inv - s
    on = _support(z)
    resid_on = np.abs(e - lam_mat * np.sign(z))[on]
    resid_off = np.maximum(np.abs(e) - lam_mat, 0.0)[~on]
    worst = 0.0
    if resid_on.size:
        worst = max(worst, float(resid_on.max()))
    if resid_off.size:
        worst = max(worst, float(resid_off.max()))
    return worst


def _glasso_objective(s, lam_mat, z) -> float:
    w = np.linalg.eigvalsh(z)
    return float(-np.sum(np.log(w)) + np.sum(s * z) + np.sum(lam_mat * np.abs(z)))


def glasso(x: SymMatrix, lam, opts: SolverOptions | None = None,
           penalize_diagonal: bool = False) -> SolveReport:
    """Penalized inverse-covariance fit.

    Minimizes -log det(theta) + <x, theta> + sum_ij L_ij |theta_ij| over
    positive definite theta.  ``lam`` is a scalar (applied off-diagonal
    unless ``penalize_diagonal``) or a full symmetric weight matrix.

    ADMM with a log-det proximal step (one eigendecomposition per
    iteration) and an entrywise soft threshold; the soft-thresholded iterate
    is reported, so zeros in the solution are exact.
    """
    opts = opts or SolverOptions()
    s = x.dense()
    p = x.p
    lam_mat = _lambda_matrix(lam, p, penalize_diagonal)
    scale = _scale(s)
    if np.any((np.diag(lam_mat) == 0.0) & (np.diag(s) <= 0.0)):
        raise NoSolutionError(
            "unpenalized diagonal requires strictly positive input diagonal"
        )
    if not lam_mat.any():
        w = np.linalg.eigvalsh(s)
        if w[0] <= 1e-12:
            raise NoSolutionError(
                f"lam=0 needs a positive definite input (min eig {w[0]:.3e})"
            )
        wv, q = np.linalg.eigh(s)
        theta = (q / wv) @ q.T
        theta = (theta + theta.T) / 2.0
        kkt = _glasso_kkt(s, lam_mat, theta)
        return _report_matrix(theta, _glasso_objective(s, lam_mat, theta),
                              kkt, 0, True)

    rho = opts.rho
    alpha = opts.over_relax
    z = np.diag(1.0 / np.clip(np.diag(s), 1e-8, None))
    u = np.zeros((p, p))
    tol = opts.tol * scale
    for it in range(1, opts.max_iter + 1):
        w, q = np.linalg.eigh(rho * (z - u) - s)
        gamma = (w + np.sqrt(w * w + 4.0 * rho)) / (2.0 * rho)
        theta = (q * gamma) @ q.T
        theta = (theta + theta.T) / 2.0
        z_old = z
        th_hat = alpha * theta + (1.0 - alpha) * z_old
        z = _soft(th_hat + u, lam_mat / rho)
        u = u + th_hat - z
        if it % opts.check_every == 0 or it == opts.max_iter:
            kkt = _glasso_kkt(s, lam_mat, z)
            if kkt <= tol:
                return _report_matrix(z, _glasso_objective(s, lam_mat, z),
                                      kkt, it, True)
        if opts.adapt_rho:
            r_norm = float(np.linalg.norm(theta - z))
            s_norm = rho * float(np.linalg.norm(z - z_old))
            if r_norm > 10.0 * s_norm and rho < 1e5:
                rho *= 2.0
                u /= 2.0
            elif s_norm > 10.0 * r_norm and rho > 1e-3:
                rho /= 2.0
                u *= 2.0
    raise ConvergenceError(
        f"glasso did not reach tol {tol:.3e} in {opts.max_iter} iterations"
    )


# =====================================================================
# Fantope projection and sparse PCA
# =====================================================================

def _fantope_project_dense(a: np.ndarray, k: int, trace_tol: float = 1e-12) -> np.ndarray:
    p = a.shape[0]
    if not 1 <= k <= p:
        raise ValueError(f"k must be in 1..{p}, got {k}")
    w, q = np.linalg.eigh(a)
    lo = float(w.min()) - 1.0
    hi = float(w.max())

    def excess(nu):
        return float(np.sum(np.clip(w - nu, 0.0, 1.0))) - k

    if abs(excess(lo)) <= trace_tol:
        nu = lo
    else:
        nu = None
        for _ in range(400):
            mid = 0.5 * (lo + hi)
            g = excess(mid)
            if abs(g) <= trace_tol:
                nu = mid
                break
            if g > 0.0:
                lo = mid
            else:
                hi = mid
        if nu is None:
            raise ConvergenceError(
                f"trace bisection stalled: |excess| = {abs(excess(0.5 * (lo + hi))):.3e}"
            )
    gamma = np.clip(w - nu, 0.0, 1.0)
    out = (q * gamma) @ q.T
    return (out + out.T) / 2.0


def fantope_project(w: SymMatrix, k: int, trace_tol: float = 1e-12) -> SymMatrix:
    """Nearest matrix with eigenvalues in [0, 1] summing to k.

    Eigenvalues are shifted by a scalar nu (found by bisection on the trace,
    tolerance ``trace_tol``) and clipped to [0, 1]; eigenvectors are kept.
    """
    return SymMatrix.wrap(_fantope_project_dense(w.dense(), k, trace_tol))


def _fantope_kkt(s, lam, k, z) -> float:
    """Fixed-point residual max|z - prox(z + s)| for the map
    prox_h with h = lam*||.||_1 + indicator of the spectral set.

    z is optimal exactly when the residual vanishes; the prox problem is
    strongly convex, so it is re-solved here to high accuracy by its own
    short ADMM (linear convergence), making the certificate independent of
    the solver state that produced z.
    """
    v = z + s
    y = np.array(z)
    w = np.array(z)
    u = np.zeros_like(z)
    rho = 1.0
    for _ in range(2000):
        y = _fantope_project_dense((v + rho * (w - u)) / (1.0 + rho), k)
        w_old = w
        w = _soft(y + u, lam / rho)
        u = u + y - w
        if max(
            float(np.max(np.abs(y - w))), float(np.max(np.abs(w - w_old)))
        ) <= 1e-13 * (1.0 + float(np.max(np.abs(v)))):
            break
    return float(np.max(np.abs(y - z)))


def fantope_spca(x: SymMatrix, lam: float, k: int, opts: SolverOptions | None = None) -> SolveReport:
    """Sparse principal subspace fit.

    Maximizes <x, theta> - lam * ||theta||_1 over the spectral set
    {0 <= theta <= I, trace(theta) = k}.  ADMM alternates a Fantope
    projection with an entrywise soft threshold; the thresholded iterate is
    reported.
    """
    opts = opts or SolverOptions()
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    s = x.dense()
    p = x.p
    if not 1 <= k <= p:
        raise ValueError(f"k must be in 1..{p}, got {k}")
    scale = _scale(s)
    tol = opts.tol * scale
    rho = opts.rho
    alpha = opts.over_relax
    z = np.zeros((p, p))
    u = np.zeros((p, p))
    for it in range(1, opts.max_iter + 1):
        theta = _fantope_project_dense(z - u + s / rho, k)
        z_old = z
        th_hat = alpha * theta + (1.0 - alpha) * z_old
        z = _soft(th_hat + u, lam / rho)
        u = u + th_hat - z
        # objective is linear, so the gate is the pair of ADMM residuals
        # rather than a gradient-style condition
        r_norm = float(np.max(np.abs(theta - z)))
        s_norm = rho * float(np.max(np.abs(z - z_old)))
        if max(r_norm, s_norm) <= tol:
            obj = float(np.sum(s * z) - lam * np.sum(np.abs(z)))
            return _report_matrix(z, obj, max(r_norm, s_norm), it, True)
        if opts.adapt_rho and it % opts.check_every == 0:
            if r_norm > 10.0 * s_norm and rho < 1e5:
                rho *= 2.0
                u /= 2.0
            elif s_norm > 10.0 * r_norm and rho > 1e-3:
                rho /= 2.0
                u *= 2.0
    raise ConvergenceError(
        f"fantope_spca did not reach tol {tol:.3e} in {opts.max_iter} iterations"
    )


# =====================================================================
# sparse covariance with an eigenvalue floor
# =====================================================================

def _spectral_floor(a: np.ndarray, eps: float) -> np.ndarray:
    w, q = np.linalg.eigh(a)
    out = (q * np.maximum(w, eps)) @ q.T
    return (out + out.T) / 2.0


def _sparse_cov_kkt(s, lam, eps, theta, rounds: int = 12) -> float:
    """Best certificate found by alternating the subgradient choice with the
    projection of the multiplier onto the active-eigenspace PSD cone."""
    w, q = np.linalg.eigh(theta)
    act = w <= eps + 1e-9 * (1.0 + abs(eps))
    v0 = q[:, act]
    on = _support(theta)
    sign_on = np.sign(theta)
    m = np.zeros_like(theta)
    resid = np.inf
    for _ in range(max(rounds, 1)):
        if lam > 0:
            gamma = np.where(on, sign_on, np.clip((s - theta + m) / lam, -1.0, 1.0))
        else:
            gamma = np.zeros_like(theta)
        target = theta - s + lam * gamma
        if v0.shape[1]:
            b = v0.T @ target @ v0
            bw, bq = np.linalg.eigh((b + b.T) / 2.0)
            m = v0 @ ((bq * np.maximum(bw, 0.0)) @ bq.T) @ v0.T
        resid = float(np.max(np.abs(target - m)))
        if not v0.shape[1]:
            break
    return resid


def sparse_cov(x: SymMatrix, lam: float, eps: float, opts: SolverOptions | None = None) -> SolveReport:
    """Soft-thresholded covariance with eigenvalues floored at eps.

    Minimizes 0.5 ||x - theta||_F^2 + lam ||theta||_1 over theta >= eps I.
    When the plain soft threshold already clears the floor it is returned
    exactly; otherwise ADMM alternates the floored quadratic step with the
    soft threshold and reports the floored iterate (feasible by
    construction).
    """
    opts = opts or SolverOptions()
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    if eps <= 0:
        raise ValueError("eigenvalue floor eps must be positive")
    s = x.dense()
    p = x.p
    scale = _scale(s)
    direct = _soft(s, lam)
    if np.linalg.eigvalsh(direct)[0] >= eps:
        kkt = _sparse_cov_kkt(s, lam, eps, direct)
        obj = float(0.5 * np.sum((s - direct) ** 2) + lam * np.sum(np.abs(direct)))
        return _report_matrix(direct, obj, kkt, 0, True)

    tol = opts.tol * scale
    rho = opts.rho
    alpha = opts.over_relax
    z = _spectral_floor(direct, eps)
    u = np.zeros((p, p))
    theta = z
    for it in range(1, opts.max_iter + 1):
        theta = _spectral_floor((s + rho * (z - u)) / (1.0 + rho), eps)
        z_old = z
        th_hat = alpha * theta + (1.0 - alpha) * z_old
        z = _soft(th_hat + u, lam / rho)
        u = u + th_hat - z
        if it % opts.check_every == 0 or it == opts.max_iter:
            kkt = _sparse_cov_kkt(s, lam, eps, theta)
            if kkt <= tol:
                obj = float(0.5 * np.sum((s - theta) ** 2) + lam * np.sum(np.abs(theta)))
                return _report_matrix(theta, obj, kkt, it, True)
        if opts.adapt_rho:
            r_norm = float(np.linalg.norm(theta - z))
            s_norm = rho * float(np.linalg.norm(z - z_old))
            if r_norm > 10.0 * s_norm and rho < 1e5:
                rho *= 2.0
                u /= 2.0
            elif s_norm > 10.0 * r_norm and rho > 1e-3:
                rho /= 2.0
                u *= 2.0
    raise ConvergenceError(
        f"sparse_cov did not reach tol {tol:.3e} in {opts.max_iter} iterations"
    )


# =====================================================================
# sign-constrained inverse covariance
# =====================================================================

def _positive_invcov_kkt(s, z) -> float:
    w, q = np.linalg.eigh(z)
    if w[0] <= 0.0:
        return np.inf
    e = (q / w) @ q.T - s
    off = ~np.eye(z.shape[0], dtype=bool)
    on = _support(z) & off
    zero = ~_support(z) & off
    worst = float(np.max(np.abs(np.diag(e))))
    if on.any():
        worst = max(worst, float(np.max(np.abs(e[on]))))
    if zero.any():
        worst = max(worst, float(np.max(np.maximum(-e[zero], 0.0))))
    return worst


def positive_invcov(x: SymMatrix, opts: SolverOptions | None = None) -> SolveReport:
    """Gaussian likelihood fit with nonpositive off-diagonal precision.

    Minimizes -log det(omega) + <x, omega> subject to omega_ij <= 0 for
    i != j (diagonal free).  Same log-det proximal ADMM as glasso with the
    soft threshold replaced by clipping positive off-diagonal entries to
    zero, so the constraint holds exactly on the reported iterate.
    """
    opts = opts or SolverOptions()
    s = x.dense()
    p = x.p
    if np.any(np.diag(s) <= 0.0):
        raise NoSolutionError("input diagonal must be strictly positive")
    scale = _scale(s)
    tol = opts.tol * scale
    rho = opts.rho
    alpha = opts.over_relax
    off_mask = ~np.eye(p, dtype=bool)
    z = np.diag(1.0 / np.diag(s))
    u = np.zeros((p, p))
    for it in range(1, opts.max_iter + 1):
        w, q = np.linalg.eigh(rho * (z - u) - s)
        gamma = (w + np.sqrt(w * w + 4.0 * rho)) / (2.0 * rho)
        theta = (q * gamma) @ q.T
        theta = (theta + theta.T) / 2.0
        z_old = z
        th_hat = alpha * theta + (1.0 - alpha) * z_old
        z = th_hat + u
        z[off_mask] = np.minimum(z[off_mask], 0.0)
        u = u + th_hat - z
        if it % opts.check_every == 0 or it == opts.max_iter:
            kkt = _positive_invcov_kkt(s, z)
            if kkt <= tol:
                wv = np.linalg.eigvalsh(z)
                obj = float(-np.sum(np.log(wv)) + np.sum(s * z))
                return _report_matrix(z, obj, kkt, it, True)
        if opts.adapt_rho:
            r_norm = float(np.linalg.norm(theta - z))
            s_norm = rho * float(np.linalg.norm(z - z_old))
            if r_norm > 10.0 * s_norm and rho < 1e5:
                rho *= 2.0
                u /= 2.0
            elif s_norm > 10.0 * r_norm and rho > 1e-3:
                rho /= 2.0
                u *= 2.0
    raise ConvergenceError(
        f"positive_invcov did not reach tol {tol:.3e} in {opts.max_iter} iterations"
    )


# =====================================================================
# pairwise sign-interaction model (pseudo count enumeration)
# =====================================================================

@lru_cache(maxsize=None)
def _sign_states(p: int) -> np.ndarray:
    codes = np.arange(2 ** p)[:, None]
    states = 1.0 - 2.0 * ((codes >> np.arange(p)[None, :]) & 1)
    states.flags.writeable = False
    return states


def ising_logpartition(theta: SymMatrix) -> tuple[float, SymMatrix]:
    """Log partition function and moment matrix by state enumeration.

    theta must have an exactly zero diagonal and p <= 15 (the sum runs over
    all 2^p sign vectors).  Returns (log sum_u exp(u' theta u), E[u u']).
    """
    p = theta.p
    if p > ISING_MAX_P:
        raise ValueError(f"enumeration capped at p={ISING_MAX_P}, got {p}")
    td = theta.dense()
    if np.any(np.diag(td) != 0.0):
        raise ValueError("interaction matrix must have a zero diagonal")
    states = _sign_states(p)
    energy = np.einsum("si,ij,sj->s", states, td, states)
    emax = float(energy.max())
    logz = emax + float(np.log(np.sum(np.exp(energy - emax))))
    weights = np.exp(energy - logz)
    moment = (states * weights[:, None]).T @ states
    moment = (moment + moment.T) / 2.0
    np.fill_diagonal(moment, 1.0)
    return logz, SymMatrix.wrap(moment)


def _ising_kkt(moment_minus_s: np.ndarray, lam: float, theta: np.ndarray) -> float:
    p = theta.shape[0]
    off = ~np.eye(p, dtype=bool)
    on = _support(theta) & off
    zero = ~_support(theta) & off
    worst = 0.0
    if on.any():
        worst = float(np.max(np.abs(moment_minus_s[on] + lam * np.sign(theta[on]))))
    if zero.any():
        worst = max(
            worst, float(np.max(np.maximum(np.abs(moment_minus_s[zero]) - lam, 0.0)))
        )
    return worst


def ising_pmle(x: SymMatrix, lam: float, opts: SolverOptions | None = None) -> SolveReport:
    """Penalized moment-matching fit of pairwise sign interactions.

    Minimizes logpartition(theta) - <x, theta> + lam * sum_{i<j} 2|theta_ij|
    over symmetric theta with zero diagonal, by monotone proximal gradient
    descent with backtracking.  Enumerates all 2^p states, so p <= 15.
    """
    opts = opts or SolverOptions()
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    p = x.p
    if p > ISING_MAX_P:
        raise ValueError(f"enumeration capped at p={ISING_MAX_P}, got {p}")
    s = x.dense()
    scale = _scale(s)
    tol = opts.tol * scale
    theta = np.zeros((p, p))
    logz, moment = ising_logpartition(SymMatrix.wrap(theta))
    step = 1.0
    lhat = 0.0  # largest observed curvature; 1/lhat keeps the step contractive
    for it in range(1, opts.max_iter + 1):
        grad = moment.dense() - s
        np.fill_diagonal(grad, 0.0)
        kkt = _ising_kkt(grad, lam, theta)
        if kkt <= tol:
            obj = logz - float(np.sum(s * theta)) + lam * float(np.sum(np.abs(theta)))
            return _report_matrix(theta, obj, kkt, it - 1, True)
        f_cur = logz - float(np.sum(s * theta))
        while True:
            cand = _soft(theta - step * grad, step * lam)
            np.fill_diagonal(cand, 0.0)
            logz_new, moment_new = ising_logpartition(SymMatrix.wrap(cand))
            f_new = logz_new - float(np.sum(s * cand))
            diff = cand - theta
            bound = (
                f_cur
                + float(np.sum(grad * diff))
                + float(np.sum(diff * diff)) / (2.0 * step)
            )
            if f_new <= bound + 1e-13 * max(1.0, abs(f_cur)):
                break
            step *= 0.5
            if step < 1e-12:
                raise ConvergenceError("backtracking step collapsed")
        grad_new = moment_new.dense() - s
        np.fill_diagonal(grad_new, 0.0)
        move = float(np.linalg.norm(cand - theta))
        if move > 0.0:
            lhat = max(lhat, float(np.linalg.norm(grad_new - grad)) / move)
        theta, logz, moment = cand, logz_new, moment_new
        cap = 1.0 / lhat if lhat > 0.0 else 2.0
        step = min(step * 1.25, cap, 2.0)
    raise ConvergenceError(
        f"ising_pmle did not reach tol {tol:.3e} in {opts.max_iter} iterations"
    )


# =====================================================================
# dispatch, objectives, certificates
# =====================================================================

def _as_symmetric(x) -> SymMatrix:
    return x if isinstance(x, SymMatrix) else SymMatrix.from_dense(np.asarray(x, dtype=float))


def _expect_kind(spec: EstimatorSpec, kind: PenaltyKind):
    if spec.penalty.kind is not kind:
        raise ValueError(
            f"{spec.family.value} expects a {kind.value} penalty, "
            f"got {spec.penalty.kind.value}"
        )


def solve(spec: EstimatorSpec, x) -> SolveReport:
    """Run the family's solver on input x and return its report."""
    fam = spec.family
    if fam is Family.LASSO:
        _expect_kind(spec, PenaltyKind.ENTRYWISE_L1)
        xv = np.asarray(x, dtype=float)
        theta = lasso(xv, spec.penalty.weights)
        return _vector_report(spec, xv, theta)
    if fam is Family.NNLS:
        _expect_kind(spec, PenaltyKind.POSITIVE_CONE)
        xv = np.asarray(x, dtype=float)
        theta = nnls(xv)
        return _vector_report(spec, xv, theta)
    xm = _as_symmetric(x)
    if fam is Family.GLASSO:
        _expect_kind(spec, PenaltyKind.SYMMETRIC_L1)
        return glasso(xm, spec.penalty.weights, spec.opts, spec.penalize_diagonal)
    if fam is Family.FANTOPE_SPCA:
        _expect_kind(spec, PenaltyKind.SYMMETRIC_L1)
        if spec.k is None:
            raise ValueError("fantope_spca requires k")
        return fantope_spca(xm, spec.penalty.scalar_weight(), spec.k, spec.opts)
    if fam is Family.SPARSE_COV:
        _expect_kind(spec, PenaltyKind.SYMMETRIC_L1)
        if spec.eps is None:
            raise ValueError("sparse_cov requires eps")
        return sparse_cov(xm, spec.penalty.scalar_weight(), spec.eps, spec.opts)
    if fam is Family.POSITIVE_INVCOV:
        _expect_kind(spec, PenaltyKind.OFFDIAG_POSITIVITY)
        return positive_invcov(xm, spec.opts)
    if fam is Family.ISING_PMLE:
        _expect_kind(spec, PenaltyKind.SYMMETRIC_L1)
        return ising_pmle(xm, spec.penalty.scalar_weight(), spec.opts)
    raise ValueError(f"unknown family {fam}")


def _vector_report(spec, x, theta) -> SolveReport:
    kkt = kkt_residual(spec, x, theta)
    return SolveReport(
        theta,
        objective_at(spec, x, theta),
        kkt,
        0,
        True,
        _support(theta),
    )


def objective_at(spec: EstimatorSpec, x, theta) -> float:
    """Evaluate the family objective at an arbitrary point."""
    fam = spec.family
    if fam in (Family.LASSO, Family.NNLS):
        xv = np.asarray(x, dtype=float)
        tv = np.asarray(theta, dtype=float)
        base = 0.5 * float(np.sum((xv - tv) ** 2))
        if fam is Family.LASSO:
            lam = np.broadcast_to(np.asarray(spec.penalty.weights, dtype=float), xv.shape)
            return base + float(np.sum(lam * np.abs(tv)))
        if np.any(tv < 0):
            return np.inf
        return base
    s = _as_symmetric(x).dense()
    td = theta.dense() if isinstance(theta, SymMatrix) else np.asarray(theta, dtype=float)
    if fam is Family.GLASSO:
        lam_mat = _lambda_matrix(spec.penalty.weights, s.shape[0], spec.penalize_diagonal)
        return _glasso_objective(s, lam_mat, td)
    if fam is Family.FANTOPE_SPCA:
        lam = spec.penalty.scalar_weight()
        return float(np.sum(s * td) - lam * np.sum(np.abs(td)))
    if fam is Family.SPARSE_COV:
        lam = spec.penalty.scalar_weight()
        return float(0.5 * np.sum((s - td) ** 2) + lam * np.sum(np.abs(td)))
    if fam is Family.POSITIVE_INVCOV:
        w = np.linalg.eigvalsh(td)
        if w[0] <= 0:
            return np.inf
        return float(-np.sum(np.log(w)) + np.sum(s * td))
    if fam is Family.ISING_PMLE:
        lam = spec.penalty.scalar_weight()
        logz, _ = ising_logpartition(SymMatrix.wrap(td))
        return logz - float(np.sum(s * td)) + lam * float(np.sum(np.abs(td)))
    raise ValueError(f"unknown family {fam}")


def kkt_residual(spec: EstimatorSpec, x, theta) -> float:
    """Independent first-order certificate at theta (0 = exact optimum)."""
    fam = spec.family
    if fam is Family.LASSO:
        xv = np.asarray(x, dtype=float)
        tv = np.asarray(theta, dtype=float)
        lam = np.broadcast_to(np.asarray(spec.penalty.weights, dtype=float), xv.shape)
        on = tv != 0.0
        worst = 0.0
        if on.any():
            worst = float(np.max(np.abs((tv - xv + lam * np.sign(tv))[on])))
        if (~on).any():
            worst = max(worst, float(np.max(np.maximum(np.abs(xv[~on]) - lam[~on], 0.0))))
        return worst
    if fam is Family.NNLS:
        xv = np.asarray(x, dtype=float)
        tv = np.asarray(theta, dtype=float)
        on = tv != 0.0
        worst = 0.0
        if on.any():
            worst = float(np.max(np.abs((tv - xv)[on])))
        if (~on).any():
            worst = max(worst, float(np.max(np.maximum(xv[~on], 0.0))))
        return worst
    s = _as_symmetric(x).dense()
    td = theta.dense() if isinstance(theta, SymMatrix) else np.asarray(theta, dtype=float)
    if fam is Family.GLASSO:
        lam_mat = _lambda_matrix(spec.penalty.weights, s.shape[0], spec.penalize_diagonal)
        return _glasso_kkt(s, lam_mat, td)
    if fam is Family.FANTOPE_SPCA:
        return _fantope_kkt(s, spec.penalty.scalar_weight(), spec.k, td)
    if fam is Family.SPARSE_COV:
        return _sparse_cov_kkt(s, spec.penalty.scalar_weight(), spec.eps, td)
    if fam is Family.POSITIVE_INVCOV:
        return _positive_invcov_kkt(s, td)
    if fam is Family.ISING_PMLE:
        _, moment = ising_logpartition(SymMatrix.wrap(td))
        return _ising_kkt(moment.dense() - s, spec.penalty.scalar_weight(), td)
    raise ValueError(f"unknown family {fam}")


def reduction_for(spec: EstimatorSpec) -> tuple[PenaltySpec, GroupId]:
    """The (penalty, group) pair whose reduction is sufficient for spec."""
    fam = spec.family
    if fam is Family.LASSO:
        return spec.penalty, GroupId.SIGN_FLIP_VECTOR
    if fam is Family.NNLS:
        return PenaltySpec(PenaltyKind.POSITIVE_CONE), GroupId.SIGN_FLIP_VECTOR
    if fam is Family.POSITIVE_INVCOV:
        return PenaltySpec(PenaltyKind.OFFDIAG_POSITIVITY), GroupId.DIAGONAL_CONJUGATION
    if fam in (Family.GLASSO, Family.FANTOPE_SPCA, Family.SPARSE_COV, Family.ISING_PMLE):
        lam = spec.penalty.scalar_weight()
        return PenaltySpec(PenaltyKind.SYMMETRIC_L1, lam), GroupId.DIAGONAL_CONJUGATION
    raise ValueError(f"no reduction registered for {fam}")


def _max_workers(n_blocks: int) -> int:
    env = os.environ.get("SUFFREDUCE_THREADS")
    if env is not None:
        cap = int(env)
        if cap < 1:
            raise ValueError(f"SUFFREDUCE_THREADS must be >= 1, got {env!r}")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_blocks))


def solve_decomposed(spec: EstimatorSpec, x) -> SolveReport:
    """Reduce the input, solve each independent block, and reassemble.

    Families whose objective separates over the blocks (all matrix families
    except fantope_spca) are solved blockwise, optionally in parallel
    (capped by the SUFFREDUCE_THREADS environment variable).  fantope_spca
    couples blocks through its trace budget, so it is re-solved on the
    reduced matrix as a whole.  The reported objective and KKT residual are
    evaluated against the original input.
    """
    if spec.family not in MATRIX_FAMILIES:
        raise ValueError("block decomposition applies to matrix families only")
    xm = _as_symmetric(x)
    red_penalty, group = reduction_for(spec)
    rp: ReducedProblem = reduce_input(red_penalty, group, xm)

    if spec.family is Family.FANTOPE_SPCA:
        rep = solve(spec, rp.reduced)
        kkt = kkt_residual(spec, xm, rep.theta)
        return SolveReport(
            rep.theta,
            objective_at(spec, xm, rep.theta),
            kkt,
            rep.iterations,
            rep.converged,
            rep.support,
            None,
        )

    reduced_dense = rp.reduced.dense()

    def solve_block(blk):
        idx = np.array(blk)
        sub = SymMatrix.wrap(reduced_dense[np.ix_(idx, idx)])
        start = time.perf_counter()
        rep = solve(spec, sub)
        return blk, rep, time.perf_counter() - start

    blocks = rp.partition.blocks
    workers = _max_workers(len(blocks))
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(solve_block, blocks))
    else:
        results = [solve_block(b) for b in blocks]

    theta = reassemble_blocks(xm.p, [(blk, rep.theta) for blk, rep, _ in results])
    stats = tuple(
        BlockStat(blk, rep.iterations, sec) for blk, rep, sec in results
    )
    kkt = kkt_residual(spec, xm, theta)
    scale = _scale(xm.dense())
    converged = all(rep.converged for _, rep, _ in results) and kkt <= 10 * spec.opts.tol * scale
    return SolveReport(
        theta,
        objective_at(spec, xm, theta),
        kkt,
        sum(rep.iterations for _, rep, _ in results),
        converged,
        _support(theta.dense()),
        stats,
    )
