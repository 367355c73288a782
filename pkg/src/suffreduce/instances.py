"""Seeded random problem instances with controllable block structure."""

from __future__ import annotations

import numpy as np

from .symmat import SymMatrix, uncentered_covariance

__all__ = [
    "block_sizes",
    "random_instance",
    "sign_instance",
    "two_community",
    "lambda_grid",
]


def block_sizes(p: int, n_blocks: int) -> list[int]:
    """Split p coordinates into n_blocks nearly even sizes."""
    if not 1 <= n_blocks <= p:
        raise ValueError(f"need 1 <= n_blocks <= {p}, got {n_blocks}")
    base, extra = divmod(p, n_blocks)
    return [base + (1 if i < extra else 0) for i in range(n_blocks)]


def _population_blocks(p: int, sizes: list[int], within: float, cross: float) -> np.ndarray:
    sigma = np.full((p, p), cross)
    start = 0
    for sz in sizes:
        sigma[start:start + sz, start:start + sz] = within
        start += sz
    np.fill_diagonal(sigma, 1.0)
    return sigma


def random_instance(
    rng: np.random.Generator,
    p: int,
    n_blocks: int | None = None,
    within: float = 0.6,
    cross: float = 0.0,
    n_factor: int = 4,
) -> SymMatrix:
    """Sampled second-moment matrix of Gaussian data with planted blocks.

    Entries are generic (no ties), the diagonal is strictly positive, and
    off-diagonal magnitudes cluster into a strong within-block range and a
    weak cross-block range, which is what the threshold-screening tests
    need.
    """
    if n_blocks is None:
        hi = min(p, max(3, p // 3))
        n_blocks = int(rng.integers(2, hi + 1)) if p > 1 else 1
    sizes = block_sizes(p, n_blocks)
    sigma = _population_blocks(p, sizes, within, cross)
    root = np.linalg.cholesky(sigma + 1e-10 * np.eye(p))
    obs = rng.standard_normal((n_factor * p, p)) @ root.T
    return uncentered_covariance(obs)


def sign_instance(
    rng: np.random.Generator,
    p: int,
    n_obs: int = 200,
    n_blocks: int | None = None,
    flip_prob: float = 0.25,
) -> SymMatrix:
    """Empirical second moment of +-1 observations with block alignment.

    Each observation draws one sign per block and flips coordinates
    independently with ``flip_prob``.  The result is an exact convex
    combination of sign outer products: unit diagonal, every entry a moment
    of a sign distribution, so moment-matching fits always exist.
    """
    if n_blocks is None:
        hi = min(p, max(3, p // 3))
        n_blocks = int(rng.integers(2, hi + 1)) if p > 1 else 1
    sizes = block_sizes(p, n_blocks)
    labels = np.repeat(np.arange(n_blocks), sizes)
    base = rng.choice([-1.0, 1.0], size=(n_obs, n_blocks))
    flips = np.where(rng.random((n_obs, p)) < flip_prob, -1.0, 1.0)
    obs = base[:, labels] * flips
    return uncentered_covariance(obs)


def two_community(p: int, within: float = 0.6, cross: float = 0.05) -> SymMatrix:
    """Deterministic two-block correlation matrix (p even split)."""
    return SymMatrix.wrap(_population_blocks(p, block_sizes(p, 2), within, cross))


def lambda_grid(x: SymMatrix, count: int = 10) -> np.ndarray:
    """Quantiles of the off-diagonal magnitudes, spanning no-edge to
    fully-thresholded regimes.

    Grid points that land exactly on an entry magnitude are nudged to the
    strict side (without crossing the next distinct magnitude, so the
    threshold graph is unchanged).  At an exact tie the strict graph cuts
    the edge but estimators with linear loss terms can have optima keeping
    it, and support claims would then depend on which optimum a solver
    happens to return.
    """
    d = np.abs(x.dense())
    off = d[~np.eye(x.p, dtype=bool)]
    grid = np.quantile(off, np.linspace(0.0, 1.0, count))
    vals = np.unique(off)
    for i, lam in enumerate(grid):
        if not np.any(vals == lam):
            continue
        above = vals[vals > lam]
        gap = (above[0] - lam) / 2.0 if above.size else np.inf
        if lam > 0.0:
            grid[i] = lam + min(1e-3 * lam, gap)
        else:
            grid[i] = gap if np.isfinite(gap) else 1.0
    return grid
