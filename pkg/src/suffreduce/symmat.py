"""Symmetric matrix container and dense linear-algebra primitives.

The rest of the package passes symmetric matrices around as :class:`SymMatrix`
values.  Symmetry is enforced once at construction (packed upper-triangle
storage), so downstream code never has to re-check or re-symmetrize.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SymMatrix",
    "EigenDecomposition",
    "JacobiConvergenceError",
    "uncentered_covariance",
    "eigh",
    "eigh_dense",
    "hadamard",
]


class JacobiConvergenceError(RuntimeError):
    """Raised when the rotation sweeps exhaust their budget."""


def _packed_size(p: int) -> int:
    return p * (p + 1) // 2


@dataclass(frozen=True)
class SymMatrix:
    """Immutable symmetric matrix with packed upper-triangle storage.

    Construct via :meth:`from_dense`; the packed layout guarantees the two
    mirror entries of every pair are one stored value, so symmetry cannot
    drift through arithmetic.
    """

    p: int
    upper: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"dimension must be >= 1, got {self.p}")
        if self.upper.shape != (_packed_size(self.p),):
            raise ValueError("packed storage has wrong length")
        self.upper.flags.writeable = False

    @classmethod
    def from_dense(cls, values, asym_tol: float = 1e-8) -> "SymMatrix":
        """Build from a square array, averaging mirror entries.

        Raises ValueError if the input is not square, contains non-finite
        entries, or has max |A - A^T| exceeding ``asym_tol``.
        """
        a = np.asarray(values, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        gap = float(np.max(np.abs(a - a.T))) if a.shape[0] > 1 else 0.0
        if gap > asym_tol:
            raise ValueError(
                f"asymmetry {gap:.3e} exceeds tolerance {asym_tol:.3e}"
            )
        sym = (a + a.T) / 2.0
        i, j = np.triu_indices(a.shape[0])
        return cls(a.shape[0], sym[i, j].copy())

    @classmethod
    def wrap(cls, a: np.ndarray) -> "SymMatrix":
        """Pack an array that is symmetric by construction (no checks)."""
        i, j = np.triu_indices(a.shape[0])
        return cls(a.shape[0], np.ascontiguousarray(a, dtype=float)[i, j].copy())

    def dense(self) -> np.ndarray:
        """Return a fresh (p, p) ndarray; mirror entries are identical bits."""
        out = np.empty((self.p, self.p))
        i, j = np.triu_indices(self.p)
        out[i, j] = self.upper
        out[j, i] = self.upper
        return out

    def entry(self, i: int, j: int) -> float:
        if not (0 <= i < self.p and 0 <= j < self.p):
            raise IndexError(f"index ({i}, {j}) out of range for p={self.p}")
        if i > j:
            i, j = j, i
        # row-major offset into the packed upper triangle
        return float(self.upper[i * self.p - i * (i - 1) // 2 + (j - i)])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.p, self.p)

    def allclose(self, other: "SymMatrix", tol: float = 1e-12) -> bool:
        return self.p == other.p and bool(
            np.max(np.abs(self.upper - other.upper)) <= tol
        )


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order with matching orthonormal columns."""

    values: np.ndarray
    basis: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.basis * self.values) @ self.basis.T


def uncentered_covariance(v) -> SymMatrix:
    """Second-moment matrix V^T V / n of an (n, p) observation array.

    No mean subtraction: rows are treated as raw sign/score vectors.  The
    result is positive semidefinite up to roundoff.
    """
    a = np.asarray(v, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d observation array, got ndim={a.ndim}")
    n, p = a.shape
    if n < 1 or p < 1:
        raise ValueError(f"need at least one row and one column, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("observations must be finite")
    g = a.T @ a / n
    return SymMatrix.wrap((g + g.T) / 2.0)


def eigh_dense(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """LAPACK eigendecomposition of a dense symmetric array.

    Returns (values, vectors) with values sorted descending.  This is the
    fast path used inside solver loops; :func:`eigh` below is the
    self-contained rotation method kept for the public contract.
    """
    w, q = np.linalg.eigh(a)
    return w[::-1].copy(), np.ascontiguousarray(q[:, ::-1])


def eigh(x: SymMatrix, sweep_budget: int = 100, rel_tol: float = 1e-14) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a SymMatrix.

    Performs full sweeps of (i, j) plane rotations until the off-diagonal
    Frobenius mass falls below ``rel_tol`` times the (rotation-invariant)
    Frobenius norm of the input.  Raises JacobiConvergenceError if the sweep
    budget is exhausted first.  Deterministic: identical input gives
    identical output.
    """
    p = x.p
    a = x.dense()
    v = np.eye(p)
    if p == 1:
        return EigenDecomposition(a[0, :1].copy(), v)
    fro = float(np.linalg.norm(a))
    if fro == 0.0:
        return EigenDecomposition(np.zeros(p), v)
    threshold = rel_tol * fro

    def off_norm():
        # summed directly over the strict triangle: the subtract-the-diagonal
        # form cancels catastrophically once the mass is near roundoff
        return float(np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2)))

    converged = off_norm() <= threshold
    for _ in range(sweep_budget):
        if converged:
            break
        for i in range(p - 1):
            for j in range(i + 1, p):
                apq = a[i, j]
                if apq == 0.0:
                    continue
                tau = (a[j, j] - a[i, i]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ri, rj = a[i, :].copy(), a[j, :].copy()
                a[i, :] = c * ri - s * rj
                a[j, :] = s * ri + c * rj
                ci, cj = a[:, i].copy(), a[:, j].copy()
                a[:, i] = c * ci - s * cj
                a[:, j] = s * ci + c * cj
                a[i, j] = 0.0
                a[j, i] = 0.0
                vi, vj = v[:, i].copy(), v[:, j].copy()
                v[:, i] = c * vi - s * vj
                v[:, j] = s * vi + c * vj
        converged = off_norm() <= threshold
    if not converged:
        raise JacobiConvergenceError(
            f"off-diagonal norm {off_norm():.3e} above {threshold:.3e} "
            f"after {sweep_budget} sweeps"
        )
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return EigenDecomposition(vals[order], np.ascontiguousarray(v[:, order]))


def hadamard(a: SymMatrix, b: SymMatrix) -> SymMatrix:
    """Entrywise product; symmetric-by-construction on packed storage."""
    if a.p != b.p:
        raise ValueError(f"dimension mismatch: {a.p} vs {b.p}")
    return SymMatrix(a.p, a.upper * b.upper)
