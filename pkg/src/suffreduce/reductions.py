"""Input reductions: the masking maps that shrink an estimator's input
without moving its solution set, plus block decomposition helpers.

Every reduction here is idempotent and non-expansive entrywise, and its mask
satisfies the averaging / dual-feasibility / dual-invariance conditions
checked by :func:`suffreduce.orbit.check_projection_conditions`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linkage import Partition, slc, slt, slt_plus, threshold_components
from .orbit import MaskProjection
from .penalty import GroupId, PenaltyKind, PenaltySpec
from .symmat import SymMatrix

__all__ = [
    "PenaltyKind",
    "PenaltySpec",
    "GroupId",
    "ReducedProblem",
    "hard_threshold",
    "group_hard_threshold",
    "positive_part",
    "reconstruct_from_soft",
    "reduce_input",
    "decompose_blocks",
    "reassemble_blocks",
]


@dataclass(frozen=True)
class ReducedProblem:
    """A reduced input together with the mask that produced it.

    ``partition`` groups coordinates that can be solved independently; it is
    set for the symmetric-matrix reductions and None for vector ones.
    """

    reduced: np.ndarray | SymMatrix
    mask: MaskProjection
    partition: Partition | None = None


def hard_threshold(x, lam) -> np.ndarray:
    """Zero coordinates with |x_i| <= lam_i, keep the rest untouched."""
    x = np.asarray(x, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), x.shape)
    if np.any(lam < 0):
        raise ValueError("thresholds must be nonnegative")
    return np.where(np.abs(x) > lam, x, 0.0)


def group_hard_threshold(x, blocks: Partition, lam) -> np.ndarray:
    """Zero whole blocks whose Euclidean norm is <= the block threshold."""
    x = np.asarray(x, dtype=float)
    if blocks.p != x.shape[0]:
        raise ValueError("partition does not cover the vector")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape[0] == 1:
        lam = np.repeat(lam, len(blocks.blocks))
    if lam.shape[0] != len(blocks.blocks):
        raise ValueError("need one threshold per block (or a scalar)")
    if np.any(lam < 0):
        raise ValueError("thresholds must be nonnegative")
    out = np.zeros_like(x)
    for k, blk in enumerate(blocks.blocks):
        idx = list(blk)
        if np.linalg.norm(x[idx]) > lam[k]:
            out[idx] = x[idx]
    return out


def positive_part(x) -> np.ndarray:
    """Zero nonpositive coordinates, keep positive ones bit-identical."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0.0, x, 0.0)


def reconstruct_from_soft(t, lam) -> np.ndarray:
    """Undo soft thresholding on its support: add lam_i * sign back.

    Maps the soft-threshold output t of some x back to the hard-threshold
    output of x (exact in real arithmetic; bit-exact when lam_i has few
    significand bits relative to x_i, e.g. dyadic thresholds).
    """
    t = np.asarray(t, dtype=float)
    lam = np.broadcast_to(np.asarray(lam, dtype=float), t.shape)
    if np.any(lam < 0):
        raise ValueError("thresholds must be nonnegative")
    return np.where(t != 0.0, t + lam * np.sign(t), 0.0)


def _require_scalar(penalty: PenaltySpec) -> float:
    w = np.asarray(penalty.weights, dtype=float)
    if w.ndim != 0:
        raise ValueError(
            f"{penalty.kind.value}: only scalar weights dispatch to a reduction"
        )
    return float(w)


def reduce_input(penalty: PenaltySpec, group: GroupId, x) -> ReducedProblem:
    """Build the sufficient reduction for a (penalty, group) pair.

    Supported pairs:

    ==================  =====================  =========================
    penalty             group                  reduction
    ==================  =====================  =========================
    entrywise_l1        sign_flip_vector       hard threshold
    group_l2            sign_flip_vector       blockwise hard threshold
    positive_cone       sign_flip_vector       positive part
    symmetric_l1        diagonal_conjugation   cluster-masked matrix
    offdiag_positivity  diagonal_conjugation   positive-path masking
    ==================  =====================  =========================
    """
    if group is GroupId.SIGN_FLIP_VECTOR:
        if penalty.kind not in (
            PenaltyKind.ENTRYWISE_L1,
            PenaltyKind.GROUP_L2,
            PenaltyKind.POSITIVE_CONE,
        ):
            raise ValueError(f"{penalty.kind.value} has no sign-flip reduction")
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("vector reductions expect a 1-d input")
        if penalty.kind is PenaltyKind.ENTRYWISE_L1:
            lam = np.broadcast_to(np.asarray(penalty.weights, dtype=float), x.shape)
            reduced = hard_threshold(x, lam)
            d = (np.abs(x) > lam).astype(float)
        elif penalty.kind is PenaltyKind.GROUP_L2:
            reduced = group_hard_threshold(x, penalty.blocks, penalty.weights)
            lam = np.atleast_1d(np.asarray(penalty.weights, dtype=float))
            d = np.zeros_like(x)
            for k, blk in enumerate(penalty.blocks.blocks):
                idx = list(blk)
                if np.linalg.norm(x[idx]) > lam[k]:
                    d[idx] = 1.0
        elif penalty.kind is PenaltyKind.POSITIVE_CONE:
            reduced = positive_part(x)
            d = (x > 0.0).astype(float)
        else:
            raise ValueError(
                f"{penalty.kind.value} has no sign-flip reduction"
            )
        mask = MaskProjection(group, vector=d)
        return ReducedProblem(reduced, mask, None)

    if penalty.kind not in (PenaltyKind.SYMMETRIC_L1, PenaltyKind.OFFDIAG_POSITIVITY):
        raise ValueError(f"{penalty.kind.value} has no conjugation reduction")
    if not isinstance(x, SymMatrix):
        x = SymMatrix.from_dense(np.asarray(x, dtype=float))
    if penalty.kind is PenaltyKind.SYMMETRIC_L1:
        lam = _require_scalar(penalty)
        reduced = slt(x, lam)
        mask_matrix = slc(SymMatrix(x.p, np.abs(x.upper)), lam)
        partition = threshold_components(x, lam)
    elif penalty.kind is PenaltyKind.OFFDIAG_POSITIVITY:
        reduced = slt_plus(x)
        mask_matrix = slc(x, 0.0)
        partition = Partition.from_labels(
            _labels_from_cluster_matrix(mask_matrix)
        )
    else:
        raise ValueError(f"{penalty.kind.value} has no conjugation reduction")
    mask = MaskProjection(group, matrix=mask_matrix)
    return ReducedProblem(reduced, mask, partition)


def _labels_from_cluster_matrix(b: SymMatrix) -> list[int]:
    d = b.dense().astype(bool)
    labels = [-1] * b.p
    for i in range(b.p):
        if labels[i] < 0:
            for j in np.nonzero(d[i])[0]:
                labels[j] = i
    return labels


def decompose_blocks(x: SymMatrix, partition: Partition) -> list[tuple[tuple[int, ...], SymMatrix]]:
    """Principal submatrices of x, one per partition block."""
    if partition.p != x.p:
        raise ValueError("partition does not cover the matrix")
    d = x.dense()
    out = []
    for blk in partition.blocks:
        idx = np.array(blk)
        out.append((blk, SymMatrix.wrap(d[np.ix_(idx, idx)])))
    return out


def reassemble_blocks(p: int, pieces) -> SymMatrix:
    """Inverse of :func:`decompose_blocks`: scatter blocks into a zero
    background.  ``pieces`` is a list of (indices, SymMatrix or ndarray)."""
    out = np.zeros((p, p))
    seen: set[int] = set()
    for blk, sub in pieces:
        idx = np.array(blk)
        if seen & set(blk):
            raise ValueError("blocks overlap")
        seen.update(blk)
        sd = sub.dense() if isinstance(sub, SymMatrix) else np.asarray(sub, dtype=float)
        if sd.shape != (len(blk), len(blk)):
            raise ValueError("block size mismatch")
        out[np.ix_(idx, idx)] = sd
    if seen != set(range(p)):
        raise ValueError("blocks must cover 0..p-1")
    return SymMatrix.wrap((out + out.T) / 2.0)
