"""Screening reductions for penalized second-moment estimators.

The package splits into matrix plumbing (symmat), single-linkage machinery
(linkage), mask-condition checking (orbit), the reductions themselves
(reductions), solvers with KKT certificates (estimators), randomized
verification (verify), and a CLI (cli).
"""

from .estimators import (
    BlockStat,
    ConvergenceError,
    EstimatorSpec,
    Family,
    NoSolutionError,
    SolveReport,
    SolverOptions,
    fantope_project,
    glasso,
    ising_logpartition,
    ising_pmle,
    kkt_residual,
    lasso,
    nnls,
    objective_at,
    reduction_for,
    solve,
    solve_decomposed,
)
from .linkage import (
    Dendrogram,
    Partition,
    cluster_matrix,
    cut_dendrogram,
    is_binary_ultrametric,
    mst_kruskal,
    slc,
    slt,
    slt_plus,
    threshold_components,
)
from .orbit import (
    ConditionReport,
    MaskProjection,
    arcsin_map,
    check_projection_conditions,
    conj_majorizes,
    cut_membership,
    cut_vertices,
    sign_majorizes,
)
from .penalty import GroupId, PenaltyKind, PenaltySpec
from .reductions import (
    ReducedProblem,
    decompose_blocks,
    group_hard_threshold,
    hard_threshold,
    positive_part,
    reassemble_blocks,
    reconstruct_from_soft,
    reduce_input,
)
from .symmat import (
    EigenDecomposition,
    JacobiConvergenceError,
    SymMatrix,
    eigh,
    hadamard,
    uncentered_covariance,
)
from .verify import (
    SufficiencyReport,
    SuiteSummary,
    check_minimality_slc,
    check_sufficiency,
    check_support_containment,
    enumerate_feasible_ultrametrics,
    run_suite,
)

__version__ = "0.1.0"

__all__ = [
    "BlockStat",
    "ConditionReport",
    "ConvergenceError",
    "Dendrogram",
    "EigenDecomposition",
    "EstimatorSpec",
    "Family",
    "GroupId",
    "JacobiConvergenceError",
    "MaskProjection",
    "NoSolutionError",
    "Partition",
    "PenaltyKind",
    "PenaltySpec",
    "ReducedProblem",
    "SolveReport",
    "SolverOptions",
    "SufficiencyReport",
    "SuiteSummary",
    "SymMatrix",
    "arcsin_map",
    "check_minimality_slc",
    "check_projection_conditions",
    "check_sufficiency",
    "check_support_containment",
    "cluster_matrix",
    "conj_majorizes",
    "cut_dendrogram",
    "cut_membership",
    "cut_vertices",
    "decompose_blocks",
    "eigh",
    "enumerate_feasible_ultrametrics",
    "fantope_project",
    "glasso",
    "group_hard_threshold",
    "hadamard",
    "hard_threshold",
    "is_binary_ultrametric",
    "ising_logpartition",
    "ising_pmle",
    "kkt_residual",
    "lasso",
    "mst_kruskal",
    "nnls",
    "objective_at",
    "positive_part",
    "reassemble_blocks",
    "reconstruct_from_soft",
    "reduce_input",
    "reduction_for",
    "run_suite",
    "sign_majorizes",
    "slc",
    "slt",
    "slt_plus",
    "solve",
    "solve_decomposed",
    "threshold_components",
    "uncentered_covariance",
]
