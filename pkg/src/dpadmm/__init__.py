"""Dampened proximal ADMM with adaptive penalty doubling.

Solves linearly constrained, block-structured composite programs
min f(x) + sum_t h_t(x_t) subject to sum_t A_t x_t = d, where f may be
nonconvex (weakly convex per block) and each h_t is closed convex with a
compact domain. One iteration sweeps the blocks through proximal updates of
a dampened augmented Lagrangian, then applies an under-relaxed multiplier
step; a built-in averaged test detects a too-small penalty, which an outer
loop doubles until the run produces a certified approximate stationary
point.
"""

__version__ = "0.1.0"

from .blocks import BlockStructure, BlockVector
from .cycle import (
    CycleResult,
    CycleStatus,
    CycleTelemetry,
    TelemetryOptions,
    compute_q,
    compute_v,
    failure_check,
    prox_sweep,
    run_static_cycle,
    success_check,
    update_p,
)
from .diagnostics import (
    ConstantsReport,
    LemmaSuiteReport,
    certificate_residual,
    check_lemma_suite,
    compute_constants,
    damped_update_gap,
    penalty_start_margins,
)
from .dynamic import CycleSummary, SolveResult, solve
from .engine import available_engines
from .linops import BlockOperator, DenseOperator, ScatterOperator, consensus3_operators
from .problem import (
    BlockProblem,
    Consensus3Data,
    MissingOracleError,
    ProblemFormatError,
    SlaterData,
    SolverParams,
    WindowMode,
    constraint_residual,
    eval_dal,
    load_problem,
    quadratic_box_problem,
    validate_params,
)
from .subproblems import (
    BlockSubproblem,
    InexactCriterion,
    InnerSolveBudgetError,
    solve_exact_diag,
    solve_inexact,
)

__all__ = [
    "BlockOperator",
    "BlockProblem",
    "BlockStructure",
    "BlockSubproblem",
    "BlockVector",
    "Consensus3Data",
    "ConstantsReport",
    "CycleResult",
    "CycleStatus",
    "CycleSummary",
    "CycleTelemetry",
    "DenseOperator",
    "InexactCriterion",
    "InnerSolveBudgetError",
    "LemmaSuiteReport",
    "MissingOracleError",
    "ProblemFormatError",
    "ScatterOperator",
    "SlaterData",
    "SolveResult",
    "SolverParams",
    "TelemetryOptions",
    "WindowMode",
    "available_engines",
    "certificate_residual",
    "check_lemma_suite",
    "compute_constants",
    "compute_q",
    "compute_v",
    "consensus3_operators",
    "constraint_residual",
    "damped_update_gap",
    "eval_dal",
    "failure_check",
    "load_problem",
    "penalty_start_margins",
    "prox_sweep",
    "quadratic_box_problem",
    "run_static_cycle",
    "solve",
    "solve_exact_diag",
    "solve_inexact",
    "success_check",
    "update_p",
    "validate_params",
]
