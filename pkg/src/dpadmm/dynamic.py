"""Adaptive outer loop: warm-started penalty cycles with doubling.

Each round runs one fixed-penalty cycle from the previous round's iterate
and multiplier. A successful cycle ends the run; any other outcome doubles
the penalty and continues. A cycle that exhausts its iteration budget is
treated like a too-small-penalty signal (the event is recorded), since
doubling is the only productive continuation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .blocks import BlockVector
from .cycle import CycleResult, CycleStatus, TelemetryOptions, run_static_cycle
from .problem import BlockProblem, SolverParams


@dataclass(frozen=True)
class CycleSummary:
    """One row of the per-cycle breakdown of a dynamic run."""

    c: float
    iterations: int
    status: CycleStatus
    p_start_norm: float
    v_norm: float
    feas_norm: float


class SolveStatus:
    SUCCESS = CycleStatus.SUCCESS
    BUDGET_EXCEEDED = CycleStatus.BUDGET_EXCEEDED


@dataclass
class SolveResult:
    """Outcome of a dynamic run with its certificate triple (z, q, v)."""

    status: CycleStatus
    z_bar: BlockVector
    p_bar: np.ndarray
    q_bar: np.ndarray
    v_bar: BlockVector
    v_norm: float
    feas_norm: float
    cycles: list[CycleSummary]
    total_iterations: int
    telemetries: Optional[list] = None

    @property
    def success(self) -> bool:
        return self.status is CycleStatus.SUCCESS


def solve(
    problem: BlockProblem,
    z0: BlockVector,
    params: SolverParams,
    *,
    telemetry: Optional[TelemetryOptions] = None,
    total_iteration_cap: Optional[int] = None,
    engine: str = "auto",
) -> SolveResult:
    """Runs the penalty-doubling method from z0 (any point in dom h).

    The starting multiplier is zero. The run stops at the first cycle whose
    output satisfies both tolerances, or with a budget status once
    ``params.max_outer_cycles`` or ``total_iteration_cap`` is exhausted.

    ``engine`` selects the cycle implementation: "auto" uses the compiled
    fast path when the problem carries a consensus fast-path payload and no
    extra telemetry is requested, "python" forces its pure-numpy twin, and
    "generic" always runs the oracle-driven reference cycle.
    """
    from . import engine as _engine

    if total_iteration_cap is not None and total_iteration_cap < 1:
        raise ValueError("total_iteration_cap must allow at least one iteration")
    if (
        engine != "generic"
        and problem.consensus3 is not None
        and (telemetry is None or telemetry == TelemetryOptions())
    ):
        return _engine.solve_consensus3(
            problem, z0, params, total_iteration_cap=total_iteration_cap, engine=engine
        )

    keep_tele = telemetry is not None
    p = np.zeros(problem.structure.constraint_dim)
    z = z0.copy()
    c = params.c1
    cycles: list[CycleSummary] = []
    telemetries = [] if keep_tele else None
    used = 0
    last: Optional[CycleResult] = None

    for _ in range(params.max_outer_cycles):
        budget = params.max_cycle_iters
        if total_iteration_cap is not None:
            budget = min(budget, total_iteration_cap - used)
        if budget <= 0:
            break
        res = run_static_cycle(
            problem, z, p, c, params, telemetry=telemetry, max_iters=budget
        )
        used += res.iterations
        cycles.append(
            CycleSummary(
                c=c,
                iterations=res.iterations,
                status=res.status,
                p_start_norm=float(np.linalg.norm(p)),
                v_norm=res.v_norm,
                feas_norm=res.feas_norm,
            )
        )
        if keep_tele:
            telemetries.append(res.telemetry)
        last = res
        if res.status is CycleStatus.SUCCESS:
            break
        # Warm start: the next cycle reuses the output pair unchanged.
        z, p = res.x_out, res.p_out
        c *= 2.0

    status = (
        CycleStatus.SUCCESS
        if last is not None and last.status is CycleStatus.SUCCESS
        else CycleStatus.BUDGET_EXCEEDED
    )
    return SolveResult(
        status=status,
        z_bar=last.x_out,
        p_bar=last.p_out,
        q_bar=last.q_out,
        v_bar=last.v_out,
        v_norm=last.v_norm,
        feas_norm=last.feas_norm,
        cycles=cycles,
        total_iterations=used,
        telemetries=telemetries,
    )
