"""Cycle-engine selection: compiled kernel with a pure-python fallback.

The compiled extension is optional; when it failed to build, the numpy twin
takes over transparently. ``DPADMM_ENGINE`` overrides the "auto" choice.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from .blocks import BlockVector
from .cycle import CycleStatus, CycleTelemetry
from .dynamic import CycleSummary, SolveResult
from .problem import BlockProblem, SolverParams, WindowMode

try:
    from . import _consensus_cycle as _compiled
except ImportError:  # extension not built
    _compiled = None
from . import _consensus_py as _python

HAVE_COMPILED = _compiled is not None

_STATUS = {
    0: CycleStatus.SUCCESS,
    1: CycleStatus.PENALTY_TOO_SMALL,
    2: CycleStatus.BUDGET_EXCEEDED,
}


def available_engines() -> list[str]:
    engines = ["generic", "python"]
    if HAVE_COMPILED:
        engines.append("compiled")
    return engines


def resolve(name: str):
    """Maps an engine name to the kernel module implementing ``run_cycle``."""
    if name == "auto":
        name = os.environ.get("DPADMM_ENGINE", "auto")
    if name == "auto":
        return _compiled if HAVE_COMPILED else _python
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled cycle kernel is not available")
        return _compiled
    if name == "python":
        return _python
    raise ValueError(f"unknown engine {name!r}; use auto, compiled, or python")


def run_consensus3_cycle(
    problem: BlockProblem,
    x: np.ndarray,
    p: np.ndarray,
    c: float,
    params: SolverParams,
    budget: int,
    *,
    penalty_test: bool = True,
    engine: str = "auto",
):
    """Single fast-path cycle; mutates the flat iterate and multiplier.

    Returns ``(status, iterations, v_hist, f_hist, p_hist, q, v)`` with the
    histories trimmed to the executed iterations.
    """
    data = problem.consensus3
    if data is None:
        raise ValueError("problem has no consensus fast-path payload")
    impl = resolve(engine)
    n = data.n
    v_hist = np.empty(budget)
    f_hist = np.empty(budget)
    p_hist = np.empty(budget)
    q_out = np.empty(2 * n)
    v_out = np.empty(3 * n)
    code, k = impl.run_cycle(
        x,
        p,
        np.asarray(data.alphas, dtype=float),
        np.concatenate(data.betas),
        float(data.gamma),
        float(c),
        params.theta,
        params.chi,
        params.lam,
        params.rho,
        params.eta,
        int(budget),
        params.window_mode is WindowMode.FULL_AVERAGE,
        penalty_test,
        v_hist,
        f_hist,
        p_hist,
        q_out,
        v_out,
    )
    return (
        _STATUS[code],
        k,
        v_hist[:k].copy(),
        f_hist[:k].copy(),
        p_hist[:k].copy(),
        q_out,
        v_out,
    )


def solve_consensus3(
    problem: BlockProblem,
    z0: BlockVector,
    params: SolverParams,
    *,
    total_iteration_cap: Optional[int] = None,
    engine: str = "auto",
) -> SolveResult:
    """Penalty-doubling run on the fast path; same semantics as the generic
    dynamic solve with norms-only telemetry."""
    if total_iteration_cap is not None and total_iteration_cap < 1:
        raise ValueError("total_iteration_cap must allow at least one iteration")
    data = problem.consensus3
    n = data.n
    x = z0.data.copy()
    p = np.zeros(2 * n)
    c = params.c1
    used = 0
    cycles: list[CycleSummary] = []
    telemetries: list[CycleTelemetry] = []
    final = None

    for _ in range(params.max_outer_cycles):
        budget = params.max_cycle_iters
        if total_iteration_cap is not None:
            budget = min(budget, total_iteration_cap - used)
        if budget <= 0:
            break
        p_start = p.copy()
        status, k, v_hist, f_hist, p_hist, q, v = run_consensus3_cycle(
            problem, x, p, c, params, budget, engine=engine
        )
        used += k
        cycles.append(
            CycleSummary(
                c=c,
                iterations=k,
                status=status,
                p_start_norm=float(np.linalg.norm(p_start)),
                v_norm=float(v_hist[-1]),
                feas_norm=float(f_hist[-1]),
            )
        )
        tele = CycleTelemetry(
            c=c,
            theta=params.theta,
            chi=params.chi,
            lam=params.lam,
            num_blocks=3,
            p0=p_start,
        )
        tele.v_norms = v_hist.tolist()
        tele.f_norms = f_hist.tolist()
        tele.p_norms = p_hist.tolist()
        tele.inner_res = [0.0] * k
        telemetries.append(tele)
        final = (status, q, v)
        if status is CycleStatus.SUCCESS:
            break
        c *= 2.0

    status, q, v = final
    structure = problem.structure
    return SolveResult(
        status=(
            CycleStatus.SUCCESS
            if status is CycleStatus.SUCCESS
            else CycleStatus.BUDGET_EXCEEDED
        ),
        z_bar=BlockVector(structure, x),
        p_bar=p,
        q_bar=q,
        v_bar=BlockVector(structure, v),
        v_norm=cycles[-1].v_norm,
        feas_norm=cycles[-1].feas_norm,
        cycles=cycles,
        total_iterations=used,
        telemetries=telemetries,
    )
