"""Benchmark family, variant configurations, and the suite runner.

The test family is a three-block consensus quadratic program over a box:
two blocks carry concave quadratics with uniformly drawn curvatures and
linear terms, the third is free, and all three are tied together by
difference constraints. Instances are generated from a seed with the
deterministic generator in :mod:`dpadmm.rng`, so a (seed, config) pair pins
the entire run.
"""

from __future__ import annotations

import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .blocks import BlockVector
from .cycle import CycleStatus, run_static_cycle
from .dynamic import solve
from .engine import run_consensus3_cycle
from .linops import consensus3_operators
from .problem import BlockProblem, SolverParams, WindowMode, quadratic_box_problem
from .rng import SplitMix64


@dataclass(frozen=True)
class QpInstance:
    """One generated consensus box-QP instance."""

    n: int
    gamma: float
    alpha: tuple[float, float]
    beta: tuple[np.ndarray, np.ndarray]
    seed: int


@dataclass(frozen=True)
class VariantConfig:
    """Named solver configuration for the benchmark tables."""

    name: str
    theta: float
    chi: float
    lam: float
    c1: float
    window_mode: WindowMode
    dynamic: bool = True
    note: str = ""


DP1 = VariantConfig(
    "dp1",
    theta=0.0,
    chi=1.0,
    lam=0.5,
    c1=1.0,
    window_mode=WindowMode.FULL_AVERAGE,
    note="undampened multiplier step; runs outside the coupling condition",
)
DP2 = VariantConfig(
    "dp2",
    theta=0.5,
    chi=1.0 / 18.0,
    lam=0.5,
    c1=1.0,
    window_mode=WindowMode.FULL_AVERAGE,
    note="meets the coupling condition with equality for three blocks",
)
PADMM = VariantConfig(
    "padmm",
    theta=0.0,
    chi=1.0,
    lam=0.5,
    c1=1.0,
    window_mode=WindowMode.FULL_AVERAGE,
    dynamic=False,
    note="classic proximal ADMM: fixed penalty, success test only",
)

VARIANTS = {v.name: v for v in (DP1, DP2, PADMM)}


def generate(n: int, gamma: float, seed: int) -> QpInstance:
    """Draws an instance; order of draws is alpha1, alpha2, beta1, beta2."""
    if n < 1:
        raise ValueError("n must be positive")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    rng = SplitMix64(seed)
    a1 = rng.uniform()
    a2 = rng.uniform()
    b1 = rng.uniforms(n)
    b2 = rng.uniforms(n)
    return QpInstance(n=n, gamma=float(gamma), alpha=(a1, a2), beta=(b1, b2), seed=seed)


def build_problem(instance: QpInstance) -> BlockProblem:
    """Materializes the oracle bundle for an instance."""
    n = instance.n
    return quadratic_box_problem(
        alphas=(instance.alpha[0], instance.alpha[1], 0.0),
        betas=(instance.beta[0], instance.beta[1], np.zeros(n)),
        gamma=instance.gamma,
        A_ops=consensus3_operators(n),
        d=np.zeros(2 * n),
        consensus3=True,
    )


def variant_params(variant: VariantConfig, tol: float, iter_cap: int) -> SolverParams:
    return SolverParams(
        lam=variant.lam,
        theta=variant.theta,
        chi=variant.chi,
        c1=variant.c1,
        rho=tol,
        eta=tol,
        max_cycle_iters=iter_cap,
        max_outer_cycles=60,
        window_mode=variant.window_mode,
        strict_params=False,
    )


@dataclass(frozen=True)
class ResultRow:
    variant: str
    n: int
    gamma: float
    seed: int
    status: str
    iterations: int
    cycles: int
    runtime_ms: float
    final_v_norm: float
    final_feas_norm: float

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "n": self.n,
            "gamma": self.gamma,
            "seed": self.seed,
            "status": self.status,
            "iterations": self.iterations,
            "cycles": self.cycles,
            "runtime_ms": self.runtime_ms,
            "final_v_norm": self.final_v_norm,
            "final_feas_norm": self.final_feas_norm,
        }


COLUMNS = (
    "variant",
    "n",
    "gamma",
    "seed",
    "status",
    "iterations",
    "cycles",
    "runtime_ms",
    "final_v_norm",
    "final_feas_norm",
)


@dataclass
class ResultTable:
    rows: list[ResultRow]

    def to_dicts(self) -> list[dict]:
        return [r.to_dict() for r in self.rows]


def run_cell(
    n: int,
    gamma: float,
    seed: int,
    variant: VariantConfig,
    tol: float = 1e-9,
    iter_cap: int = 100_000,
    engine: str = "auto",
) -> tuple[ResultRow, object]:
    """Runs one (instance, variant) cell; returns the row and the raw result."""
    problem = build_problem(generate(n, gamma, seed))
    params = variant_params(variant, tol, iter_cap)
    z0 = BlockVector.zeros(problem.structure)
    start = time.perf_counter()
    if variant.dynamic:
        result = solve(
            problem, z0, params, total_iteration_cap=iter_cap, engine=engine
        )
        status = result.status
        iterations = result.total_iterations
        n_cycles = len(result.cycles)
        v_norm, f_norm = result.v_norm, result.feas_norm
    else:
        result = _fixed_penalty_run(problem, z0, params, iter_cap, engine)
        status = result.status
        iterations = result.iterations
        n_cycles = 1
        v_norm, f_norm = result.v_norm, result.feas_norm
    elapsed_ms = 1000.0 * (time.perf_counter() - start)
    row = ResultRow(
        variant=variant.name,
        n=n,
        gamma=gamma,
        seed=seed,
        status="success" if status is CycleStatus.SUCCESS else "max_iters",
        iterations=iterations,
        cycles=n_cycles,
        runtime_ms=elapsed_ms,
        final_v_norm=v_norm,
        final_feas_norm=f_norm,
    )
    return row, result


@dataclass
class _FixedRun:
    status: CycleStatus
    iterations: int
    v_norm: float
    feas_norm: float


def _fixed_penalty_run(problem, z0, params, iter_cap, engine):
    if engine != "generic" and problem.consensus3 is not None:
        x = z0.data.copy()
        p = np.zeros(problem.structure.constraint_dim)
        status, k, v_hist, f_hist, _, _, _ = run_consensus3_cycle(
            problem, x, p, params.c1, params, iter_cap, penalty_test=False, engine=engine
        )
        return _FixedRun(status, k, float(v_hist[-1]), float(f_hist[-1]))
    return run_static_cycle(
        problem,
        z0,
        np.zeros(problem.structure.constraint_dim),
        params.c1,
        params,
        max_iters=iter_cap,
        penalty_test=False,
    )


def _run_cell_args(args):
    n, gamma, seed, variant_name, tol, iter_cap, engine = args
    row, _ = run_cell(n, gamma, seed, VARIANTS[variant_name], tol, iter_cap, engine)
    return row


def run_suite(
    grid,
    variants,
    tol: float = 1e-9,
    seed: int = 0,
    iter_cap: int = 100_000,
    jobs: int = 1,
    engine: str = "auto",
) -> ResultTable:
    """Runs every variant on every (n, gamma) cell from the zero start.

    Cells are independent; with ``jobs > 1`` they execute in worker
    processes, and the output order is by cell index regardless of
    parallelism.
    """
    variants = [v if isinstance(v, VariantConfig) else VARIANTS[v] for v in variants]
    cells = [
        (int(n), float(gamma), int(seed), v.name, float(tol), int(iter_cap), engine)
        for (n, gamma) in grid
        for v in variants
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_args, cells))
    else:
        rows = [_run_cell_args(c) for c in cells]
    return ResultTable(rows=rows)


def emit(table: ResultTable, fmt: str) -> str:
    """Serializes a result table as csv, json, or markdown."""
    fmt = fmt.lower()
    if fmt == "csv":
        out = io.StringIO()
        out.write(",".join(COLUMNS) + "\n")
        for row in table.rows:
            d = row.to_dict()
            out.write(",".join(_csv_cell(d[c]) for c in COLUMNS) + "\n")
        return out.getvalue()
    if fmt == "json":
        return json.dumps(table.to_dicts(), indent=2) + "\n"
    if fmt == "markdown":
        lines = ["| " + " | ".join(COLUMNS) + " |"]
        lines.append("|" + "|".join(" --- " for _ in COLUMNS) + "|")
        for row in table.rows:
            d = row.to_dict()
            if d["status"] != "success":
                d["iterations"] = "-"
            lines.append("| " + " | ".join(_md_cell(d[c]) for c in COLUMNS) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unsupported format {fmt!r}; use csv, json, or markdown")


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _md_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
