"""Command line front end: solve problem files, run benchmarks, print checks.

Exit codes: 0 on success, 1 on usage or input errors, 2 when the solver ran
out of budget.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .benchmarks import VARIANTS, build_problem, generate, run_suite, emit
from .blocks import BlockVector
from .cycle import CycleStatus, TelemetryOptions
from .diagnostics import (
    certificate_residual,
    check_lemma_suite,
    compute_constants,
    penalty_start_margins,
)
from .dynamic import solve
from .engine import available_engines
from .problem import (
    ProblemFormatError,
    SolverParams,
    WindowMode,
    load_problem,
    validate_params,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; keep 2 reserved for budget statuses.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_param_flags(p: argparse.ArgumentParser):
    p.add_argument("--rho", type=float, default=1e-9, help="residual tolerance")
    p.add_argument("--eta", type=float, default=1e-9, help="feasibility tolerance")
    p.add_argument("--lam", type=float, default=0.5, help="prox stepsize")
    p.add_argument("--theta", type=float, default=0.5, help="dampening factor")
    p.add_argument("--chi", type=float, default=1.0 / 18.0, help="under-relaxation")
    p.add_argument("--c1", type=float, default=1.0, help="initial penalty")
    p.add_argument(
        "--max-cycle-iters", type=int, default=100_000, help="per-cycle budget"
    )
    p.add_argument("--max-cycles", type=int, default=60, help="penalty doublings cap")
    p.add_argument(
        "--window",
        choices=["half", "full"],
        default="half",
        help="averaging window of the penalty test",
    )
    p.add_argument(
        "--strict",
        action="store_true",
        help="reject parameter pairs outside the coupling condition",
    )


def _params_from(args) -> SolverParams:
    return SolverParams(
        lam=args.lam,
        theta=args.theta,
        chi=args.chi,
        c1=args.c1,
        rho=args.rho,
        eta=args.eta,
        max_cycle_iters=args.max_cycle_iters,
        max_outer_cycles=args.max_cycles,
        window_mode=(
            WindowMode.FULL_AVERAGE if args.window == "full" else WindowMode.HALF_WINDOW
        ),
        strict_params=args.strict,
    )


def _out_path(name):
    if name is None:
        return None
    path = Path(name)
    base = os.environ.get("DPADMM_OUTPUT_DIR")
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def _write(text: str, path):
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dpadmm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", parents=[], help="solve a JSON problem file")
    ps.add_argument("problem", help="path to a quadratic-over-box problem file")
    _add_param_flags(ps)
    ps.add_argument("-o", "--output", default=None, help="write the result here")
    ps.add_argument(
        "--engine",
        choices=["auto", "compiled", "python", "generic"],
        default="auto",
    )
    ps.add_argument(
        "--telemetry",
        default=None,
        help="also write per-iteration records as JSON lines to this path",
    )

    pb = sub.add_parser("bench", help="run the benchmark table")
    pb.add_argument("--n", default="10", help="comma-separated block sizes")
    pb.add_argument("--gamma", default="100", help="comma-separated box radii")
    pb.add_argument(
        "--variants",
        default="dp1,dp2",
        help=f"comma-separated subset of {sorted(VARIANTS)}",
    )
    pb.add_argument("--tol", type=float, default=1e-9)
    pb.add_argument("--seed", type=int, default=0)
    pb.add_argument("--cap", type=int, default=100_000, help="total iteration cap")
    pb.add_argument("--format", choices=["csv", "json", "markdown"], default="csv")
    pb.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    pb.add_argument(
        "--engine",
        choices=["auto", "compiled", "python", "generic"],
        default="auto",
    )
    pb.add_argument("-o", "--output", default=None)

    pc = sub.add_parser(
        "check", help="print the constants report and the invariant suite"
    )
    pc.add_argument("--n", type=int, default=4)
    pc.add_argument("--gamma", type=float, default=1.0)
    pc.add_argument("--seed", type=int, default=1)
    pc.add_argument("--tol", type=float, default=1e-7, help="probe tolerance")
    pc.add_argument("--iters", type=int, default=3000, help="probe budget")
    pc.add_argument("--theta", type=float, default=0.5)
    pc.add_argument("--chi", type=float, default=1.0 / 18.0)
    pc.add_argument("-o", "--output", default=None)
    return parser


def _cmd_solve(args) -> int:
    try:
        problem = load_problem(args.problem)
    except ProblemFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    params = _params_from(args)
    errors = validate_params(
        params, problem.num_blocks, m=problem.weak_convexity_bound()
    )
    if errors:
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    telemetry = TelemetryOptions() if args.telemetry else None
    z0 = BlockVector.zeros(problem.structure)
    result = solve(problem, z0, params, engine=args.engine, telemetry=telemetry)
    payload = {
        "status": result.status.value,
        "iterations": result.total_iterations,
        "v_norm": result.v_norm,
        "feas_norm": result.feas_norm,
        "cycles": [
            {
                "c": s.c,
                "iterations": s.iterations,
                "status": s.status.value,
                "v_norm": s.v_norm,
                "feas_norm": s.feas_norm,
            }
            for s in result.cycles
        ],
        "z": result.z_bar.data.tolist(),
        "q": result.q_bar.tolist(),
        "v": result.v_bar.data.tolist(),
    }
    _write(json.dumps(payload, indent=2) + "\n", _out_path(args.output))
    if args.telemetry and result.telemetries:
        lines = []
        for cycle_idx, tele in enumerate(result.telemetries):
            for rec in tele.records():
                rec["cycle"] = cycle_idx + 1
                rec["c"] = tele.c
                lines.append(json.dumps(rec))
        _write("\n".join(lines) + "\n", _out_path(args.telemetry))
    return 0 if result.status is CycleStatus.SUCCESS else 2


def _cmd_bench(args) -> int:
    try:
        sizes = [int(v) for v in str(args.n).split(",") if v != ""]
        gammas = [float(v) for v in str(args.gamma).split(",") if v != ""]
        names = [v.strip() for v in args.variants.split(",") if v.strip()]
        variants = [VARIANTS[name] for name in names]
    except (ValueError, KeyError) as exc:
        print(f"error: bad grid or variant flag: {exc}", file=sys.stderr)
        return 1
    grid = [(n, g) for n in sizes for g in gammas]
    table = run_suite(
        grid,
        variants,
        tol=args.tol,
        seed=args.seed,
        iter_cap=args.cap,
        jobs=args.jobs,
        engine=args.engine,
    )
    _write(emit(table, args.format), _out_path(args.output))
    return 0


def _cmd_check(args) -> int:
    variant_params = SolverParams(
        lam=0.5,
        theta=args.theta,
        chi=args.chi,
        rho=args.tol,
        eta=args.tol,
        max_cycle_iters=args.iters,
        window_mode=WindowMode.FULL_AVERAGE,
        strict_params=False,
    )
    problem = build_problem(generate(args.n, args.gamma, args.seed))
    z0 = BlockVector.zeros(problem.structure)
    opts = TelemetryOptions(record_vectors=True, record_values=True)
    result = solve(problem, z0, variant_params, telemetry=opts, engine="generic")
    constants = compute_constants(problem, variant_params, c=result.cycles[-1].c)
    suite = check_lemma_suite(result.telemetries[-1], constants)
    cert = certificate_residual(problem, result.z_bar, result.q_bar, result.v_bar)
    margins = penalty_start_margins(result, constants.kappa1)
    ok = (
        suite.passed
        and all(m <= 1e-9 for m in margins)
        and (result.status is not CycleStatus.SUCCESS or cert <= 1e-7)
    )
    payload = {
        "engines": available_engines(),
        "solve": {
            "status": result.status.value,
            "iterations": result.total_iterations,
            "v_norm": result.v_norm,
            "feas_norm": result.feas_norm,
        },
        "certificate_residual": cert,
        "penalty_start_margins": margins,
        "constants": constants.to_dict(),
        "invariants": suite.to_dict(),
        "passed": ok,
    }
    _write(json.dumps(payload, indent=2) + "\n", _out_path(args.output))
    return 0 if ok else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return _cmd_solve(args)
    if args.command == "bench":
        return _cmd_bench(args)
    return _cmd_check(args)


if __name__ == "__main__":
    sys.exit(main())
