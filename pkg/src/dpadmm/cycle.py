"""One penalty cycle: block sweeps, residual certificates, termination tests.

The cycle runs, at a fixed penalty c, the loop

    sweep blocks -> q and v residuals -> success test -> averaged
    unsuccessful test -> under-relaxed multiplier update,

returning either a certified stationary point, a signal that the penalty is
too small, or a budget status. Histories are kept in full with running
prefix sums so the averaged test costs O(1) per evaluation.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .blocks import BlockVector
from .problem import (
    BlockProblem,
    MissingOracleError,
    SolverParams,
    WindowMode,
    phi_value,
)
from .subproblems import BlockSubproblem, solve_inexact


class CycleStatus(enum.Enum):
    SUCCESS = "success"
    PENALTY_TOO_SMALL = "penalty_too_small"
    BUDGET_EXCEEDED = "budget_exceeded"


def damping_coefficients(theta: float, chi: float, num_blocks: int):
    """Coefficients (a, b, g) of the multiplier terms in the cycle potential:
    a = theta(1-theta), b = (2-theta)(1-theta), and the discount
    g = [(1 - 2*B*chi*b) - (1-theta)^2] / (2*chi)."""
    a = theta * (1.0 - theta)
    b = (2.0 - theta) * (1.0 - theta)
    g = ((1.0 - 2.0 * num_blocks * chi * b) - (1.0 - theta) ** 2) / (2.0 * chi)
    return a, b, g


@dataclass(frozen=True)
class TelemetryOptions:
    """What the cycle records besides the residual-norm histories."""

    record_vectors: bool = False
    record_values: bool = False


@dataclass
class CycleTelemetry:
    """Per-iteration trace of one cycle.

    Norm histories are always present. ``p_vecs``/``f_vecs`` hold the full
    multiplier and feasibility vectors when vector recording is on, and the
    value fields hold the composite objective and the potential when value
    recording is on (both need the problem's value oracles).
    """

    c: float
    theta: float
    chi: float
    lam: float
    num_blocks: int
    p0: np.ndarray
    v_norms: list[float] = field(default_factory=list)
    f_norms: list[float] = field(default_factory=list)
    p_norms: list[float] = field(default_factory=list)
    inner_res: list[float] = field(default_factory=list)
    p_vecs: Optional[list[np.ndarray]] = None
    f_vecs: Optional[list[np.ndarray]] = None
    phi: Optional[list[float]] = None
    psi: Optional[list[float]] = None
    dx_sq: Optional[list[float]] = None
    adx_sq: Optional[list[float]] = None
    phi0: Optional[float] = None
    f0: Optional[np.ndarray] = None

    @property
    def iterations(self) -> int:
        return len(self.v_norms)

    @property
    def has_vectors(self) -> bool:
        return self.p_vecs is not None

    @property
    def has_values(self) -> bool:
        return self.phi is not None

    @property
    def exact(self) -> bool:
        return all(r == 0.0 for r in self.inner_res)

    def records(self):
        """Per-iteration dicts, one per record, for JSON-lines output."""
        for i in range(self.iterations):
            rec = {
                "iteration": i + 1,
                "v_norm": self.v_norms[i],
                "f_norm": self.f_norms[i],
                "p_norm": self.p_norms[i],
            }
            if self.inner_res[i] > 0.0:
                rec["inner_residual"] = self.inner_res[i]
            if self.has_values:
                rec["phi"] = self.phi[i]
                rec["psi"] = self.psi[i]
            yield rec


@dataclass
class CycleState:
    """Mutable loop state of a running cycle."""

    k: int
    x: BlockVector
    x_prev: BlockVector
    p: np.ndarray
    q: Optional[np.ndarray]
    v: Optional[BlockVector]
    f_res: Optional[np.ndarray]


@dataclass
class CycleResult:
    """Outcome of one fixed-penalty cycle."""

    status: CycleStatus
    x_out: BlockVector
    p_out: np.ndarray
    q_out: np.ndarray
    v_out: BlockVector
    iterations: int
    v_norm: float
    feas_norm: float
    telemetry: CycleTelemetry


def compute_q(p_prev: np.ndarray, c: float, theta: float, f_res: np.ndarray):
    """Candidate multiplier (1 - theta) p + c (Ax - d)."""
    return (1.0 - theta) * p_prev + c * f_res


def update_p(p_prev, c: float, theta: float, chi: float, f_res):
    """Under-relaxed multiplier update (1 - theta) p + chi c (Ax - d)."""
    return (1.0 - theta) * p_prev + chi * c * f_res


def success_check(v_norm: float, feas_norm: float, rho: float, eta: float) -> bool:
    return v_norm <= rho and feas_norm <= eta


def failure_check(
    k: int,
    v_hist,
    f_hist,
    c: float,
    rho: float,
    eta: float,
    window_mode: WindowMode,
) -> bool:
    """Averaged unsuccessful-termination test at iteration k.

    ``v_hist[i-1]`` must hold the residual norm of iteration i. Both window
    modes normalize by 2/(k+2); the half window sums iterations k/2..k while
    the full average sums 1..k.
    """
    if k % 2 != 0 or k < 4:
        return False
    lo = 0 if window_mode is WindowMode.FULL_AVERAGE else k // 2 - 1
    scale = 2.0 / (k + 2)
    s_v = scale * float(sum(v_hist[lo:k]))
    s_f = scale * float(sum(f_hist[lo:k]))
    return s_v / rho + math.sqrt(c**3 / k) * s_f / eta <= 1.0


def prox_sweep(
    problem: BlockProblem, x: BlockVector, p: np.ndarray, c: float, params: SolverParams
) -> BlockVector:
    """One full block sweep; returns the updated iterate."""
    x_new, _, _ = _sweep(problem, x, p, c, params)
    return x_new


def compute_v(
    problem: BlockProblem,
    x_new: BlockVector,
    x_prev: BlockVector,
    c: float,
    lam: float,
) -> BlockVector:
    """Stationarity residual certifying v in grad f(x) + A^T q + subdiff h(x)."""
    v, _, _ = _residual_certificate(problem, x_new, x_prev, c, lam)
    return v


def run_static_cycle(
    problem: BlockProblem,
    x0: BlockVector,
    p0: np.ndarray,
    c: float,
    params: SolverParams,
    *,
    telemetry: Optional[TelemetryOptions] = None,
    max_iters: Optional[int] = None,
    penalty_test: bool = True,
) -> CycleResult:
    """Runs one fixed-penalty cycle from (x0, p0).

    Parameters
    ----------
    problem, x0, p0, c : problem bundle, starting iterate in dom h, starting
        multiplier (should lie in the image of the coupling map), penalty.
    params : tolerances, stepsize, dampening pair, window mode.
    telemetry : optional recording switches; value recording requires the
        problem's value oracles.
    max_iters : overrides ``params.max_cycle_iters`` for this call.
    penalty_test : disable to run a classic fixed-penalty method that only
        stops on the success test.

    Returns
    -------
    CycleResult with the final quadruple (x, p, q, v), the iteration count,
    and the recorded telemetry. A budget exhaustion is a status, not an
    error.
    """
    opts = telemetry or TelemetryOptions()
    if opts.record_values and (problem.phi_smooth is None or problem.h_value is None):
        raise MissingOracleError("value telemetry requires phi_smooth and h_value")

    p0 = np.ascontiguousarray(p0, dtype=float)
    if p0.shape != (problem.structure.constraint_dim,):
        raise ValueError("p0 does not match the constraint dimension")
    _warn_if_outside_image(problem, p0)
    lam, theta, chi = params.lam, params.theta, params.chi
    m = problem.weak_convexity_bound()
    if lam <= 0.0 or (m > 0.0 and lam > (1.0 + 1e-12) / (2.0 * m)):
        raise ValueError(f"lam={lam} outside (0, 1/(2m)] for m={m}")
    rho, eta = params.rho, params.eta
    budget = params.max_cycle_iters if max_iters is None else max_iters
    if budget < 1:
        raise ValueError("iteration budget must be at least 1")

    tele = CycleTelemetry(
        c=c, theta=theta, chi=chi, lam=lam, num_blocks=problem.num_blocks, p0=p0.copy()
    )
    if opts.record_vectors:
        tele.p_vecs, tele.f_vecs = [], []
        tele.f0 = _full_residual(problem, x0)
    if opts.record_values:
        tele.phi, tele.psi, tele.dx_sq, tele.adx_sq = [], [], [], []
        tele.phi0 = phi_value(problem, x0)
        a_th, _, g_th = damping_coefficients(theta, chi, problem.num_blocks)

    # Prefix sums P[i] = sum of the first i norms keep the averaged test O(1).
    pv, pf = [0.0], [0.0]

    state = CycleState(k=0, x=x0.copy(), x_prev=x0.copy(), p=p0.copy(), q=None, v=None, f_res=None)
    status = CycleStatus.BUDGET_EXCEEDED
    for k in range(1, budget + 1):
        state.k = k
        state.x_prev = state.x
        p_prev = state.p
        x_new, f_res, inner_max = _sweep(problem, state.x_prev, p_prev, c, params)
        state.x, state.f_res = x_new, f_res
        state.q = compute_q(p_prev, c, theta, f_res)
        v, dx_sq, adx_sq = _residual_certificate(problem, x_new, state.x_prev, c, lam)
        state.v = v
        v_norm = v.norm()
        f_norm = float(np.linalg.norm(f_res))
        state.p = update_p(p_prev, c, theta, chi, f_res)

        tele.v_norms.append(v_norm)
        tele.f_norms.append(f_norm)
        tele.p_norms.append(float(np.linalg.norm(state.p)))
        tele.inner_res.append(inner_max)
        pv.append(pv[-1] + v_norm)
        pf.append(pf[-1] + f_norm)
        if opts.record_vectors:
            tele.p_vecs.append(state.p.copy())
            tele.f_vecs.append(f_res.copy())
        if opts.record_values:
            phi_k = phi_value(problem, x_new)
            dal = (
                phi_k
                + (1.0 - theta) * float(state.p @ f_res)
                + 0.5 * c * float(f_res @ f_res)
            )
            dp = state.p - p_prev
            psi_k = (
                dal
                - a_th * float(state.p @ state.p) / (2.0 * chi * c)
                + g_th * float(dp @ dp) / (4.0 * problem.num_blocks * chi * c)
            )
            tele.phi.append(phi_k)
            tele.psi.append(psi_k)
            tele.dx_sq.append(dx_sq)
            tele.adx_sq.append(adx_sq)

        if success_check(v_norm, f_norm, rho, eta):
            status = CycleStatus.SUCCESS
            break
        if penalty_test and k % 2 == 0 and k >= 4:
            lo = 0 if params.window_mode is WindowMode.FULL_AVERAGE else k // 2 - 1
            scale = 2.0 / (k + 2)
            s_v = scale * (pv[k] - pv[lo])
            s_f = scale * (pf[k] - pf[lo])
            if s_v / rho + math.sqrt(c**3 / k) * s_f / eta <= 1.0:
                status = CycleStatus.PENALTY_TOO_SMALL
                break

    return CycleResult(
        status=status,
        x_out=state.x,
        p_out=state.p,
        q_out=state.q,
        v_out=state.v,
        iterations=state.k,
        v_norm=tele.v_norms[-1],
        feas_norm=tele.f_norms[-1],
        telemetry=tele,
    )


def _sweep(problem, x, p, c, params):
    """Sequential block updates; returns (x_new, residual, max inner norm).

    The running left sum accumulates the updated blocks' contributions, so
    the constraint residual of the new iterate falls out of the last step.
    """
    B = problem.num_blocks
    ops = problem.A_ops
    lam, theta = params.lam, params.theta
    dual_shift = (1.0 - theta) * p

    suffix = [np.zeros(problem.structure.constraint_dim)]
    for t in range(B - 1, 0, -1):
        suffix.append(suffix[-1] + ops[t].apply(x.block(t)))
    suffix.reverse()  # suffix[t] = sum_{s > t} A_s x_s(old)

    x_work = x.copy()
    left = -problem.d.copy()
    inner_max = 0.0
    for t in range(B):
        base = left + suffix[t]
        center = x_work.block(t).copy()

        def grad_oracle(u, _t=t):
            # x_work holds the updated blocks before _t and the previous
            # iterate's blocks after it, which is exactly the sweep state.
            return problem.grad_block(_t, x_work, u)

        sub = BlockSubproblem(
            t=t,
            lam=lam,
            quad_coeff=lam * c,
            linear_vec=lam * ops[t].adjoint(dual_shift + c * base),
            center=center,
            residual_base=base,
            dual_shift=dual_shift,
            grad_oracle=grad_oracle,
            prox_h=lambda u, tau, _t=t: problem.prox_h(_t, u, tau),
            A_op=ops[t],
            m_t=problem.m[t],
        )
        if problem.prox_block is not None:
            u = problem.prox_block(t, sub)
        else:
            u, r, _ = solve_inexact(sub, problem.inexact)
            inner_max = max(inner_max, float(np.linalg.norm(r)))
        x_work.block(t)[:] = u
        left = left + ops[t].apply(u)
    return x_work, left, inner_max


def _residual_certificate(problem, x_new, x_prev, c, lam):
    """Builds the v residual plus the step statistics used by diagnostics."""
    B = problem.num_blocks
    ops = problem.A_ops
    v = BlockVector.zeros(x_new.structure)
    suffix = np.zeros(problem.structure.constraint_dim)
    dx_sq = 0.0
    adx_sq = 0.0
    for t in range(B - 1, -1, -1):
        dx_t = x_new.block(t) - x_prev.block(t)
        vt = c * ops[t].adjoint(suffix) - dx_t / lam
        if t < B - 1 and problem.M[t] != 0.0:
            mixed = x_new.copy()
            for s in range(t + 1, B):
                mixed.block(s)[:] = x_prev.block(s)
            u_t = x_new.block(t)
            vt = vt + problem.grad_block(t, x_new, u_t) - problem.grad_block(
                t, mixed, u_t
            )
        v.block(t)[:] = vt
        a_dx = ops[t].apply(dx_t)
        suffix = suffix + a_dx
        dx_sq += float(dx_t @ dx_t)
        adx_sq += float(a_dx @ a_dx)
    return v, dx_sq, adx_sq


def _full_residual(problem, x):
    from .problem import constraint_residual

    return constraint_residual(problem, x)


def _warn_if_outside_image(problem, p0):
    if not np.any(p0):
        return
    ops = problem.A_ops
    total = problem.structure.total_dim
    if p0.size * total > 4_000_000:
        return
    from .linops import stack_matrix

    mat = stack_matrix(ops)
    sol, *_ = np.linalg.lstsq(mat, p0, rcond=None)
    resid = np.linalg.norm(mat @ sol - p0)
    if resid > 1e-8 * (1.0 + np.linalg.norm(p0)):
        warnings.warn(
            f"p0 lies outside the image of the coupling map "
            f"(residual {resid:.2e}); the iteration is still well defined",
            stacklevel=3,
        )
