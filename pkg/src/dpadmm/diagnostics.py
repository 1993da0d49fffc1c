"""Complexity constants, iteration bounds, and runtime invariant checks.

Everything here is observational: the solver never consults these numbers.
``compute_constants`` evaluates the bound machinery for a problem with
interior-point data; ``check_lemma_suite`` replays a recorded cycle trace
against the identities and inequalities the convergence argument rests on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .blocks import BlockVector
from .cycle import CycleTelemetry, damping_coefficients
from .dynamic import SolveResult
from .problem import BlockProblem, SolverParams, coupling_condition_lhs


class MissingSlaterDataError(RuntimeError):
    """Constants need interior-point data the problem does not carry."""


class MissingTelemetryError(RuntimeError):
    """The invariant suite needs vector and value telemetry."""


def _div(a: float, b: float) -> float:
    if b == 0.0:
        return math.inf if a >= 0.0 else -math.inf
    return a / b


@dataclass(frozen=True)
class ConstantsReport:
    """Every scalar of the complexity analysis for one (problem, params, c).

    ``kappa0..kappa6`` are penalty-independent, ``kappa_tilde*`` depend on
    the penalty lower bound ``c_lower``, and ``xi0``/``xi1`` on the bound
    ``R`` for ||p0||/c. ``T_c`` bounds the cycle length at penalty ``c`` and
    tolerance (rho, eta); ``c_hat`` is the penalty above which a cycle must
    stop successfully. ``dyn_bound`` bounds the total iterations of the
    doubling run via ``T1`` and ``E0``/``E1``.
    """

    num_blocks: int
    c: float
    c_lower: float
    R: float
    rho: float
    eta: float
    M: float
    m: float
    delta_phi: float
    kappa0: float
    kappa1: float
    kappa2: float
    kappa3: float
    kappa4: float
    kappa5: float
    kappa6: float
    a_theta: float
    b_theta: float
    gamma_theta: float
    kappa_tilde0: float
    kappa_tilde1: float
    kappa_tilde2: float
    xi0: float
    xi1: float
    T_c: float
    c_hat: float
    T1: float
    E0: float
    E1: float
    dyn_bound: float

    def iteration_bound(self, c: float, rho: float, eta: float) -> float:
        """Cycle-length bound at penalty c, reusing this report's constants."""
        return _t_bound(
            self.kappa3,
            self.kappa6,
            self.kappa_tilde1,
            self.kappa_tilde2,
            self.xi0,
            self.xi1,
            c,
            rho,
            eta,
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _t_bound(kappa3, kappa6, kt1, kt2, xi0, xi1, c, rho, eta):
    return 48.0 * (
        (kappa6 + kt1 / rho**2)
        + (xi0 + kappa3 / eta**2 + kt2 / rho**2) * c
        + xi1 * c**2
    )


def compute_constants(
    problem: BlockProblem,
    params: SolverParams,
    c: float,
    c_lower: Optional[float] = None,
    R: Optional[float] = None,
) -> ConstantsReport:
    """Evaluates the full constant set for a problem with interior-point data.

    ``c_lower`` defaults to ``params.c1`` and ``R`` to twice the multiplier
    growth constant, matching the warm-started doubling run. A dampening
    factor of zero sends the theta-divided constants to infinity; the report
    stays usable as a diagnostic.
    """
    s = problem.slater
    if s is None:
        raise MissingSlaterDataError(
            "problem has no interior-point (slater) data; supply it to "
            "evaluate the complexity constants"
        )
    B = problem.num_blocks
    theta, chi, lam = params.theta, params.chi, params.lam
    if c_lower is None:
        c_lower = params.c1

    M = max(problem.M) if problem.M else 0.0
    m = max(problem.m)
    delta_phi = s.phi_hi - s.phi_lo
    kappa0 = 2.0 * B**2 * (lam * M + 1.0) / math.sqrt(lam)
    kappa1 = _div(chi * s.norm_A * s.D_dagger, theta)
    kappa2 = (
        _div(
            1.0
            + _div(2.0 * chi * s.D_dagger * (s.K_h + s.G_f), theta * s.d_dagger * s.sigma_A_plus),
            theta,
        )
        + 1.0
    )
    kappa3 = _div(108.0 * kappa2**2, chi**2)
    kappa4 = _div(theta * s.d_dagger * s.sigma_A_plus, chi * s.D_dagger)
    kappa5 = 8.0 * (B - 1) * s.norm_A_dagger**2
    kappa6 = 3.0 + _div(8.0 * kappa0**2 * delta_phi, kappa4**2)
    a_theta, b_theta, gamma_theta = damping_coefficients(theta, chi, B)

    kt0 = 2.0 * (math.sqrt(max(delta_phi, 0.0)) + _div(5.0 * kappa2, chi * math.sqrt(c_lower)))
    kt1 = 3.0 * kappa5 * kt0**2
    kt2 = 3.0 * kappa0**2 * kt0**2

    if R is None:
        R = 2.0 * kappa1
    xi0 = _div(8.0, kappa4**2) * (
        _div(9.0 * kappa0**2 * (R + kappa1) ** 2, chi**2) + kappa5 * delta_phi
    ) + (1.0 - theta) * (R + kappa1)
    xi1 = _div(72.0 * kappa5 * (R + kappa1) ** 2, chi**2 * kappa4**2)

    T_c = _t_bound(kappa3, kappa6, kt1, kt2, xi0, xi1, c, params.rho, params.eta)
    T_base = _t_bound(kappa3, kappa6, kt1, kt2, xi0, xi1, c_lower, 1.0, 1.0)
    eps = min(params.rho, params.eta)
    c_hat = (T_base + math.sqrt(c_lower**3 * T_base) / eps) / c_lower**2

    # Doubling-run bound, always anchored at (c1, 2*kappa1).
    R_dyn = 2.0 * kappa1
    c1 = params.c1
    kt0_dyn = 2.0 * (
        math.sqrt(max(delta_phi, 0.0)) + _div(5.0 * kappa2, chi * math.sqrt(c1))
    )
    xi0_dyn = _div(8.0, kappa4**2) * (
        _div(9.0 * kappa0**2 * (R_dyn + kappa1) ** 2, chi**2) + kappa5 * delta_phi
    ) + (1.0 - theta) * (R_dyn + kappa1)
    xi1_dyn = _div(72.0 * kappa5 * (R_dyn + kappa1) ** 2, chi**2 * kappa4**2)
    T1 = _t_bound(
        kappa3,
        kappa6,
        3.0 * kappa5 * kt0_dyn**2,
        3.0 * kappa0**2 * kt0_dyn**2,
        xi0_dyn,
        xi1_dyn,
        c1,
        1.0,
        1.0,
    )
    E0 = 2.0 * (1.0 + T1**2 / c1**3)
    E1 = 2.0 * math.sqrt(T1 / c1**3)
    dyn_bound = T1 * (2.0 * E0**2 + (E0 + 2.0 * E1**2) / eps**2 + E1 / eps**3)

    return ConstantsReport(
        num_blocks=B,
        c=c,
        c_lower=c_lower,
        R=R,
        rho=params.rho,
        eta=params.eta,
        M=M,
        m=m,
        delta_phi=delta_phi,
        kappa0=kappa0,
        kappa1=kappa1,
        kappa2=kappa2,
        kappa3=kappa3,
        kappa4=kappa4,
        kappa5=kappa5,
        kappa6=kappa6,
        a_theta=a_theta,
        b_theta=b_theta,
        gamma_theta=gamma_theta,
        kappa_tilde0=kt0,
        kappa_tilde1=kt1,
        kappa_tilde2=kt2,
        xi0=xi0,
        xi1=xi1,
        T_c=T_c,
        c_hat=c_hat,
        T1=T1,
        E0=E0,
        E1=E1,
        dyn_bound=dyn_bound,
    )


# ---------------------------------------------------------------------------
# Trace checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LemmaCheckOptions:
    identity_rtol: float = 1e-9
    ineq_slack: float = 1e-8
    residual_sum_slack: float = 1e-6
    multiplier_rtol: float = 1e-9
    max_window_pairs: int = 64


@dataclass
class CheckOutcome:
    name: str
    passed: bool
    checked: int
    violations: int
    worst_margin: float
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "checked": self.checked,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
            "note": self.note,
        }


@dataclass
class LemmaSuiteReport:
    outcomes: list[CheckOutcome] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.outcomes)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [o.to_dict() for o in self.outcomes]}


def check_lemma_suite(
    telemetry: CycleTelemetry,
    constants: Optional[ConstantsReport] = None,
    options: Optional[LemmaCheckOptions] = None,
) -> LemmaSuiteReport:
    """Replays one cycle trace against the identities and inequalities the
    convergence analysis asserts along exact iterations.

    Needs vector and value telemetry. Checks that require a finite constant
    set (multiplier bounds) are skipped with a note when ``constants`` is
    absent or infinite; checks that assume exact inner solves skip the
    iterations where an inexact residual was recorded.
    """
    if not (telemetry.has_vectors and telemetry.has_values):
        raise MissingTelemetryError(
            "lemma suite needs record_vectors and record_values telemetry"
        )
    opt = options or LemmaCheckOptions()
    c, theta, chi = telemetry.c, telemetry.theta, telemetry.chi
    lam, B = telemetry.lam, telemetry.num_blocks
    a_th, b_th, g_th = damping_coefficients(theta, chi, B)
    K = telemetry.iterations

    P = [telemetry.p0] + list(telemetry.p_vecs)  # P[i] = p^i
    F = [telemetry.f0] + list(telemetry.f_vecs)  # F[i] = Ax^i - d
    phi = [telemetry.phi0] + list(telemetry.phi)
    pn = [float(np.linalg.norm(p)) for p in P]
    exact_iter = [r == 0.0 for r in telemetry.inner_res]

    def lagr(i: int, p: np.ndarray) -> float:
        f = F[i]
        return phi[i] + (1.0 - theta) * float(p @ f) + 0.5 * c * float(f @ f)

    psi = [math.nan]  # index 0 unused: the start has no multiplier step yet
    for i in range(1, K + 1):
        dp = P[i] - P[i - 1]
        psi.append(
            lagr(i, P[i])
            - a_th * float(P[i] @ P[i]) / (2.0 * chi * c)
            + g_th * float(dp @ dp) / (4.0 * B * chi * c)
        )

    report = LemmaSuiteReport()

    def run_check(name, indices, margin_fn, tol_fn, note=""):
        worst = -math.inf
        bad = 0
        count = 0
        for i in indices:
            margin = margin_fn(i)
            count += 1
            worst = max(worst, margin)
            if margin > tol_fn(i):
                bad += 1
        report.outcomes.append(
            CheckOutcome(
                name=name,
                passed=bad == 0,
                checked=count,
                violations=bad,
                worst_margin=worst if count else math.nan,
                note=note,
            )
        )

    # Feasibility recovers the multiplier step: f^i = [p^i - (1-theta)p^{i-1}]/(chi c).
    run_check(
        "feasibility_multiplier_identity",
        range(1, K + 1),
        lambda i: float(
            np.linalg.norm(F[i] - (P[i] - (1.0 - theta) * P[i - 1]) / (chi * c))
        )
        - opt.identity_rtol * (1.0 + float(np.linalg.norm(F[i]))),
        lambda i: 0.0,
    )

    # The accepted multiplier blends the candidate q with the dampened p.
    run_check(
        "dual_blend_identity",
        range(1, K + 1),
        lambda i: float(
            np.linalg.norm(
                P[i]
                - chi * ((1.0 - theta) * P[i - 1] + c * F[i])
                - (1.0 - chi) * (1.0 - theta) * P[i - 1]
            )
        )
        - opt.identity_rtol * (1.0 + pn[i]),
        lambda i: 0.0,
    )

    # Multiplier-shift identity for the dampened Lagrangian.
    def shift_margin(i):
        dp = P[i] - P[i - 1]
        lhs = lagr(i, P[i]) - lagr(i, P[i - 1])
        rhs = b_th * float(dp @ dp) / (2.0 * chi * c) + a_th * (
            pn[i] ** 2 - pn[i - 1] ** 2
        ) / (2.0 * chi * c)
        return abs(lhs - rhs) - opt.identity_rtol * (1.0 + abs(lhs))

    run_check("multiplier_shift_identity", range(1, K + 1), shift_margin, lambda i: 0.0)

    exact_idx = [i for i in range(1, K + 1) if exact_iter[i - 1]]
    note_inexact = "" if len(exact_idx) == K else "inexact iterations skipped"

    # Sweep descent: each sweep lowers the Lagrangian by the step sizes.
    def sweep_margin(i):
        lhs = lagr(i, P[i - 1]) - lagr(i - 1, P[i - 1])
        rhs = -telemetry.dx_sq[i - 1] / (2.0 * lam) - 0.5 * c * telemetry.adx_sq[i - 1]
        return lhs - rhs

    run_check(
        "sweep_descent",
        exact_idx,
        sweep_margin,
        lambda i: opt.ineq_slack * (1.0 + abs(lagr(i, P[i - 1]))),
        note_inexact,
    )

    # Cross bound between consecutive multiplier steps (needs the coupling
    # condition; meaningless outside it).
    condition_ok = coupling_condition_lhs(theta, chi, B) <= theta**2 * (1.0 + 1e-9) + 1e-12

    def cross_margin(i):
        dp = P[i] - P[i - 1]
        dp_prev = P[i - 1] - P[i - 2]
        lhs = b_th * float(dp @ dp) / (2.0 * chi * c) - 0.25 * c * telemetry.adx_sq[i - 1]
        rhs = g_th * (float(dp_prev @ dp_prev) - float(dp @ dp)) / (4.0 * B * chi * c)
        return lhs - rhs

    if condition_ok:
        run_check(
            "multiplier_step_cross_bound",
            [i for i in exact_idx if i >= 2],
            cross_margin,
            lambda i: opt.ineq_slack * (1.0 + abs(psi[i])),
            note_inexact,
        )

        # Potential descent from the second iteration on.
        run_check(
            "potential_descent",
            [i for i in range(2, K + 1) if exact_iter[i - 1] and exact_iter[i - 2]],
            lambda i: psi[i] - psi[i - 1],
            lambda i: opt.ineq_slack * (1.0 + abs(psi[i - 1])),
            note_inexact,
        )

        # Residual-energy bound over sampled windows.
        if constants is not None and K >= 3:
            factor = constants.kappa0**2 + constants.kappa5 * c
            v_sq = np.asarray(telemetry.v_norms) ** 2
            pairs = {(1, K), (max(1, K // 3), max(2, (2 * K) // 3)), (2, K // 2)}
            pairs = [(j, k) for j, k in pairs if 1 <= j < k <= K]
            run_check(
                "residual_sum_bound",
                range(len(pairs)),
                lambda idx: float(np.sum(v_sq[pairs[idx][0] : pairs[idx][1]]))
                - factor * (psi[pairs[idx][0]] - psi[pairs[idx][1]]),
                lambda idx: opt.residual_sum_slack,
                note_inexact if note_inexact else "windows " + repr(sorted(pairs)),
            )
    else:
        report.outcomes.append(
            CheckOutcome(
                name="potential_descent",
                passed=True,
                checked=0,
                violations=0,
                worst_margin=math.nan,
                note="coupling condition violated; descent not asserted",
            )
        )

    # Lagrangian sandwich around the composite objective.
    run_check(
        "lagrangian_upper_bound",
        range(1, K + 1),
        lambda i: lagr(i, P[i])
        - (phi[i] + 3.0 * (pn[i] ** 2 + pn[i - 1] ** 2) / (chi**2 * c)),
        lambda i: opt.ineq_slack * (1.0 + abs(phi[i])),
    )
    run_check(
        "lagrangian_lower_bound",
        range(1, K + 1),
        lambda i: (phi[i] - pn[i] ** 2 / (2.0 * c)) - lagr(i, P[i]),
        lambda i: opt.ineq_slack * (1.0 + abs(phi[i])),
    )

    # Multiplier growth is linear in the penalty.
    if constants is not None and math.isfinite(constants.kappa1):
        bound = pn[0] + constants.kappa1 * c
        run_check(
            "multiplier_norm_bound",
            range(1, K + 1),
            lambda i: pn[i] - bound,
            lambda i: opt.multiplier_rtol * (1.0 + bound),
        )

        # Windowed multiplier means stay O(1) once the window is long enough.
        threshold = constants.kappa6 + constants.xi0 * c + constants.xi1 * c**2
        if math.isfinite(threshold) and threshold < K - 1:
            span = int(math.ceil(threshold))
            starts = range(1, K - span, max(1, (K - span) // opt.max_window_pairs))
            pairs = [(j, min(K, j + span)) for j in starts][: opt.max_window_pairs]
            run_check(
                "window_multiplier_mean_bound",
                range(len(pairs)),
                lambda idx: float(
                    np.mean(pn[pairs[idx][0] + 1 : pairs[idx][1] + 1])
                )
                - constants.kappa2,
                lambda idx: opt.multiplier_rtol * (1.0 + constants.kappa2),
            )
        else:
            report.outcomes.append(
                CheckOutcome(
                    name="window_multiplier_mean_bound",
                    passed=True,
                    checked=0,
                    violations=0,
                    worst_margin=math.nan,
                    note=f"no window pair meets the length threshold {threshold:.3g}",
                )
            )

    return report


# ---------------------------------------------------------------------------
# Pointwise certificates and auxiliary inequalities
# ---------------------------------------------------------------------------


def certificate_residual(
    problem: BlockProblem,
    x: BlockVector,
    q: np.ndarray,
    v: Optional[BlockVector] = None,
    tau: float = 1.0,
) -> float:
    """Fixed-point residual of the stationarity inclusion at (x, q, v).

    Verifies v in grad f(x) + A^T q + subdiff h(x) blockwise through the
    proximal map: the inclusion holds iff each block satisfies
    ``x_t = prox_{tau h_t}(x_t - tau (grad_t + A_t^T q - v_t))``. Returns the
    largest block deviation.
    """
    worst = 0.0
    for t in range(problem.num_blocks):
        xt = x.block(t)
        g = problem.grad_block(t, x, xt) + problem.A_ops[t].adjoint(q)
        if v is not None:
            g = g - v.block(t)
        moved = problem.prox_h(t, xt - tau * g, tau)
        worst = max(worst, float(np.linalg.norm(xt - moved)))
    return worst


def damped_update_gap(a: np.ndarray, b: np.ndarray, theta: float, zeta: float) -> float:
    """Signed slack of the dampened-difference inequality

    ||a - (1-theta) b||^2 - zeta ||a||^2
        >= [((1-zeta) - (1-theta)^2)/2] (||a||^2 - ||b||^2),

    valid for zeta <= theta^2. Nonnegative return means the inequality holds.
    """
    lhs = float(np.sum((a - (1.0 - theta) * b) ** 2)) - zeta * float(np.sum(a * a))
    rhs = 0.5 * ((1.0 - zeta) - (1.0 - theta) ** 2) * (
        float(np.sum(a * a)) - float(np.sum(b * b))
    )
    return lhs - rhs


def penalty_start_margins(result: SolveResult, kappa1: float) -> list[float]:
    """Margins of the warm-start bound ||p_start|| <= 2 kappa1 c per cycle;
    nonpositive entries mean the bound holds."""
    return [s.p_start_norm - 2.0 * kappa1 * s.c for s in result.cycles]
