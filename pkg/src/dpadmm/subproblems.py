"""Per-block proximal subproblems of the sweep and their solvers.

Each sweep step minimizes, over one block u,

    lam * [ f(.., u, ..) + h_t(u) + <dual_shift, A_t u + base> ]
    + (lam * c / 2) * ||A_t u + base||^2 + 0.5 * ||u - center||^2,

which is strongly convex with modulus at least 1 - lam * m_t >= 1/2 under the
stepsize cap. ``solve_exact_diag`` handles the separable quadratic-over-box
case in closed form; ``solve_inexact`` runs a proximal gradient loop with a
certified subgradient residual for everything else.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linops import BlockOperator


class InnerSolveBudgetError(RuntimeError):
    """Inner solver ran out of iterations; carries the best iterate found."""

    def __init__(self, message, u, residual, iterations):
        super().__init__(message)
        self.u = u
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class InexactCriterion:
    """Stopping rule ||r||^2 <= sigma^2 ||center - u||^2 for the inner loop."""

    sigma: float = 0.1
    max_inner: int = 2000

    def __post_init__(self):
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"sigma must be in (0, 1), got {self.sigma}")
        if self.max_inner < 1:
            raise ValueError("max_inner must be positive")


@dataclass
class BlockSubproblem:
    """One block's proximal subproblem, assembled with the other blocks fixed.

    ``linear_vec`` collects the multiplier and cross-block terms,
    ``lam * A_t^*(dual_shift + c * residual_base)``, and ``quad_coeff``
    equals ``lam * c``. ``grad_oracle`` is the partial gradient of the smooth
    objective at the current sweep state; it is only valid while that state
    is in scope, so subproblems are consumed immediately, never stored.
    """

    t: int
    lam: float
    quad_coeff: float
    linear_vec: np.ndarray
    center: np.ndarray
    residual_base: np.ndarray
    dual_shift: np.ndarray
    grad_oracle: Callable[[np.ndarray], np.ndarray]
    prox_h: Callable[[np.ndarray, float], np.ndarray]
    A_op: BlockOperator
    m_t: float = 0.0


def smooth_grad(sub: BlockSubproblem, u: np.ndarray) -> np.ndarray:
    """Gradient of the subproblem's smooth part at u."""
    return (
        sub.lam * sub.grad_oracle(u)
        + sub.linear_vec
        + sub.quad_coeff * sub.A_op.adjoint(sub.A_op.apply(u))
        + (u - sub.center)
    )


def solve_exact_diag(
    sub: BlockSubproblem,
    alpha_t: float,
    beta_t: np.ndarray,
    box_radius: float,
    gram_scale,
) -> np.ndarray:
    """Closed-form block solve for -alpha/2 ||u||^2 - <beta, u> over a box.

    Requires A_t^T A_t = gram_scale * I; the objective then separates per
    coordinate into a strongly convex scalar quadratic clipped to
    [-box_radius, box_radius].
    """
    if gram_scale is None:
        raise ValueError(
            "block has a non-scalar Gram A_t^T A_t; use solve_inexact instead"
        )
    denom = 1.0 - sub.lam * alpha_t + sub.quad_coeff * gram_scale
    if denom <= 0.0:
        raise ValueError(
            f"subproblem lost strong convexity (denominator {denom}); "
            "check the stepsize against the curvature constants"
        )
    u = (sub.center + sub.lam * beta_t - sub.linear_vec) / denom
    np.clip(u, -box_radius, box_radius, out=u)
    return u


def solve_inexact(sub: BlockSubproblem, crit: InexactCriterion):
    """Proximal gradient on the block subproblem with a certified residual.

    Returns ``(u, r, iterations)`` where r lies in the subdifferential of the
    subproblem objective at u and ||r||^2 <= sigma^2 ||center - u||^2. The
    residual comes from the prox optimality identity
    ``r = (u_prev - u)/tau + grad(u) - grad(u_prev)``, which holds for any
    stepsize tau > 0. The stepsize is adapted from a local Lipschitz estimate
    of the smooth gradient, so no function values are needed.
    """
    u = sub.center.copy()
    grad = smooth_grad(sub, u)
    lip = 1.0 + sub.quad_coeff * sub.A_op.op_norm() ** 2
    sigma_sq = crit.sigma * crit.sigma
    best = (u, grad, np.inf)

    for it in range(crit.max_inner + 1):
        for _ in range(80):
            tau = 1.0 / lip
            u_next = sub.prox_h(u - tau * grad, tau * sub.lam)
            grad_next = smooth_grad(sub, u_next)
            step = u_next - u
            step_norm = float(np.linalg.norm(step))
            if step_norm == 0.0:
                break
            if np.linalg.norm(grad_next - grad) <= lip * step_norm:
                break
            lip *= 2.0
        r = (u - u_next) / tau + grad_next - grad
        r_sq = float(r @ r)
        gap = sub.center - u_next
        if r_sq < best[2]:
            best = (u_next, r, r_sq)
        if r_sq <= sigma_sq * float(gap @ gap):
            return u_next, r, it
        u, grad = u_next, grad_next
        lip = max(lip * 0.9, 1.0)

    u_best, r_best, _ = best
    raise InnerSolveBudgetError(
        f"inner solver exhausted {crit.max_inner} iterations on block {sub.t}",
        u_best,
        r_best,
        crit.max_inner,
    )
