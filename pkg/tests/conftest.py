"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from dpadmm.blocks import BlockStructure, BlockVector
from dpadmm.linops import DenseOperator, ScatterOperator, consensus3_operators
from dpadmm.problem import quadratic_box_problem
from dpadmm.subproblems import BlockSubproblem


def make_consensus_problem(alphas, betas, gamma):
    """Three-block consensus box-QP from explicit data."""
    betas = [np.asarray(b, dtype=float) for b in betas]
    n = betas[0].size
    return quadratic_box_problem(
        alphas=alphas,
        betas=betas,
        gamma=gamma,
        A_ops=consensus3_operators(n),
        d=np.zeros(2 * n),
        consensus3=True,
    )


def zero_data_problem(n=3, gamma=1.0):
    """Consensus instance with f = 0; the origin is a stationary point."""
    return make_consensus_problem(
        (0.0, 0.0, 0.0), [np.zeros(n)] * 3, gamma
    )


def scalar_subproblem(
    *,
    lam=0.5,
    c=1.0,
    alpha=0.0,
    beta=0.0,
    center=0.0,
    gamma=10.0,
    a_scale=1.0,
    dual_shift=0.0,
    base=0.0,
):
    """One-dimensional block subproblem with an identity-like coupling row.

    ``a_scale`` is the single entry of A_t, so the Gram scale is a_scale^2.
    """
    op = ScatterOperator(1, 1, [(0, float(a_scale))])
    beta_arr = np.array([float(beta)])
    shift = np.array([float(dual_shift)])
    base_arr = np.array([float(base)])
    return (
        BlockSubproblem(
            t=0,
            lam=lam,
            quad_coeff=lam * c,
            linear_vec=lam * op.adjoint(shift + c * base_arr),
            center=np.array([float(center)]),
            residual_base=base_arr,
            dual_shift=shift,
            grad_oracle=lambda u: -alpha * u - beta_arr,
            prox_h=lambda u, tau: np.clip(u, -gamma, gamma),
            A_op=op,
            m_t=max(alpha, 0.0),
        ),
        {"alpha": alpha, "beta": beta_arr, "gamma": gamma, "gram": a_scale**2},
    )


def subproblem_objective(sub, alpha, beta, gamma, u):
    """Value of the block subproblem objective (box indicator included)."""
    u = np.asarray(u, dtype=float)
    if np.max(np.abs(u)) > gamma * (1 + 1e-12) + 1e-12:
        return np.inf
    smooth = sub.lam * (-0.5 * alpha * float(u @ u) - float(beta @ u))
    au = sub.A_op.apply(u)
    return (
        smooth
        + float(sub.linear_vec @ u)
        + 0.5 * sub.quad_coeff * float(au @ au)
        + 0.5 * float((u - sub.center) @ (u - sub.center))
    )


def grid_argmin(fun, lo, hi, points=2_000_001):
    """Brute-force scalar minimizer on a uniform grid."""
    grid = np.linspace(lo, hi, points)
    vals = fun(grid)
    return float(grid[np.argmin(vals)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
