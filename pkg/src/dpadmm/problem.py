"""Problem containers, solver parameters, and the dampened augmented Lagrangian.

A :class:`BlockProblem` bundles the oracles the solver consumes: per-block
partial gradients, proximal maps, the coupling operators, and curvature
constants. Objective-value oracles are optional; the iteration itself never
needs them, only the runtime diagnostics do.
"""

from __future__ import annotations

import enum
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .blocks import BlockStructure, BlockVector
from .linops import (
    BlockOperator,
    DenseOperator,
    apply_block_map,
    consensus3_operators,
    dagger_norm,
    stack_matrix,
)
from .subproblems import BlockSubproblem, InexactCriterion, solve_exact_diag

# Dense coupling matrices above this entry count skip the image-membership
# and singular-value diagnostics instead of materializing.
_DENSE_CHECK_LIMIT = 4_000_000

_IMAGE_RTOL = 1e-10


class MissingOracleError(RuntimeError):
    """A value oracle needed by this operation was not supplied."""


class ProblemFormatError(ValueError):
    """Malformed problem description; the message names the offending field."""


class WindowMode(enum.Enum):
    """Averaging window of the unsuccessful-termination test."""

    HALF_WINDOW = "half"
    FULL_AVERAGE = "full"


class ParamConditionWarning(UserWarning):
    """Soft violation of the dampening/under-relaxation coupling condition."""


@dataclass(frozen=True)
class SolverParams:
    """Algorithm parameters shared by the static cycle and the dynamic run."""

    lam: float = 0.5
    theta: float = 1.0
    chi: float = 1.0
    c1: float = 1.0
    rho: float = 1e-9
    eta: float = 1e-9
    max_cycle_iters: int = 100_000
    max_outer_cycles: int = 60
    window_mode: WindowMode = WindowMode.HALF_WINDOW
    strict_params: bool = True


def coupling_condition_lhs(theta: float, chi: float, num_blocks: int) -> float:
    """Left side of 2 * chi * B * (2 - theta) * (1 - theta) <= theta^2."""
    return 2.0 * chi * num_blocks * (2.0 - theta) * (1.0 - theta)


def validate_params(
    params: SolverParams, num_blocks: int, m: Optional[float] = None
) -> list[str]:
    """Checks parameter ranges; returns hard violations as messages.

    The dampening condition ``2 chi B (2-theta)(1-theta) <= theta^2`` is a
    hard violation only under ``strict_params``; otherwise it is emitted as a
    :class:`ParamConditionWarning`, since running outside the guaranteed
    region is a deliberate (and sometimes faster) choice.
    """
    errors = []
    if params.lam <= 0.0:
        errors.append(f"lam must be positive, got {params.lam}")
    elif m is not None and m > 0.0 and params.lam > (1.0 + 1e-12) / (2.0 * m):
        errors.append(
            f"lam={params.lam} exceeds the stepsize cap 1/(2m)={1.0 / (2.0 * m)}"
        )
    if not 0.0 <= params.theta <= 1.0:
        errors.append(f"theta must be in [0, 1], got {params.theta}")
    if not 0.0 < params.chi <= 1.0:
        errors.append(f"chi must be in (0, 1], got {params.chi}")
    for name in ("c1", "rho", "eta"):
        val = getattr(params, name)
        if val <= 0.0:
            errors.append(f"{name} must be positive, got {val}")
    if params.max_cycle_iters < 1 or params.max_outer_cycles < 1:
        errors.append("iteration budgets must be positive")

    if 0.0 <= params.theta <= 1.0 and 0.0 < params.chi <= 1.0:
        lhs = coupling_condition_lhs(params.theta, params.chi, num_blocks)
        rhs = params.theta**2
        if lhs > rhs * (1.0 + 1e-9) + 1e-12:
            msg = (
                f"(theta, chi)=({params.theta}, {params.chi}) violates the "
                f"coupling condition: 2*chi*B*(2-theta)*(1-theta)={lhs:.6g} "
                f"> theta^2={rhs:.6g}"
            )
            if params.strict_params:
                errors.append(msg)
            else:
                warnings.warn(msg, ParamConditionWarning, stacklevel=2)
    return errors


@dataclass(frozen=True)
class SlaterData:
    """Scalars describing a strictly interior feasible point and its geometry.

    ``d_dagger`` is the distance of ``z_dagger`` to the boundary of dom h,
    ``D_dagger`` the domain radius seen from it, ``G_f`` a gradient bound,
    ``K_h`` the Lipschitz constant of h on its domain, and ``phi_lo``/
    ``phi_hi`` objective extrema over dom h. The three norms describe the
    coupling map: spectral norm, smallest positive singular value, and the
    sum of per-block norms.
    """

    z_dagger: BlockVector
    d_dagger: float
    D_dagger: float
    G_f: float
    K_h: float
    phi_lo: float
    phi_hi: float
    norm_A: float
    sigma_A_plus: float
    norm_A_dagger: float


@dataclass(frozen=True)
class Consensus3Data:
    """Closed-form description of a three-block consensus quadratic-over-box
    instance, enabling the compiled fast path."""

    n: int
    gamma: float
    alphas: tuple[float, float, float]
    betas: tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass
class BlockProblem:
    """Oracle bundle for one block-structured problem.

    ``grad_block(t, x, u)`` returns the partial gradient of the smooth term
    with respect to block ``t``, evaluated at ``x`` with block ``t`` replaced
    by ``u``. ``prox_h(t, u, tau)`` applies the proximal map of ``tau * h_t``.
    ``prox_block``, when present, solves a whole block subproblem exactly;
    otherwise the inexact inner solver is used. All oracles must be safe for
    concurrent read-only use.
    """

    structure: BlockStructure
    grad_block: Callable[[int, BlockVector, np.ndarray], np.ndarray]
    A_ops: list[BlockOperator]
    d: np.ndarray
    m: tuple[float, ...]
    M: tuple[float, ...]
    prox_h: Callable[[int, np.ndarray, float], np.ndarray]
    phi_smooth: Optional[Callable[[BlockVector], float]] = None
    h_value: Optional[Callable[[int, np.ndarray], float]] = None
    prox_block: Optional[Callable[[int, BlockSubproblem], np.ndarray]] = None
    inexact: InexactCriterion = field(default_factory=InexactCriterion)
    slater: Optional[SlaterData] = None
    consensus3: Optional[Consensus3Data] = None

    def __post_init__(self):
        B = self.structure.num_blocks
        ell = self.structure.constraint_dim
        if len(self.A_ops) != B:
            raise ValueError(f"expected {B} block operators, got {len(self.A_ops)}")
        for t, op in enumerate(self.A_ops):
            if op.dim != self.structure.dims[t] or op.codim != ell:
                raise ValueError(
                    f"operator {t} has shape ({op.codim}, {op.dim}), expected "
                    f"({ell}, {self.structure.dims[t]})"
                )
        self.d = np.ascontiguousarray(self.d, dtype=float)
        if self.d.shape != (ell,):
            raise ValueError(f"d must have length {ell}, got shape {self.d.shape}")
        self.m = tuple(float(v) for v in self.m)
        self.M = tuple(float(v) for v in self.M)
        if len(self.m) != B or any(v < 0 for v in self.m):
            raise ValueError("m must list one nonnegative constant per block")
        if len(self.M) != max(B - 1, 0) or any(v < 0 for v in self.M):
            raise ValueError("M must list B-1 nonnegative constants")
        _check_rhs_in_image(self.A_ops, self.d)

    @property
    def num_blocks(self) -> int:
        return self.structure.num_blocks

    @property
    def separable(self) -> bool:
        return all(v == 0.0 for v in self.M)

    def weak_convexity_bound(self) -> float:
        return max(self.m)


def constraint_residual(problem: BlockProblem, x: BlockVector) -> np.ndarray:
    """Residual of the coupling constraint, sum_t A_t x_t - d."""
    if x.structure.total_dim != problem.structure.total_dim:
        raise ValueError("block vector does not match the problem structure")
    return apply_block_map(problem.A_ops, x) - problem.d


def phi_value(problem: BlockProblem, x: BlockVector) -> float:
    """Composite objective f(x) + sum_t h_t(x_t); needs both value oracles."""
    if problem.phi_smooth is None or problem.h_value is None:
        raise MissingOracleError(
            "phi_smooth and h_value oracles are required for objective values"
        )
    val = float(problem.phi_smooth(x))
    for t in range(problem.num_blocks):
        val += float(problem.h_value(t, x.block(t)))
    return val


def eval_dal(
    problem: BlockProblem, x: BlockVector, p: np.ndarray, c: float, theta: float
) -> float:
    """Dampened augmented Lagrangian
    phi(x) + (1 - theta) <p, Ax - d> + (c/2) ||Ax - d||^2."""
    f_res = constraint_residual(problem, x)
    return (
        phi_value(problem, x)
        + (1.0 - theta) * float(p @ f_res)
        + 0.5 * c * float(f_res @ f_res)
    )


def _check_rhs_in_image(ops, d):
    """Least-squares gate for d in Im(A); skipped when assembling is too big."""
    if not np.any(d):
        return
    total = sum(op.dim for op in ops)
    if d.size * total > _DENSE_CHECK_LIMIT:
        return
    mat = stack_matrix(ops)
    sol, *_ = np.linalg.lstsq(mat, d, rcond=None)
    resid = np.linalg.norm(mat @ sol - d)
    if resid > _IMAGE_RTOL * (1.0 + np.linalg.norm(d)):
        raise ValueError(
            f"d is not in the image of the coupling map "
            f"(least-squares residual {resid:.3e})"
        )


# ---------------------------------------------------------------------------
# Quadratic-over-box family
# ---------------------------------------------------------------------------


def quadratic_box_problem(
    alphas,
    betas,
    gamma: float,
    A_ops: list[BlockOperator],
    d: np.ndarray,
    consensus3: bool = False,
) -> BlockProblem:
    """Problem with blockwise f_t(u) = -(alpha_t/2)||u||^2 - <beta_t, u> and
    h_t the indicator of the box [-gamma, gamma]^{n_t}.

    When every coupling block has a scalar Gram, the block subproblems are
    solved in closed form; otherwise the inexact inner solver takes over.
    """
    alphas = tuple(float(a) for a in alphas)
    betas = tuple(np.ascontiguousarray(b, dtype=float) for b in betas)
    gamma = float(gamma)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    B = len(alphas)
    if len(betas) != B or len(A_ops) != B:
        raise ValueError("alphas, betas, and A_ops must have one entry per block")
    dims = tuple(b.size for b in betas)
    structure = BlockStructure(dims, A_ops[0].codim)

    def grad_block(t, x, u):
        return -alphas[t] * u - betas[t]

    def phi_smooth(x):
        total = 0.0
        for t in range(B):
            xt = x.block(t)
            total -= 0.5 * alphas[t] * float(xt @ xt) + float(betas[t] @ xt)
        return total

    def h_value(t, u):
        bound = gamma * (1.0 + 1e-9) + 1e-12
        return 0.0 if float(np.max(np.abs(u), initial=0.0)) <= bound else np.inf

    def prox_h(t, u, tau):
        return np.clip(u, -gamma, gamma)

    grams = [op.gram_scale() for op in A_ops]
    prox_block = None
    if all(g is not None for g in grams):

        def prox_block(t, sub):
            return solve_exact_diag(sub, alphas[t], betas[t], gamma, grams[t])

    payload = None
    if consensus3:
        if B != 3 or len(set(dims)) != 1:
            raise ValueError("consensus coupling needs three blocks of equal size")
        payload = Consensus3Data(dims[0], gamma, alphas, betas)
    slater = _quad_box_slater(alphas, betas, gamma, A_ops, d, structure, consensus3)

    return BlockProblem(
        structure=structure,
        grad_block=grad_block,
        A_ops=list(A_ops),
        d=d,
        m=tuple(max(a, 0.0) for a in alphas),
        M=(0.0,) * (B - 1),
        prox_h=prox_h,
        phi_smooth=phi_smooth,
        h_value=h_value,
        prox_block=prox_block,
        slater=slater,
        consensus3=payload,
    )


def _quad_box_slater(alphas, betas, gamma, A_ops, d, structure, consensus3):
    """Analytic interior-point data for the quadratic-over-box family.

    Only available when the origin is feasible (d = 0): the origin then sits
    at distance gamma from the box boundary. Objective extrema are separable
    per coordinate, so they are exact, not sampled.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d):
        return None
    ell = A_ops[0].codim
    total = structure.total_dim
    if consensus3:
        # Gram of the difference coupling has eigenvalues 3 and 1.
        norm_A, sigma_plus = float(np.sqrt(3.0)), 1.0
    elif ell * total <= _DENSE_CHECK_LIMIT:
        svals = np.linalg.svd(stack_matrix(A_ops), compute_uv=False)
        norm_A = float(svals[0])
        positive = svals[svals > 1e-12 * max(1.0, svals[0])]
        sigma_plus = float(positive[-1]) if positive.size else 0.0
    else:
        return None

    phi_lo, phi_hi, grad_sq = 0.0, 0.0, 0.0
    for a, beta in zip(alphas, betas):
        lo, hi = _concave_coord_extrema(a, beta, gamma)
        phi_lo += lo
        phi_hi += hi
        grad_sq += float(np.sum((a * gamma + np.abs(beta)) ** 2))

    return SlaterData(
        z_dagger=BlockVector.zeros(structure),
        d_dagger=gamma,
        D_dagger=gamma * np.sqrt(total),
        G_f=float(np.sqrt(grad_sq)),
        K_h=0.0,
        phi_lo=phi_lo,
        phi_hi=phi_hi,
        norm_A=float(norm_A),
        sigma_A_plus=float(sigma_plus),
        norm_A_dagger=dagger_norm(A_ops),
    )


def _concave_coord_extrema(alpha, beta, gamma):
    """Exact extrema of sum_j -(alpha/2) x_j^2 - beta_j x_j over the box."""
    beta = np.abs(np.asarray(beta, dtype=float))
    lo = float(np.sum(-0.5 * alpha * gamma**2 - beta * gamma))
    if alpha > 0.0:
        crit = beta / alpha
        inner = beta**2 / (2.0 * alpha)
        edge = -0.5 * alpha * gamma**2 + beta * gamma
        hi = float(np.sum(np.where(crit <= gamma, inner, edge)))
    else:
        hi = float(np.sum(beta * gamma))
    return lo, hi


# ---------------------------------------------------------------------------
# JSON problem files
# ---------------------------------------------------------------------------


def load_problem(source) -> BlockProblem:
    """Loads a quadratic-over-box problem from a JSON file or parsed dict.

    Schema: ``{"n": int, "B": int, "alpha": [B floats],
    "beta": [B rows of n floats], "gamma": float,
    "A": "consensus3" | [rows of B*n floats], "d": [floats]}``.
    ``d`` may be omitted for the consensus coupling (it is zero).
    """
    if isinstance(source, (str, Path)):
        try:
            with open(source, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
        except OSError as exc:
            raise ProblemFormatError(f"cannot read problem file {source}: {exc}")
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"invalid JSON in {source}: {exc}")
    else:
        payload = source
    if not isinstance(payload, dict):
        raise ProblemFormatError("problem document must be a JSON object")

    def need(name, kind):
        if name not in payload:
            raise ProblemFormatError(f"missing field '{name}'")
        try:
            return kind(payload[name])
        except (TypeError, ValueError) as exc:
            raise ProblemFormatError(f"field '{name}' is malformed: {exc}")

    n = need("n", int)
    B = need("B", int)
    gamma = need("gamma", float)
    if n < 1 or B < 1:
        raise ProblemFormatError("fields 'n' and 'B' must be positive")
    alpha = need("alpha", lambda v: [float(a) for a in v])
    if len(alpha) != B:
        raise ProblemFormatError(f"field 'alpha' must list {B} values")
    beta_rows = payload.get("beta")
    if not isinstance(beta_rows, list) or len(beta_rows) != B:
        raise ProblemFormatError(f"field 'beta' must list {B} rows")
    betas = []
    for t, row in enumerate(beta_rows):
        arr = np.asarray(row, dtype=float)
        if arr.shape != (n,):
            raise ProblemFormatError(f"field 'beta'[{t}] must have length {n}")
        betas.append(arr)

    A_field = payload.get("A")
    if A_field == "consensus3":
        if B != 3:
            raise ProblemFormatError("field 'A': consensus3 coupling needs B=3")
        ops = consensus3_operators(n)
        d = np.zeros(2 * n)
        if "d" in payload and np.any(np.asarray(payload["d"], dtype=float)):
            raise ProblemFormatError("field 'd' must be zero for consensus3")
        consensus = True
    elif isinstance(A_field, list):
        mat = np.asarray(A_field, dtype=float)
        if mat.ndim != 2 or mat.shape[1] != B * n:
            raise ProblemFormatError(
                f"field 'A' must be a dense matrix with {B * n} columns"
            )
        ops = [DenseOperator(mat[:, t * n : (t + 1) * n]) for t in range(B)]
        d = np.asarray(need("d", lambda v: [float(x) for x in v]), dtype=float)
        if d.shape != (mat.shape[0],):
            raise ProblemFormatError(f"field 'd' must have length {mat.shape[0]}")
        consensus = False
    else:
        raise ProblemFormatError("field 'A' must be 'consensus3' or a dense matrix")

    try:
        return quadratic_box_problem(alpha, betas, gamma, ops, d, consensus3=consensus)
    except ValueError as exc:
        raise ProblemFormatError(str(exc))
