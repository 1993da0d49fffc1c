"""Per-block linear coupling maps with adjoints.

Each operator sends one block into the shared constraint space. Structured
subclasses avoid materializing matrices; ``as_matrix`` exists for small-size
diagnostics (operator norms, image tests).
"""

from __future__ import annotations

import numpy as np

from .blocks import BlockVector


class BlockOperator:
    """Linear map from a single block into the constraint space."""

    def __init__(self, codim: int, dim: int):
        self.codim = int(codim)
        self.dim = int(dim)

    def apply(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gram_scale(self):
        """Scalar g with A^T A = g I, or None when the Gram is not scalar."""
        return None

    def as_matrix(self) -> np.ndarray:
        cols = [self.apply(e) for e in np.eye(self.dim)]
        return np.stack(cols, axis=1)

    def op_norm(self) -> float:
        g = self.gram_scale()
        if g is not None:
            return float(np.sqrt(g))
        return float(np.linalg.norm(self.as_matrix(), 2))


class DenseOperator(BlockOperator):
    """Operator backed by an explicit matrix."""

    def __init__(self, mat):
        mat = np.ascontiguousarray(mat, dtype=float)
        if mat.ndim != 2:
            raise ValueError("dense operator needs a 2-D array")
        super().__init__(mat.shape[0], mat.shape[1])
        self.mat = mat
        self._gram = _scalar_gram(mat)
        self._norm = None

    def apply(self, u):
        return self.mat @ u

    def adjoint(self, w):
        return self.mat.T @ w

    def gram_scale(self):
        return self._gram

    def as_matrix(self):
        return self.mat

    def op_norm(self):
        if self._norm is None:
            self._norm = float(np.linalg.norm(self.mat, 2))
        return self._norm


class ScatterOperator(BlockOperator):
    """Places signed copies of a block at disjoint row offsets.

    Covers consensus-style difference constraints without storing a matrix.
    The disjointness of the row ranges makes the Gram a scalar multiple of
    the identity.
    """

    def __init__(self, codim: int, dim: int, placements):
        super().__init__(codim, dim)
        self.placements = tuple((int(o), float(s)) for o, s in placements)
        spans = sorted(o for o, _ in self.placements)
        for a, b in zip(spans, spans[1:]):
            if b - a < dim:
                raise ValueError("scatter row ranges must not overlap")
        for o, _ in self.placements:
            if o < 0 or o + dim > codim:
                raise ValueError("scatter placement out of range")

    def apply(self, u):
        w = np.zeros(self.codim)
        for off, sign in self.placements:
            w[off : off + self.dim] = sign * u
        return w

    def adjoint(self, w):
        out = np.zeros(self.dim)
        for off, sign in self.placements:
            out += sign * w[off : off + self.dim]
        return out

    def gram_scale(self):
        return float(sum(s * s for _, s in self.placements))


def consensus3_operators(n: int) -> list[BlockOperator]:
    """Three-block consensus coupling: x1 - x3 = 0 and x2 - x3 = 0."""
    return [
        ScatterOperator(2 * n, n, [(0, 1.0)]),
        ScatterOperator(2 * n, n, [(n, 1.0)]),
        ScatterOperator(2 * n, n, [(0, -1.0), (n, -1.0)]),
    ]


def apply_block_map(ops, x: BlockVector) -> np.ndarray:
    """Evaluates the full coupling map, summing per-block contributions."""
    out = np.zeros(ops[0].codim)
    for t, op in enumerate(ops):
        out += op.apply(x.block(t))
    return out


def stack_matrix(ops) -> np.ndarray:
    """Dense matrix of the full map [A_1 ... A_B]; small problems only."""
    return np.hstack([op.as_matrix() for op in ops])


def dagger_norm(ops) -> float:
    """Sum of per-block operator norms."""
    return float(sum(op.op_norm() for op in ops))


def _scalar_gram(mat, rtol=1e-12):
    gram = mat.T @ mat
    dim = mat.shape[1]
    g = float(np.trace(gram)) / dim
    if np.allclose(gram, g * np.eye(dim), rtol=0.0, atol=rtol * max(1.0, abs(g))):
        return g
    return None
