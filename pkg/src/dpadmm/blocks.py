"""Block-partitioned vectors and the structure that indexes them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BlockStructure:
    """Partition of a stacked vector into contiguous blocks.

    ``dims[t]`` is the length of block ``t`` and ``constraint_dim`` is the
    number of rows of the coupling constraint.
    """

    dims: tuple[int, ...]
    constraint_dim: int
    offsets: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 1:
            raise ValueError("need at least one block")
        if any(d < 1 for d in dims):
            raise ValueError(f"block lengths must be positive, got {dims}")
        if int(self.constraint_dim) < 1:
            raise ValueError("constraint_dim must be positive")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "constraint_dim", int(self.constraint_dim))
        acc, offs = 0, []
        for d in dims:
            offs.append(acc)
            acc += d
        object.__setattr__(self, "offsets", tuple(offs))

    @property
    def num_blocks(self) -> int:
        return len(self.dims)

    @property
    def total_dim(self) -> int:
        return sum(self.dims)


class BlockVector:
    """Stacked real vector with per-block views.

    The data is held as one contiguous float array; ``block(t)`` returns a
    writable view, so in-place edits of a block are visible on the whole
    vector. Use ``copy()`` before handing an instance to code that mutates.
    """

    __slots__ = ("structure", "data")

    def __init__(self, structure: BlockStructure, data=None):
        self.structure = structure
        if data is None:
            self.data = np.zeros(structure.total_dim)
        else:
            arr = np.ascontiguousarray(data, dtype=float)
            if arr.shape != (structure.total_dim,):
                raise ValueError(
                    f"expected flat vector of length {structure.total_dim}, "
                    f"got shape {arr.shape}"
                )
            self.data = arr

    @classmethod
    def from_blocks(cls, structure: BlockStructure, blocks) -> "BlockVector":
        blocks = [np.asarray(b, dtype=float).ravel() for b in blocks]
        if len(blocks) != structure.num_blocks:
            raise ValueError(
                f"expected {structure.num_blocks} blocks, got {len(blocks)}"
            )
        for t, (b, d) in enumerate(zip(blocks, structure.dims)):
            if b.shape != (d,):
                raise ValueError(f"block {t} has length {b.size}, expected {d}")
        return cls(structure, np.concatenate(blocks))

    @classmethod
    def zeros(cls, structure: BlockStructure) -> "BlockVector":
        return cls(structure)

    def block(self, t: int) -> np.ndarray:
        off = self.structure.offsets[t]
        return self.data[off : off + self.structure.dims[t]]

    def blocks(self) -> list[np.ndarray]:
        return [self.block(t) for t in range(self.structure.num_blocks)]

    def copy(self) -> "BlockVector":
        return BlockVector(self.structure, self.data.copy())

    def norm(self) -> float:
        """Euclidean norm of the stacked vector."""
        return float(np.linalg.norm(self.data))

    def dagger_norm(self) -> float:
        """Sum of per-block Euclidean norms; dominates ``norm()``."""
        return float(sum(np.linalg.norm(b) for b in self.blocks()))

    def __len__(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"BlockVector(dims={self.structure.dims}, norm={self.norm():.3e})"
