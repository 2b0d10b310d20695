"""Variance-based selection of active spectral blocks.

For every spectral block the per-pixel mean over its bands is taken across
the whole image; the population variance of that mean profile scores how
much the block varies over the scene.  Blocks are then kept either by a
hard threshold on the score or by keeping the n highest-scoring blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import HsiCube, PartitionPlan
from .errors import EmptyMaskError, ShapeError

THRESHOLD = "threshold"
TOP_N = "top_n"


@dataclass(frozen=True)
class BlockMask:
    """Per-block activity flags with the variances that produced them."""

    variances: np.ndarray        # length B, >= 0
    flags: np.ndarray            # length B, 0/1
    mode: str                    # THRESHOLD or TOP_N
    threshold: Optional[float] = None
    top_n: Optional[int] = None

    def __post_init__(self):
        if self.variances.shape != self.flags.shape:
            raise ShapeError("variances and flags must have the same length")

    @property
    def block_count(self) -> int:
        return int(self.flags.size)

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.flags))

    def active_blocks(self) -> np.ndarray:
        return np.flatnonzero(self.flags)


def compute_block_variances(cube: HsiCube, plan: PartitionPlan) -> np.ndarray:
    """Population variance of each block's per-pixel mean profile (length B)."""
    if plan.width != cube.width or plan.height != cube.height:
        raise ShapeError("plan geometry does not match cube")
    if plan.used_bands > cube.bands:
        raise ShapeError("plan uses more bands than the cube has")
    out = np.empty(plan.block_count)
    for j, (lo, hi) in enumerate(plan.block_ranges):
        m_j = cube.data[lo:hi].mean(axis=0)      # mean over the block's bands
        out[j] = float(np.var(m_j))              # population variance over pixels
    return out


def build_mask(
    variances: np.ndarray,
    mode: str = THRESHOLD,
    threshold: Optional[float] = None,
    top_n: Optional[int] = None,
) -> BlockMask:
    """Turn per-block variances into activity flags.

    threshold mode keeps blocks with variance strictly above the threshold
    (inactive at exact equality); top_n keeps the n largest variances with
    ties broken toward the lower block index.
    """
    variances = np.asarray(variances, dtype=float)
    B = variances.size
    if mode == THRESHOLD:
        if threshold is None:
            raise ValueError("threshold mode requires a threshold")
        flags = (variances > threshold).astype(np.int8)
        if not flags.any():
            raise EmptyMaskError(
                f"threshold {threshold} leaves no active blocks "
                f"(max variance {variances.max(initial=0.0)})"
            )
        return BlockMask(variances=variances, flags=flags, mode=mode, threshold=threshold)
    if mode == TOP_N:
        if top_n is None:
            raise ValueError("top_n mode requires a count")
        if top_n == 0:
            raise EmptyMaskError("top_n must be >= 1")
        if top_n > B:
            raise ValueError(f"top_n {top_n} exceeds block count {B}")
        # stable sort on descending variance keeps the lower index on ties
        order = np.argsort(-variances, kind="stable")
        flags = np.zeros(B, dtype=np.int8)
        flags[order[:top_n]] = 1
        return BlockMask(variances=variances, flags=flags, mode=mode, top_n=int(top_n))
    raise ValueError(f"unknown mask mode {mode!r}")


def all_active_mask(B: int) -> BlockMask:
    """Mask keeping every block; used when selection is disabled."""
    return BlockMask(
        variances=np.zeros(B),
        flags=np.ones(B, dtype=np.int8),
        mode=TOP_N,
        top_n=B,
    )
