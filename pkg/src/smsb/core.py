"""Core data types: hyperspectral cubes and their spatial/spectral partition.

A cube is stored as a dense ``S x N`` matrix (``S`` bands, ``N`` pixels,
columns in row-major pixel scan order).  A partition plan tiles the image
into non-overlapping ``m x m`` spatial groups and splits the spectrum into
``B`` equal contiguous blocks of ``s`` bands each; trailing bands that do
not fit are trimmed, never reordered.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidPartitionError, NumericInputError, ResourceLimitError, ShapeError


@dataclass(frozen=True)
class HsiCube:
    """Image-shaped hyperspectral cube viewed as an S x N band/pixel matrix."""

    width: int
    height: int
    bands: int
    data: np.ndarray          # S x N, column j = pixel (j // width, j % width)
    band_trim: int = 0        # trailing raw bands removed before this view

    def __post_init__(self):
        n = self.width * self.height
        if self.data.ndim != 2 or self.data.shape != (self.bands, n):
            raise ShapeError(
                f"cube data must be {self.bands}x{n}, got {self.data.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise NumericInputError("cube contains non-finite entries")
        if self.band_trim < 0:
            raise ShapeError("band_trim must be >= 0")

    @property
    def n_pixels(self) -> int:
        return self.width * self.height

    def pixel_index(self, row: int, col: int) -> int:
        return row * self.width + col


@dataclass(frozen=True)
class PartitionPlan:
    """Spatial-group tiling and spectral-block layout for one cube geometry."""

    width: int
    height: int
    group_size: int                      # m
    groups: tuple                        # per-group pixel-index arrays
    block_count: int                     # B
    block_size: int                      # s
    block_ranges: tuple                  # B (start, stop) band intervals
    trimmed_bands: int = 0               # trailing bands excluded by this plan

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def used_bands(self) -> int:
        return self.block_count * self.block_size


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel class ids; 0 is unlabeled background, 1..C are classes."""

    labels: np.ndarray                   # length N, integer
    class_names: Optional[Sequence[str]] = None
    class_colors: Optional[np.ndarray] = None  # C x 3 uint8

    def __post_init__(self):
        if self.labels.ndim != 1:
            raise ShapeError("labels must be one-dimensional")
        if np.any(self.labels < 0):
            raise ShapeError("labels must be >= 0")

    @property
    def n_classes(self) -> int:
        return int(self.labels.max(initial=0))

    def labeled_indices(self) -> np.ndarray:
        return np.flatnonzero(self.labels > 0)


def plan_partition(cube: HsiCube, m: int, B: int) -> PartitionPlan:
    """Tile the image into m x m spatial groups and the spectrum into B blocks.

    Blocks have ``s = floor(S / B)`` bands each; the trailing ``S mod B``
    bands are marked trimmed.  Interior groups hold exactly m*m pixels;
    right/bottom border groups may be smaller.
    """
    if m < 1 or B < 1:
        raise InvalidPartitionError("m and B must be >= 1")
    if B > cube.bands:
        raise InvalidPartitionError(f"B={B} exceeds band count {cube.bands}")
    if m > max(cube.width, cube.height):
        raise InvalidPartitionError(
            f"group size {m} exceeds image extent "
            f"{cube.width}x{cube.height}"
        )

    s = cube.bands // B
    trimmed = cube.bands - B * s
    block_ranges = tuple((j * s, (j + 1) * s) for j in range(B))

    groups = []
    for top in range(0, cube.height, m):
        for left in range(0, cube.width, m):
            rows = np.arange(top, min(top + m, cube.height))
            cols = np.arange(left, min(left + m, cube.width))
            idx = (rows[:, None] * cube.width + cols[None, :]).ravel()
            groups.append(idx)

    return PartitionPlan(
        width=cube.width,
        height=cube.height,
        group_size=m,
        groups=tuple(groups),
        block_count=B,
        block_size=s,
        block_ranges=block_ranges,
        trimmed_bands=trimmed,
    )


def apply_band_trim(cube: HsiCube, plan: PartitionPlan) -> HsiCube:
    """Return the cube restricted to the bands the plan actually uses."""
    if plan.trimmed_bands == 0:
        return cube
    used = plan.used_bands
    return HsiCube(
        width=cube.width,
        height=cube.height,
        bands=used,
        data=cube.data[:used],
        band_trim=cube.band_trim + plan.trimmed_bands,
    )


def extract_group_block(cube: HsiCube, plan: PartitionPlan, i: int, j: int) -> np.ndarray:
    """Return the s x |group i| submatrix for spatial group i, spectral block j."""
    if not 0 <= i < plan.n_groups:
        raise IndexError(f"group index {i} out of range 0..{plan.n_groups - 1}")
    if not 0 <= j < plan.block_count:
        raise IndexError(f"block index {j} out of range 0..{plan.block_count - 1}")
    lo, hi = plan.block_ranges[j]
    return cube.data[lo:hi][:, plan.groups[i]]


def extract_group(cube: HsiCube, plan: PartitionPlan, i: int) -> np.ndarray:
    """Return the (B*s) x |group i| submatrix over all retained bands."""
    if not 0 <= i < plan.n_groups:
        raise IndexError(f"group index {i} out of range 0..{plan.n_groups - 1}")
    return cube.data[: plan.used_bands][:, plan.groups[i]]


def build_stacked_observations(
    cube: HsiCube, plan: PartitionPlan, max_bytes: int = 2 << 30
) -> np.ndarray:
    """Materialize the s x (B*N) observation matrix used for dictionary training.

    Columns are ordered group-major, block-minor: all blocks of group 1,
    then all blocks of group 2, and so on.  Raises ResourceLimitError when
    the result would exceed ``max_bytes``; stream the columns with
    :func:`stream_observation_chunks` instead.
    """
    n_cols = plan.block_count * cube.n_pixels
    needed = plan.block_size * n_cols * cube.data.itemsize
    if needed > max_bytes:
        raise ResourceLimitError(
            f"stacked observations need {needed} bytes (cap {max_bytes}); "
            "use stream_observation_chunks"
        )
    out = np.empty((plan.block_size, n_cols), dtype=cube.data.dtype)
    pos = 0
    for chunk in stream_observation_chunks(cube, plan):
        out[:, pos : pos + chunk.shape[1]] = chunk
        pos += chunk.shape[1]
    assert pos == n_cols
    return out


def stream_observation_chunks(cube: HsiCube, plan: PartitionPlan):
    """Yield the stacked-observation columns as per-(group, block) chunks.

    Chunk order matches build_stacked_observations exactly.
    """
    for i in range(plan.n_groups):
        for j in range(plan.block_count):
            yield extract_group_block(cube, plan, i, j)
