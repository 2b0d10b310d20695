"""Per-dataset conversion recipes.

Each recipe pins the expected raw dimensions, the 1-based water-absorption
bands to drop, the MAT variable names to look for and the class-color
table to embed in the produced label file.  Band lists are kept 1-based as
printed in the literature and converted to 0-based indices in one place to
avoid off-by-one drops.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np


def _span(lo: int, hi: int) -> Tuple[int, ...]:
    """Inclusive 1-based band range."""
    return tuple(range(lo, hi + 1))


# shared 16-entry palette (fractions scaled to 8-bit); the first 9 rows
# are the Pavia palette
CLASS_COLORS = np.array(
    [
        [254, 253, 136],
        [3, 28, 240],
        [254, 89, 1],
        [5, 254, 132],
        [254, 2, 250],
        [89, 1, 254],
        [3, 170, 254],
        [12, 254, 7],
        [171, 174, 84],
        [159, 78, 157],
        [101, 173, 255],
        [60, 91, 112],
        [104, 191, 63],
        [138, 69, 46],
        [119, 254, 171],
        [253, 254, 3],
    ],
    dtype=np.uint8,
)


@dataclass(frozen=True)
class DatasetRecipe:
    dataset: str
    height: int                     # raw rows
    width: int                      # raw columns
    raw_bands: int
    drop_bands_1based: Tuple[int, ...]
    cube_vars: Tuple[str, ...]      # candidate MAT variable names
    gt_vars: Tuple[str, ...]
    class_count: int

    @property
    def kept_bands(self) -> np.ndarray:
        """0-based indices of the bands that survive the drop list."""
        drop = {b - 1 for b in self.drop_bands_1based}
        return np.array([b for b in range(self.raw_bands) if b not in drop])

    @property
    def out_bands(self) -> int:
        return self.raw_bands - len(self.drop_bands_1based)

    @property
    def colors(self) -> np.ndarray:
        return CLASS_COLORS[: self.class_count]


RECIPES = {
    "indian-pines": DatasetRecipe(
        dataset="indian-pines",
        height=145,
        width=145,
        raw_bands=220,
        drop_bands_1based=_span(104, 108) + _span(150, 163) + (220,),
        cube_vars=("indian_pines", "indian_pines_corrected"),
        gt_vars=("indian_pines_gt",),
        class_count=16,
    ),
    "pavia-university": DatasetRecipe(
        dataset="pavia-university",
        height=610,
        width=340,
        raw_bands=103,
        drop_bands_1based=(),       # the distributed file is already corrected
        cube_vars=("paviaU", "pavia_university"),
        gt_vars=("paviaU_gt", "pavia_university_gt"),
        class_count=9,
    ),
    "salinas": DatasetRecipe(
        dataset="salinas",
        height=512,
        width=217,
        raw_bands=224,
        drop_bands_1based=_span(108, 112) + _span(154, 167) + (224,),
        cube_vars=("salinas", "salinas_corrected"),
        gt_vars=("salinas_gt",),
        class_count=16,
    ),
}
