"""MAT-file to cube/label conversion with manifest output."""

from __future__ import annotations

import hashlib
import json
import os
from typing import Dict, Optional

import numpy as np
from scipy.io import loadmat

from .recipes import DatasetRecipe, RECIPES
from .writer import write_cube, write_labels


class ConvertError(Exception):
    pass


def get_recipe(dataset: str) -> DatasetRecipe:
    try:
        return RECIPES[dataset]
    except KeyError:
        raise ConvertError(
            f"unknown dataset {dataset!r}; choose from {sorted(RECIPES)}"
        ) from None


def _find_variable(mat: Dict, candidates, what: str) -> np.ndarray:
    for name in candidates:
        if name in mat:
            return np.asarray(mat[name])
    # fall back to the single non-metadata array in the file
    arrays = {k: v for k, v in mat.items() if not k.startswith("__")}
    if len(arrays) == 1:
        return np.asarray(next(iter(arrays.values())))
    raise ConvertError(
        f"missing {what} variable: tried {list(candidates)}, "
        f"file holds {sorted(arrays)}"
    )


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_cube(input_path, recipe: DatasetRecipe) -> np.ndarray:
    """Load, validate and band-correct the scene; returns bands x pixels."""
    raw = _find_variable(loadmat(input_path), recipe.cube_vars, "cube")
    expected = (recipe.height, recipe.width, recipe.raw_bands)
    if raw.shape != expected:
        raise ConvertError(
            f"{recipe.dataset}: cube shape {raw.shape} does not match "
            f"expected {expected}"
        )
    kept = raw[:, :, recipe.kept_bands]
    # rows x cols x bands -> bands x (row-major pixels)
    data = kept.transpose(2, 0, 1).reshape(recipe.out_bands, -1)
    return data.astype(np.float32)


def load_labels(gt_path, recipe: DatasetRecipe) -> np.ndarray:
    raw = _find_variable(loadmat(gt_path), recipe.gt_vars, "ground truth")
    expected = (recipe.height, recipe.width)
    if raw.shape != expected:
        raise ConvertError(
            f"{recipe.dataset}: ground truth shape {raw.shape} does not "
            f"match expected {expected}"
        )
    labels = raw.astype(np.int64).ravel()
    if labels.min() < 0 or labels.max() > recipe.class_count:
        raise ConvertError(
            f"{recipe.dataset}: labels span {labels.min()}..{labels.max()}, "
            f"expected 0..{recipe.class_count}"
        )
    return labels


def convert(
    dataset: str,
    input_path,
    out_dir,
    gt_path: Optional[str] = None,
) -> Dict:
    """Convert one scene; returns the manifest written alongside the files."""
    recipe = get_recipe(dataset)
    os.makedirs(out_dir, exist_ok=True)

    data = load_cube(input_path, recipe)
    cube_path = os.path.join(out_dir, f"{dataset}-cube.smsb")
    write_cube(
        data,
        width=recipe.width,
        height=recipe.height,
        band_trim=len(recipe.drop_bands_1based),
        path=cube_path,
    )
    outputs = {
        "cube": {
            "path": cube_path,
            "bands": recipe.out_bands,
            "size": os.path.getsize(cube_path),
            "sha256": _sha256(cube_path),
        }
    }

    if gt_path is not None:
        labels = load_labels(gt_path, recipe)
        labels_path = os.path.join(out_dir, f"{dataset}-labels.smsb")
        write_labels(
            labels, recipe.width, recipe.height, recipe.colors, labels_path
        )
        outputs["labels"] = {
            "path": labels_path,
            "classes": int(labels.max(initial=0)),
            "size": os.path.getsize(labels_path),
            "sha256": _sha256(labels_path),
        }

    manifest = {
        "dataset": dataset,
        "dropped_bands_1based": list(recipe.drop_bands_1based),
        "outputs": outputs,
    }
    manifest_path = os.path.join(out_dir, f"{dataset}-manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest
