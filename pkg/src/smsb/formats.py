"""On-disk formats: cubes, label maps, models, reports and PPM maps.

Every binary file starts with a small ASCII header (one ``key value`` pair
per line, closed by an ``END`` line) followed by a little-endian payload
whose exact byte size is implied by the header.  Readers verify magic,
version and payload size before touching the data and reject non-finite
values, so any successful read/write round-trip is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import replace
from typing import Dict, Optional, Tuple

import numpy as np

from . import blocks as blk
from .core import HsiCube, LabelMap, PartitionPlan, plan_partition
from .dictlearn import SubDictionary
from .errors import ConfigError, FormatError
from .pipeline import FORMAT_VERSION, SmsbModel
from .solver import L21, SolverConfig

CUBE_MAGIC = "SMSB-CUBE"
LABEL_MAGIC = "SMSB-LABELS"
MODEL_MAGIC = "SMSB-MODEL"
FEATS_MAGIC = "SMSB-FEATS"

# benchmark class colors (fractions as printed in the reference tables,
# scaled to 8-bit); the first 9 entries are the Pavia palette
_COLOR_FRACTIONS = (
    (0.9961, 0.9922, 0.5352),
    (0.0117, 0.1094, 0.9414),
    (0.9961, 0.3477, 0.0039),
    (0.0195, 0.9961, 0.5195),
    (0.9961, 0.0078, 0.9805),
    (0.3477, 0.0039, 0.9961),
    (0.0117, 0.6680, 0.9961),
    (0.0469, 0.9961, 0.0273),
    (0.6719, 0.6836, 0.3281),
    (0.6250, 0.3047, 0.6172),
    (0.3979, 0.6778, 1.0000),
    (0.2344, 0.3555, 0.4375),
    (0.4063, 0.7500, 0.2461),
    (0.5430, 0.2695, 0.1797),
    (0.4649, 0.9961, 0.6719),
    (0.9922, 0.9961, 0.0117),
)

CLASS_COLORS = np.array(
    [[int(round(c * 255)) for c in rgb] for rgb in _COLOR_FRACTIONS], dtype=np.uint8
)


def _write_header(fh, magic: str, fields) -> None:
    lines = [f"{magic} 1"]
    for key, value in fields:
        lines.append(f"{key} {value}")
    lines.append("END")
    fh.write(("\n".join(lines) + "\n").encode("ascii"))


def _read_header(fh, magic: str):
    first = fh.readline().decode("ascii", errors="replace").rstrip("\n")
    parts = first.split()
    if len(parts) != 2 or parts[0] != magic:
        raise FormatError(f"bad magic: expected {magic!r}, got {first!r}")
    if parts[1] != "1":
        raise FormatError(f"unsupported {magic} version {parts[1]!r}")
    fields = []
    while True:
        line = fh.readline()
        if not line:
            raise FormatError("header not terminated by END")
        line = line.decode("ascii", errors="replace").rstrip("\n")
        if line == "END":
            break
        key, _, value = line.partition(" ")
        fields.append((key, value))
    return fields


def _field_map(fields) -> Dict[str, str]:
    return dict(fields)


def _read_payload(fh, nbytes: int, what: str) -> bytes:
    data = fh.read(nbytes + 1)
    if len(data) < nbytes:
        raise FormatError(
            f"truncated {what} payload: expected {nbytes} bytes, got {len(data)}"
        )
    if len(data) > nbytes:
        raise FormatError(f"{what} payload has trailing bytes beyond {nbytes}")
    return data


def _check_finite_payload(arr: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(~np.isfinite(arr.ravel()))
    if bad.size:
        raise FormatError(f"non-finite value in {what} payload at element {bad[0]}")


def write_cube(cube: HsiCube, path) -> None:
    with open(path, "wb") as fh:
        _write_header(
            fh,
            CUBE_MAGIC,
            [
                ("width", cube.width),
                ("height", cube.height),
                ("bands", cube.bands),
                ("band_trim", cube.band_trim),
                ("dtype", "f32le"),
                ("order", "band-sequential,row-major-pixels"),
            ],
        )
        fh.write(np.ascontiguousarray(cube.data, dtype="<f4").tobytes())


def read_cube(path) -> HsiCube:
    with open(path, "rb") as fh:
        f = _field_map(_read_header(fh, CUBE_MAGIC))
        try:
            width, height, bands = int(f["width"]), int(f["height"]), int(f["bands"])
            band_trim = int(f.get("band_trim", "0"))
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad cube header: {exc}") from exc
        if f.get("dtype") != "f32le":
            raise FormatError(f"unsupported cube dtype {f.get('dtype')!r}")
        n = width * height
        raw = _read_payload(fh, 4 * bands * n, "cube")
        data = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(bands, n)
        _check_finite_payload(data, "cube")
        return HsiCube(width=width, height=height, bands=bands, data=data, band_trim=band_trim)


def write_labels(labels: LabelMap, width: int, height: int, path) -> None:
    if labels.labels.size != width * height:
        raise FormatError("label length does not match geometry")
    C = labels.n_classes
    fields = [("width", width), ("height", height), ("classes", C), ("dtype", "u16le")]
    if labels.class_names is not None:
        for c, name in enumerate(labels.class_names, start=1):
            fields.append((f"name_{c}", name.replace(" ", "_")))
    if labels.class_colors is not None:
        for c, rgb in enumerate(labels.class_colors, start=1):
            fields.append((f"color_{c}", f"{int(rgb[0])},{int(rgb[1])},{int(rgb[2])}"))
    with open(path, "wb") as fh:
        _write_header(fh, LABEL_MAGIC, fields)
        fh.write(np.ascontiguousarray(labels.labels, dtype="<u2").tobytes())


def read_labels(path) -> Tuple[LabelMap, int, int]:
    with open(path, "rb") as fh:
        fields = _read_header(fh, LABEL_MAGIC)
        f = _field_map(fields)
        try:
            width, height, C = int(f["width"]), int(f["height"]), int(f["classes"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad label header: {exc}") from exc
        n = width * height
        raw = _read_payload(fh, 2 * n, "labels")
        lab = np.frombuffer(raw, dtype="<u2").astype(np.int64)
        if lab.max(initial=0) > C:
            raise FormatError(
                f"label {lab.max()} exceeds declared class count {C}"
            )
        names = [None] * C
        colors = np.zeros((C, 3), dtype=np.uint8) if any(k.startswith("color_") for k, _ in fields) else None
        has_names = False
        for key, value in fields:
            if key.startswith("name_"):
                names[int(key[5:]) - 1] = value.replace("_", " ")
                has_names = True
            elif key.startswith("color_"):
                colors[int(key[6:]) - 1] = [int(x) for x in value.split(",")]
        return (
            LabelMap(
                labels=lab,
                class_names=names if has_names else None,
                class_colors=colors,
            ),
            width,
            height,
        )


def _f32_safe_atoms(atoms: np.ndarray) -> np.ndarray:
    """Quantize atoms to f32 while keeping every column inside the unit ball."""
    q = atoms.astype("<f4")
    norms = np.linalg.norm(q.astype(np.float64), axis=0)
    over = norms > 1.0
    if over.any():
        scaled = atoms.copy()
        scaled[:, over] /= norms[over] * (1.0 + 1e-6)
        q = scaled.astype("<f4")
    return q


def write_model(model: SmsbModel, path, svm_section: Optional[dict] = None) -> None:
    """Serialize a fitted model; pass svm_section to append a classifier.

    svm_section keys: kernel, gamma, C, classes (list), pairs (list of
    dicts with pos, neg, bias, support_vectors, dual_coefs), scaler_mean,
    scaler_std.
    """
    plan = model.plan
    mask = model.mask
    fields = [
        ("width", plan.width),
        ("height", plan.height),
        ("m", plan.group_size),
        ("B", plan.block_count),
        ("s", plan.block_size),
        ("k", model.dict.k),
        ("trimmed_bands", plan.trimmed_bands),
        ("normalization", model.normalization),
        ("norm_scale", repr(float(model.norm_scale))),
        ("mu_dict", repr(float(model.mu_dict))),
        ("mu_code", repr(float(model.solver_cfg.mu))),
        ("code_tol", repr(float(model.solver_cfg.tol))),
        ("code_max_iters", model.solver_cfg.max_iters),
        ("seed", model.seed),
        ("mask_mode", mask.mode),
        ("mask_flags", " ".join(str(int(x)) for x in mask.flags)),
        ("mask_variances", " ".join(repr(float(v)) for v in mask.variances)),
    ]
    if mask.threshold is not None:
        fields.append(("mask_threshold", repr(float(mask.threshold))))
    if mask.top_n is not None:
        fields.append(("mask_top_n", mask.top_n))

    svm_payloads = []
    if svm_section is not None:
        fields.append(("svm", 1))
        fields.append(("svm_kernel", svm_section["kernel"]))
        fields.append(("svm_gamma", repr(float(svm_section["gamma"]))))
        fields.append(("svm_C", repr(float(svm_section["C"]))))
        fields.append(("svm_classes", " ".join(str(c) for c in svm_section["classes"])))
        fields.append(("svm_features", svm_section["n_features"]))
        for p, pair in enumerate(svm_section["pairs"]):
            sv = np.ascontiguousarray(pair["support_vectors"], dtype="<f4")
            co = np.ascontiguousarray(pair["dual_coefs"], dtype="<f4")
            fields.append(
                (f"svm_pair_{p}", f"{pair['pos']} {pair['neg']} {sv.shape[0]} {float(pair['bias'])!r}")
            )
            svm_payloads.append(sv.tobytes())
            svm_payloads.append(co.tobytes())
        svm_payloads.append(np.ascontiguousarray(svm_section["scaler_mean"], dtype="<f4").tobytes())
        svm_payloads.append(np.ascontiguousarray(svm_section["scaler_std"], dtype="<f4").tobytes())
    else:
        fields.append(("svm", 0))

    with open(path, "wb") as fh:
        _write_header(fh, MODEL_MAGIC, fields)
        # atoms are stored column-major (atom after atom)
        fh.write(_f32_safe_atoms(model.dict.atoms).tobytes(order="F"))
        for chunk in svm_payloads:
            fh.write(chunk)


def read_model(path):
    """Load a model file; returns (SmsbModel, svm_section or None)."""
    with open(path, "rb") as fh:
        fields = _read_header(fh, MODEL_MAGIC)
        f = _field_map(fields)
        try:
            width, height = int(f["width"]), int(f["height"])
            m, B, s, k = int(f["m"]), int(f["B"]), int(f["s"]), int(f["k"])
            trimmed = int(f["trimmed_bands"])
        except (KeyError, ValueError) as exc:
            raise FormatError(f"bad model header: {exc}") from exc

        atoms_bytes = fh.read(4 * s * k)
        if len(atoms_bytes) < 4 * s * k:
            raise FormatError(
                f"truncated model payload: expected {4 * s * k} atom bytes, "
                f"got {len(atoms_bytes)}"
            )
        atoms = (
            np.frombuffer(atoms_bytes, dtype="<f4")
            .astype(np.float64)
            .reshape(s, k, order="F")
        )
        _check_finite_payload(atoms, "model")

        flags = np.array([int(x) for x in f["mask_flags"].split()], dtype=np.int8)
        variances = np.array([float(x) for x in f["mask_variances"].split()])
        mask = blk.BlockMask(
            variances=variances,
            flags=flags,
            mode=f["mask_mode"],
            threshold=float(f["mask_threshold"]) if "mask_threshold" in f else None,
            top_n=int(f["mask_top_n"]) if "mask_top_n" in f else None,
        )
        if flags.size != B:
            raise FormatError("mask length disagrees with block count")

        dummy = HsiCube(
            width=width,
            height=height,
            bands=B * s,
            data=np.zeros((B * s, width * height)),
        )
        plan = plan_partition(dummy, m, B)
        plan = replace(plan, trimmed_bands=trimmed)
        model = SmsbModel(
            plan=plan,
            dict=SubDictionary(atoms=atoms),
            mask=mask,
            solver_cfg=SolverConfig(
                mu=float(f["mu_code"]),
                max_iters=int(f["code_max_iters"]),
                tol=float(f["code_tol"]),
                regularizer=L21,
            ),
            normalization=f["normalization"],
            norm_scale=float(f["norm_scale"]),
            mu_dict=float(f["mu_dict"]),
            seed=int(f["seed"]),
        )

        svm_section = None
        if int(f.get("svm", "0")):
            n_features = int(f["svm_features"])
            pairs = []
            p = 0
            while f"svm_pair_{p}" in f:
                pos, neg, n_sv, bias = f[f"svm_pair_{p}"].split()
                n_sv = int(n_sv)
                sv_raw = _must_read(fh, 4 * n_sv * n_features, "support vectors")
                co_raw = _must_read(fh, 4 * n_sv, "dual coefficients")
                pairs.append(
                    {
                        "pos": int(pos),
                        "neg": int(neg),
                        "bias": float(bias),
                        "support_vectors": np.frombuffer(sv_raw, dtype="<f4")
                        .astype(np.float64)
                        .reshape(n_sv, n_features),
                        "dual_coefs": np.frombuffer(co_raw, dtype="<f4").astype(np.float64),
                    }
                )
                p += 1
            mean_raw = _must_read(fh, 4 * n_features, "scaler mean")
            std_raw = _must_read(fh, 4 * n_features, "scaler std")
            svm_section = {
                "kernel": f["svm_kernel"],
                "gamma": float(f["svm_gamma"]),
                "C": float(f["svm_C"]),
                "classes": [int(c) for c in f["svm_classes"].split()],
                "n_features": n_features,
                "pairs": pairs,
                "scaler_mean": np.frombuffer(mean_raw, dtype="<f4").astype(np.float64),
                "scaler_std": np.frombuffer(std_raw, dtype="<f4").astype(np.float64),
            }
        trailing = fh.read(1)
        if trailing:
            raise FormatError("model file has trailing bytes")
        return model, svm_section


def _must_read(fh, nbytes: int, what: str) -> bytes:
    data = fh.read(nbytes)
    if len(data) != nbytes:
        raise FormatError(f"truncated model payload while reading {what}")
    return data


def write_features(feats, path) -> None:
    """Persist a sparse feature set (f32le features + u32le pixel ids)."""
    rows, cols = feats.features.shape
    with open(path, "wb") as fh:
        _write_header(fh, FEATS_MAGIC, [("rows", rows), ("cols", cols)])
        fh.write(np.ascontiguousarray(feats.features, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(feats.pixel_ids, dtype="<u4").tobytes())


def read_features(path):
    from .pipeline import SparseFeatureSet

    with open(path, "rb") as fh:
        f = _field_map(_read_header(fh, FEATS_MAGIC))
        rows, cols = int(f["rows"]), int(f["cols"])
        raw = _must_read(fh, 4 * rows * cols, "features")
        feats = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(rows, cols)
        _check_finite_payload(feats, "features")
        ids_raw = _read_payload(fh, 4 * cols, "pixel ids")
        ids = np.frombuffer(ids_raw, dtype="<u4").astype(np.int64)
        return SparseFeatureSet(features=feats, pixel_ids=ids)


def render_map(labels: LabelMap, width: int, height: int, colors: np.ndarray) -> bytes:
    """Render predicted labels as a binary PPM image (P6), background black."""
    lab = labels.labels
    if lab.size != width * height:
        raise FormatError("label length does not match geometry")
    C = int(lab.max(initial=0))
    colors = np.asarray(colors)
    if colors.shape[0] < C:
        raise ConfigError(f"need colors for {C} classes, got {colors.shape[0]}")
    palette = np.zeros((C + 1, 3), dtype=np.uint8)
    palette[1 : C + 1] = colors[:C]
    img = palette[lab].reshape(height, width, 3)
    header = f"P6\n{width} {height}\n255\n".encode("ascii")
    return header + img.tobytes()


def write_map(labels: LabelMap, width: int, height: int, colors: np.ndarray, path) -> None:
    with open(path, "wb") as fh:
        fh.write(render_map(labels, width, height, colors))


def write_report(report_summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report_summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
