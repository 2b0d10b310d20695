"""End-to-end workflow: partition, train, select blocks, encode, classify.

fit() learns everything unsupervised (dictionary plus block mask), encode()
turns pixels into sparse-coefficient features over the active blocks, and
run_experiment() wraps the full repeated train/test protocol with OA/AA/
kappa reporting.  baseline_svm_raw() runs the same protocol on raw spectra
for comparison.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, Optional, Sequence, Union

import numpy as np

from . import blocks as blk
from .core import (
    HsiCube,
    LabelMap,
    PartitionPlan,
    apply_band_trim,
    extract_group,
    plan_partition,
    stream_observation_chunks,
)
from .dictlearn import DictLearnConfig, SubDictionary, train_subdictionary
from .errors import ConfigError, DegenerateSplitError, ModelMismatchError
from .metrics import ConfusionMatrix, compute_metrics
from .solver import L21, SolverConfig, code_group_blockwise
from .svm import (
    RBF,
    FeatureScaler,
    Kernel,
    cross_validate,
    svm_predict,
    svm_train,
)

NORM_NONE = "none"
NORM_GLOBAL_MAX = "global_max"
NORM_PER_PIXEL = "per_pixel_unit"

FORMAT_VERSION = 1

DEFAULT_C_GRID = (0.1, 1.0, 10.0, 100.0, 1000.0)
DEFAULT_GAMMA_NUMERATORS = (0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class FitParams:
    m: int
    B: int
    k: int
    mask_mode: str = blk.TOP_N          # top_n, threshold, or "all"
    active_blocks: Optional[int] = None
    threshold: Optional[float] = None
    mu_dict: Optional[float] = None     # default 1/sqrt(s)
    mu_code: Optional[float] = None     # default 0.1 * max row norm of D^T Y_s
    normalization: str = NORM_GLOBAL_MAX
    seed: int = 0
    epochs: int = 10
    batch_size: int = 256
    code_tol: float = 1e-8
    code_max_iters: int = 500


@dataclass(frozen=True)
class SmsbModel:
    plan: PartitionPlan
    dict: SubDictionary
    mask: blk.BlockMask
    solver_cfg: SolverConfig            # l21 config used by encode
    normalization: str
    norm_scale: float                   # global_max divisor (1.0 otherwise)
    mu_dict: float
    seed: int
    version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.dict.s != self.plan.block_size:
            raise ModelMismatchError("dictionary row count must equal block size")
        if self.mask.block_count != self.plan.block_count:
            raise ModelMismatchError("mask length must equal block count")

    @property
    def feature_length(self) -> int:
        return self.mask.n_active * self.dict.k


@dataclass(frozen=True)
class SparseFeatureSet:
    features: np.ndarray                # feature_length x n_pixels
    pixel_ids: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(set(self.pixel_ids.tolist())) != self.pixel_ids.size:
            raise ConfigError("pixel_ids must be unique")


def normalize_cube(cube: HsiCube, mode: str, scale: Optional[float] = None):
    """Apply the configured normalization; returns (cube, global scale)."""
    if mode == NORM_NONE:
        return cube, 1.0
    if mode == NORM_GLOBAL_MAX:
        if scale is None:
            scale = float(np.max(np.abs(cube.data)))
            if scale == 0.0:
                scale = 1.0
        return (
            HsiCube(cube.width, cube.height, cube.bands, cube.data / scale, cube.band_trim),
            scale,
        )
    if mode == NORM_PER_PIXEL:
        norms = np.linalg.norm(cube.data, axis=0, keepdims=True)
        norms = np.where(norms > 0, norms, 1.0)
        return (
            HsiCube(cube.width, cube.height, cube.bands, cube.data / norms, cube.band_trim),
            1.0,
        )
    raise ConfigError(f"unknown normalization {mode!r}")


def fit(cube: HsiCube, params: FitParams) -> SmsbModel:
    """Learn partition, sub-dictionary and block mask from an unlabeled cube."""
    plan = plan_partition(cube, params.m, params.B)
    cube_t = apply_band_trim(cube, plan)
    # re-plan on the trimmed cube so block ranges and geometry agree
    plan = plan_partition(cube_t, params.m, params.B)
    cube_n, scale = normalize_cube(cube_t, params.normalization)

    s = plan.block_size
    mu_dict = params.mu_dict if params.mu_dict is not None else 1.0 / np.sqrt(s)
    dcfg = DictLearnConfig(
        k=params.k,
        mu=mu_dict,
        batch_size=params.batch_size,
        epochs=params.epochs,
        seed=params.seed,
    )
    D = train_subdictionary(lambda: stream_observation_chunks(cube_n, plan), dcfg)

    mu_code = params.mu_code
    if mu_code is None:
        # data-adaptive default: 0.1 * largest row norm of D^T Y_s,
        # accumulated in a streaming pass
        sumsq = np.zeros(params.k)
        for chunk in stream_observation_chunks(cube_n, plan):
            P = D.atoms.T @ chunk
            sumsq += np.sum(P * P, axis=1)
        mu_code = float(0.1 * np.sqrt(np.max(sumsq)))
        if mu_code <= 0:
            mu_code = 0.1

    variances = blk.compute_block_variances(cube_n, plan)
    if params.mask_mode == "all":
        mask = blk.all_active_mask(plan.block_count)
        mask = replace(mask, variances=variances)
    elif params.mask_mode == blk.TOP_N:
        n = params.active_blocks if params.active_blocks is not None else plan.block_count
        mask = blk.build_mask(variances, mode=blk.TOP_N, top_n=n)
    elif params.mask_mode == blk.THRESHOLD:
        mask = blk.build_mask(variances, mode=blk.THRESHOLD, threshold=params.threshold)
    else:
        raise ConfigError(f"unknown mask mode {params.mask_mode!r}")

    solver_cfg = SolverConfig(
        mu=mu_code,
        max_iters=params.code_max_iters,
        tol=params.code_tol,
        regularizer=L21,
    )
    return SmsbModel(
        plan=plan,
        dict=D,
        mask=mask,
        solver_cfg=solver_cfg,
        normalization=params.normalization,
        norm_scale=scale,
        mu_dict=mu_dict,
        seed=params.seed,
    )


def encode(
    cube: HsiCube,
    model: SmsbModel,
    pixel_filter: Optional[np.ndarray] = None,
    threads: int = 1,
) -> SparseFeatureSet:
    """Sparse-code every spatial group touching the filter and gather the
    per-pixel coefficient vectors over the active blocks."""
    plan = model.plan
    if cube.width != plan.width or cube.height != plan.height:
        raise ModelMismatchError(
            f"cube is {cube.width}x{cube.height}, model expects "
            f"{plan.width}x{plan.height}"
        )
    if cube.bands < plan.used_bands:
        raise ModelMismatchError("cube has fewer bands than the model's plan")
    cube_t = apply_band_trim(cube, plan) if cube.bands > plan.used_bands else cube
    cube_n, _ = normalize_cube(cube_t, model.normalization, scale=model.norm_scale)

    wanted = None
    if pixel_filter is not None:
        wanted = np.zeros(cube.n_pixels, dtype=bool)
        wanted[np.asarray(pixel_filter)] = True

    active = model.mask.active_blocks()
    k = model.dict.k
    slices = [slice(j * k, (j + 1) * k) for j in active]

    group_ids = []
    group_cols = []
    for i in range(plan.n_groups):
        ids = plan.groups[i]
        if wanted is not None:
            keep = wanted[ids]
            if not keep.any():
                continue
            group_cols.append(np.flatnonzero(keep))
        else:
            group_cols.append(np.arange(ids.size))
        group_ids.append(i)

    def encode_group(i: int) -> np.ndarray:
        Y_i = extract_group(cube_n, plan, i)
        res = code_group_blockwise(Y_i, model.dict.atoms, model.mask, model.solver_cfg)
        return np.concatenate([res.codes[sl] for sl in slices], axis=0)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            coded = list(pool.map(encode_group, group_ids))
    else:
        coded = [encode_group(i) for i in group_ids]

    feats = []
    pix = []
    for i, cols, F in zip(group_ids, group_cols, coded):
        feats.append(F[:, cols])
        pix.append(plan.groups[i][cols])
    features = (
        np.concatenate(feats, axis=1)
        if feats
        else np.empty((model.feature_length, 0))
    )
    pixel_ids = np.concatenate(pix) if pix else np.empty(0, dtype=int)
    return SparseFeatureSet(features=features, pixel_ids=pixel_ids)


@dataclass(frozen=True)
class SplitSpec:
    """Stratified train/test split over labeled pixels.

    Either a fixed per-class training count (counts) or a global fraction.
    Remaining labeled pixels go to the test side.
    """

    counts: Optional[Dict[int, int]] = None
    fraction: Optional[float] = None

    def draw(self, labels: LabelMap, seed: int):
        rng = np.random.default_rng(seed)
        train, test = [], []
        for c in range(1, labels.n_classes + 1):
            idx = np.flatnonzero(labels.labels == c)
            if idx.size == 0:
                continue
            rng.shuffle(idx)
            if self.counts is not None:
                n = self.counts.get(c, 0)
            elif self.fraction is not None:
                n = max(1, int(round(self.fraction * idx.size)))
            else:
                raise ConfigError("split spec needs counts or fraction")
            if n < 1 or n >= idx.size:
                raise DegenerateSplitError(
                    f"class {c}: cannot take {n} train samples from {idx.size}"
                )
            train.append(idx[:n])
            test.append(idx[n:])
        if not train:
            raise DegenerateSplitError("no labeled pixels to split")
        return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class ExperimentReport:
    runs: list = field(default_factory=list)    # per-run metric dicts

    def add_run(self, metrics: Dict, timings: Dict):
        self.runs.append({**metrics, "timings": timings})

    def summary(self) -> Dict:
        out = {}
        for key in ("oa", "aa", "kappa"):
            vals = np.array([r[key] for r in self.runs])
            out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
        out["runs"] = len(self.runs)
        return out


def _classify_features(
    train_X, train_y, test_X, test_y, svm_C, svm_gamma, cv_folds, seed
):
    scaler = FeatureScaler.fit(train_X)
    train_X = scaler.apply(train_X)
    test_X = scaler.apply(test_X)
    d = train_X.shape[1]
    if svm_C is None or svm_gamma is None:
        gamma_grid = [g / d for g in DEFAULT_GAMMA_NUMERATORS]
        svm_C, svm_gamma = cross_validate(
            train_X, train_y, cv_folds, DEFAULT_C_GRID, gamma_grid, seed=seed
        )
    model = svm_train(train_X, train_y, svm_C, Kernel(RBF, svm_gamma))
    pred = svm_predict(model, test_X)
    cm = ConfusionMatrix.from_predictions(
        test_y, pred, class_ids=tuple(sorted(set(train_y.tolist()) | set(test_y.tolist())))
    )
    return compute_metrics(cm), pred


def run_experiment(
    cube: HsiCube,
    labels: LabelMap,
    split: SplitSpec,
    params: FitParams,
    repeats: int = 1,
    svm_C: Optional[float] = None,
    svm_gamma: Optional[float] = None,
    cv_folds: int = 5,
    threads: int = 1,
) -> ExperimentReport:
    """Repeat the full protocol: fit, encode, classify, score.

    Each repeat reseeds the split and the fit; the report carries one
    metric sample per run.
    """
    report = ExperimentReport()
    for r in range(repeats):
        seed = params.seed + r
        t0 = time.perf_counter()
        train_ids, test_ids = split.draw(labels, seed)

        t_fit0 = time.perf_counter()
        model = fit(cube, replace(params, seed=seed))
        t_fit = time.perf_counter() - t_fit0

        t_enc0 = time.perf_counter()
        wanted = np.concatenate([train_ids, test_ids])
        feats = encode(cube, model, pixel_filter=wanted, threads=threads)
        t_enc = time.perf_counter() - t_enc0

        pos = {p: i for i, p in enumerate(feats.pixel_ids.tolist())}
        tr = np.array([pos[p] for p in train_ids])
        te = np.array([pos[p] for p in test_ids])
        train_X = feats.features[:, tr].T
        test_X = feats.features[:, te].T
        train_y = labels.labels[train_ids]
        test_y = labels.labels[test_ids]

        t_clf0 = time.perf_counter()
        m, _ = _classify_features(
            train_X, train_y, test_X, test_y, svm_C, svm_gamma, cv_folds, seed
        )
        t_clf = time.perf_counter() - t_clf0
        report.add_run(
            m,
            {
                "fit": t_fit,
                "encode": t_enc,
                "classify": t_clf,
                "total": time.perf_counter() - t0,
            },
        )
    return report


def baseline_svm_raw(
    cube: HsiCube,
    labels: LabelMap,
    split: SplitSpec,
    repeats: int = 1,
    seed: int = 0,
    svm_C: Optional[float] = None,
    svm_gamma: Optional[float] = None,
    cv_folds: int = 5,
) -> ExperimentReport:
    """Raw-spectra SVM reference: same protocol, features are the spectra."""
    report = ExperimentReport()
    for r in range(repeats):
        s = seed + r
        t0 = time.perf_counter()
        train_ids, test_ids = split.draw(labels, s)
        train_X = cube.data[:, train_ids].T
        test_X = cube.data[:, test_ids].T
        train_y = labels.labels[train_ids]
        test_y = labels.labels[test_ids]
        m, _ = _classify_features(
            train_X, train_y, test_X, test_y, svm_C, svm_gamma, cv_folds, s
        )
        report.add_run(m, {"classify": time.perf_counter() - t0, "total": time.perf_counter() - t0})
    return report


def predict_map(
    cube: HsiCube,
    model: SmsbModel,
    svm_model,
    scaler: FeatureScaler,
    threads: int = 1,
) -> LabelMap:
    """Classify every pixel of the cube and return the predicted label map."""
    feats = encode(cube, model, threads=threads)
    pred = svm_predict(svm_model, scaler.apply(feats.features.T))
    out = np.zeros(cube.n_pixels, dtype=int)
    out[feats.pixel_ids] = pred
    return LabelMap(labels=out)
