"""Command-line driver for the full workflow.

Subcommands mirror the pipeline stages (fit, encode, train-svm, classify),
the evaluation protocol (evaluate, bench), map rendering and synthetic
data generation.  Every command reads and writes only the documented file
formats; parameters can come from a preset, a JSON config file and flags,
with flags taking precedence.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
import time
from dataclasses import dataclass, fields

import click
import numpy as np

from . import blocks as blk
from . import errors, formats, pipeline, synth
from .core import LabelMap
from .svm import RBF, BinaryClassifier, FeatureScaler, Kernel, SvmModel, svm_predict

# Table-driven parameter presets for the three benchmark scenes
PRESETS = {
    "indian-pines": {"m": 12, "B": 10, "k": 28, "active_blocks": 8},
    "pavia-university": {"m": 13, "B": 10, "k": 40, "active_blocks": 8},
    "salinas": {"m": 32, "B": 7, "k": 29, "active_blocks": 7},
}

EXIT_CODES = {
    errors.InvalidPartitionError: 3,
    errors.NumericInputError: 4,
    errors.ShapeError: 5,
    errors.ResourceLimitError: 6,
    errors.InsufficientDataError: 7,
    errors.DegenerateDataError: 8,
    errors.EmptyMaskError: 9,
    errors.DegenerateLabelsError: 10,
    errors.DegenerateSplitError: 11,
    errors.ModelMismatchError: 12,
    errors.FormatError: 13,
    errors.ConfigError: 14,
    errors.OracleScopeError: 15,
}


@dataclass
class RunConfig:
    m: int = 4
    B: int = 2
    k: int = 8
    mask_mode: str = "top_n"
    active_blocks: int | None = None
    threshold: float | None = None
    mu_dict: float | None = None
    mu_code: float | None = None
    normalization: str = pipeline.NORM_GLOBAL_MAX
    seed: int = 0
    repeats: int = 1
    threads: int = 0              # 0 = available parallelism
    epochs: int = 10
    batch_size: int = 256
    svm_C: float | None = None
    svm_gamma: float | None = None
    cv_folds: int = 5
    train_fraction: float | None = None
    train_count: int | None = None

    def fit_params(self) -> pipeline.FitParams:
        return pipeline.FitParams(
            m=self.m,
            B=self.B,
            k=self.k,
            mask_mode=self.mask_mode,
            active_blocks=self.active_blocks,
            threshold=self.threshold,
            mu_dict=self.mu_dict,
            mu_code=self.mu_code,
            normalization=self.normalization,
            seed=self.seed,
            epochs=self.epochs,
            batch_size=self.batch_size,
        )

    def effective_threads(self) -> int:
        if self.threads > 0:
            return self.threads
        env = os.environ.get("SMSB_THREADS")
        if env:
            return max(1, int(env))
        return os.cpu_count() or 1


_KNOWN_KEYS = {f.name for f in fields(RunConfig)}


def build_config(preset, config_path, overrides) -> RunConfig:
    values = {}
    if preset is not None:
        if preset not in PRESETS:
            raise errors.ConfigError(
                f"unknown preset {preset!r}; choose from {sorted(PRESETS)}"
            )
        values.update(PRESETS[preset])
    if config_path is not None:
        with open(config_path) as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - _KNOWN_KEYS
        if unknown:
            raise errors.ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    for key, value in overrides.items():
        if value is not None:
            values.update({key: value})
    cfg = RunConfig(**values)
    if cfg.repeats < 1:
        raise errors.ConfigError("repeats must be >= 1")
    return cfg


def _fail(exc: errors.SmsbError):
    code = EXIT_CODES.get(type(exc), 2)
    click.echo(f"error[{type(exc).__module__}.{type(exc).__name__}:{code}] {exc}", err=True)
    sys.exit(code)


def smsb_errors(fn):
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except errors.SmsbError as exc:
            _fail(exc)

    return wrapper


def config_options(fn):
    opts = [
        click.option("--config", "config_path", type=click.Path(exists=True), default=None),
        click.option("--preset", type=str, default=None),
        click.option("--m", type=int, default=None),
        click.option("--blocks", "B", type=int, default=None),
        click.option("--atoms", "k", type=int, default=None),
        click.option("--mask-mode", type=click.Choice(["top_n", "threshold", "all"]), default=None),
        click.option("--active-blocks", type=int, default=None),
        click.option("--threshold", type=float, default=None),
        click.option("--mu-dict", type=float, default=None),
        click.option("--mu-code", type=float, default=None),
        click.option("--normalization", type=click.Choice(["none", "global_max", "per_pixel_unit"]), default=None),
        click.option("--seed", type=int, default=None),
        click.option("--repeats", type=int, default=None),
        click.option("--threads", type=int, default=None),
        click.option("--epochs", type=int, default=None),
        click.option("--batch-size", type=int, default=None),
        click.option("--svm-c", "svm_C", type=float, default=None),
        click.option("--svm-gamma", type=float, default=None),
        click.option("--cv-folds", type=int, default=None),
        click.option("--train-fraction", type=float, default=None),
        click.option("--train-count", type=int, default=None),
        click.option("--dump-config", is_flag=True, default=False),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _collect(kwargs) -> tuple:
    dump = kwargs.pop("dump_config")
    preset = kwargs.pop("preset")
    config_path = kwargs.pop("config_path")
    passthrough = {k: kwargs.pop(k) for k in list(kwargs) if k in _KNOWN_KEYS}
    cfg = build_config(preset, config_path, passthrough)
    if dump:
        click.echo(json.dumps(dataclasses.asdict(cfg), indent=2, sort_keys=True))
        sys.exit(0)
    return cfg, kwargs


def _split_spec(cfg: RunConfig, labels: LabelMap) -> pipeline.SplitSpec:
    if cfg.train_count is not None:
        counts = {c: cfg.train_count for c in range(1, labels.n_classes + 1)}
        return pipeline.SplitSpec(counts=counts)
    frac = cfg.train_fraction if cfg.train_fraction is not None else 0.1
    return pipeline.SplitSpec(fraction=frac)


@click.group()
def main():
    """Sparse modeling of spectral blocks: end-to-end HSI classification."""


@main.command("fit")
@click.option("--cube", "cube_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@config_options
@smsb_errors
def cmd_fit(cube_path, out_path, **kwargs):
    """Learn partition, dictionary and block mask from a cube."""
    cfg, _ = _collect(kwargs)
    cube = formats.read_cube(cube_path)
    model = pipeline.fit(cube, cfg.fit_params())
    formats.write_model(model, out_path)
    click.echo(
        f"fitted model: {model.dict.s}x{model.dict.k} dictionary, "
        f"{model.mask.n_active}/{model.mask.block_count} active blocks -> {out_path}"
    )


@main.command("encode")
@click.option("--cube", "cube_path", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@config_options
@smsb_errors
def cmd_encode(cube_path, model_path, out_path, **kwargs):
    """Sparse-code every pixel of a cube with a fitted model."""
    cfg, _ = _collect(kwargs)
    cube = formats.read_cube(cube_path)
    model, _svm = formats.read_model(model_path)
    feats = pipeline.encode(cube, model, threads=cfg.effective_threads())
    formats.write_features(feats, out_path)
    click.echo(f"encoded {feats.pixel_ids.size} pixels x {feats.features.shape[0]} features")


def _svm_section_from_model(svm_model: SvmModel, scaler: FeatureScaler) -> dict:
    return {
        "kernel": svm_model.kernel.kind,
        "gamma": svm_model.kernel.gamma,
        "C": svm_model.C,
        "classes": list(svm_model.classes),
        "n_features": svm_model.n_features,
        "pairs": [
            {
                "pos": p.pos,
                "neg": p.neg,
                "bias": p.bias,
                "support_vectors": p.support_vectors,
                "dual_coefs": p.dual_coefs,
            }
            for p in svm_model.pairs
        ],
        "scaler_mean": scaler.mean,
        "scaler_std": scaler.std,
    }


def _svm_model_from_section(section: dict) -> tuple:
    pairs = tuple(
        BinaryClassifier(
            pos=p["pos"],
            neg=p["neg"],
            support_vectors=p["support_vectors"],
            dual_coefs=p["dual_coefs"],
            bias=p["bias"],
        )
        for p in section["pairs"]
    )
    model = SvmModel(
        classes=tuple(section["classes"]),
        pairs=pairs,
        kernel=Kernel(kind=section["kernel"], gamma=section["gamma"]),
        C=section["C"],
        n_features=section["n_features"],
    )
    scaler = FeatureScaler(mean=section["scaler_mean"], std=section["scaler_std"])
    return model, scaler


@main.command("train-svm")
@click.option("--features", "feats_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@config_options
@smsb_errors
def cmd_train_svm(feats_path, labels_path, model_path, out_path, **kwargs):
    """Train the classifier on labeled encoded pixels; append it to the model."""
    from .svm import cross_validate, svm_train

    cfg, _ = _collect(kwargs)
    feats = formats.read_features(feats_path)
    labels, _, _ = formats.read_labels(labels_path)
    model, _old = formats.read_model(model_path)

    lab = labels.labels[feats.pixel_ids]
    keep = lab > 0
    X = feats.features[:, keep].T
    y = lab[keep]
    scaler = FeatureScaler.fit(X)
    Xs = scaler.apply(X)
    C, gamma = cfg.svm_C, cfg.svm_gamma
    if C is None or gamma is None:
        d = Xs.shape[1]
        C, gamma = cross_validate(
            Xs,
            y,
            cfg.cv_folds,
            pipeline.DEFAULT_C_GRID,
            [g / d for g in pipeline.DEFAULT_GAMMA_NUMERATORS],
            seed=cfg.seed,
        )
    svm_model = svm_train(Xs, y, C, Kernel(RBF, gamma))
    formats.write_model(model, out_path, svm_section=_svm_section_from_model(svm_model, scaler))
    click.echo(f"trained SVM on {y.size} pixels (C={C}, gamma={gamma:.6g}) -> {out_path}")


@main.command("classify")
@click.option("--cube", "cube_path", type=click.Path(exists=True), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@config_options
@smsb_errors
def cmd_classify(cube_path, model_path, out_path, **kwargs):
    """Predict a label for every pixel and write the label map."""
    cfg, _ = _collect(kwargs)
    cube = formats.read_cube(cube_path)
    model, section = formats.read_model(model_path)
    if section is None:
        raise errors.ModelMismatchError("model has no trained SVM; run train-svm first")
    svm_model, scaler = _svm_model_from_section(section)
    feats = pipeline.encode(cube, model, threads=cfg.effective_threads())
    pred = svm_predict(svm_model, scaler.apply(feats.features.T))
    out = np.zeros(cube.n_pixels, dtype=int)
    out[feats.pixel_ids] = pred
    formats.write_labels(LabelMap(labels=out), cube.width, cube.height, out_path)
    click.echo(f"classified {out.size} pixels -> {out_path}")


@main.command("evaluate")
@click.option("--cube", "cube_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@click.option("--baseline", is_flag=True, default=False, help="raw-spectra SVM instead of sparse features")
@click.option("--out", "out_path", type=click.Path(), default=None)
@config_options
@smsb_errors
def cmd_evaluate(cube_path, labels_path, baseline, out_path, **kwargs):
    """Run the repeated train/test protocol and report mean +/- std metrics."""
    cfg, _ = _collect(kwargs)
    cube = formats.read_cube(cube_path)
    labels, _, _ = formats.read_labels(labels_path)
    split = _split_spec(cfg, labels)
    if baseline:
        report = pipeline.baseline_svm_raw(
            cube, labels, split, repeats=cfg.repeats, seed=cfg.seed,
            svm_C=cfg.svm_C, svm_gamma=cfg.svm_gamma, cv_folds=cfg.cv_folds,
        )
    else:
        report = pipeline.run_experiment(
            cube, labels, split, cfg.fit_params(), repeats=cfg.repeats,
            svm_C=cfg.svm_C, svm_gamma=cfg.svm_gamma, cv_folds=cfg.cv_folds,
            threads=cfg.effective_threads(),
        )
    summary = report.summary()
    for key in ("oa", "aa", "kappa"):
        st = summary[key]
        click.echo(f"{key.upper():5s} {100 * st['mean']:.2f} +/- {100 * st['std']:.2f}")
    if out_path:
        formats.write_report({"summary": summary, "runs": report.runs}, out_path)


@main.command("map")
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@smsb_errors
def cmd_map(labels_path, out_path):
    """Render a label map as a binary PPM image."""
    labels, width, height = formats.read_labels(labels_path)
    colors = labels.class_colors
    if colors is None:
        colors = formats.CLASS_COLORS
    formats.write_map(labels, width, height, colors, out_path)
    click.echo(f"wrote {width}x{height} map -> {out_path}")


@main.command("synth")
@click.option("--classes", type=int, default=3)
@click.option("--width", type=int, default=24)
@click.option("--height", type=int, default=24)
@click.option("--bands", type=int, default=24)
@click.option("--blocks", "B", type=int, default=4)
@click.option("--disc-blocks", type=str, default="0,1", help="comma-separated discriminative block ids")
@click.option("--noise", type=float, default=0.0)
@click.option("--seed", type=int, default=0)
@click.option("--out-dir", type=click.Path(), required=True)
@smsb_errors
def cmd_synth(classes, width, height, bands, B, disc_blocks, noise, seed, out_dir):
    """Generate a synthetic cube + labels with known structure."""
    spec = synth.SynthSpec(
        width=width,
        height=height,
        bands=bands,
        class_count=classes,
        B=B,
        discriminative_blocks=tuple(int(x) for x in disc_blocks.split(",")),
        noise_std=noise,
        seed=seed,
    )
    out = synth.generate(spec)
    os.makedirs(out_dir, exist_ok=True)
    cube_path = os.path.join(out_dir, "cube.smsb")
    labels_path = os.path.join(out_dir, "labels.smsb")
    formats.write_cube(out["cube"], cube_path)
    formats.write_labels(out["labels"], width, height, labels_path)
    click.echo(f"wrote {cube_path} and {labels_path}")


@main.command("bench")
@click.option("--cube", "cube_path", type=click.Path(exists=True), required=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), required=True)
@config_options
@smsb_errors
def cmd_bench(cube_path, labels_path, **kwargs):
    """One full run with per-stage wall-clock timings."""
    cfg, _ = _collect(kwargs)
    cube = formats.read_cube(cube_path)
    labels, _, _ = formats.read_labels(labels_path)
    split = _split_spec(cfg, labels)
    t0 = time.perf_counter()
    report = pipeline.run_experiment(
        cube, labels, split, cfg.fit_params(), repeats=1,
        svm_C=cfg.svm_C, svm_gamma=cfg.svm_gamma, cv_folds=cfg.cv_folds,
        threads=cfg.effective_threads(),
    )
    total = time.perf_counter() - t0
    run = report.runs[0]
    for stage in ("fit", "encode", "classify"):
        click.echo(f"{stage:9s} {run['timings'][stage]:8.3f} s")
    click.echo(f"{'total':9s} {total:8.3f} s")
    click.echo(f"OA {100 * run['oa']:.2f}  AA {100 * run['aa']:.2f}  kappa {100 * run['kappa']:.2f}")


if __name__ == "__main__":
    main()
