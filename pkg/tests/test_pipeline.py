import numpy as np
import pytest

from smsb.core import HsiCube, LabelMap
from smsb.errors import ConfigError, DegenerateSplitError, ModelMismatchError
from smsb.pipeline import (
    NORM_GLOBAL_MAX,
    NORM_NONE,
    NORM_PER_PIXEL,
    FitParams,
    SplitSpec,
    baseline_svm_raw,
    encode,
    fit,
    normalize_cube,
    run_experiment,
)
from smsb.solver import code_group_blockwise
from smsb.core import extract_group, apply_band_trim
from smsb.synth import SynthSpec, generate


def toy_cube(seed=0, width=8, height=8, bands=8):
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((bands, width * height))
    return HsiCube(width=width, height=height, bands=bands, data=data)


def small_params(**overrides):
    base = dict(m=4, B=2, k=3, mask_mode="all", epochs=2, batch_size=32, seed=0)
    base.update(overrides)
    return FitParams(**base)


def synth_scene(noise=0.0, seed=0):
    spec = SynthSpec(width=16, height=16, bands=16, class_count=2, B=4,
                     discriminative_blocks=(0,), noise_std=noise, seed=seed)
    return generate(spec)


class TestNormalize:
    def test_none(self):
        cube = toy_cube()
        out, scale = normalize_cube(cube, NORM_NONE)
        assert scale == 1.0
        np.testing.assert_array_equal(out.data, cube.data)

    def test_global_max(self):
        cube = toy_cube(1)
        out, scale = normalize_cube(cube, NORM_GLOBAL_MAX)
        assert scale == pytest.approx(np.max(np.abs(cube.data)))
        assert np.max(np.abs(out.data)) == pytest.approx(1.0)

    def test_global_max_fixed_scale(self):
        cube = toy_cube(2)
        out, scale = normalize_cube(cube, NORM_GLOBAL_MAX, scale=4.0)
        assert scale == 4.0
        np.testing.assert_allclose(out.data, cube.data / 4.0)

    def test_per_pixel(self):
        cube = toy_cube(3)
        out, _ = normalize_cube(cube, NORM_PER_PIXEL)
        np.testing.assert_allclose(np.linalg.norm(out.data, axis=0), 1.0)

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            normalize_cube(toy_cube(), "other")


class TestFit:
    def test_shape_bookkeeping(self):
        cube = toy_cube(width=4, height=4)
        model = fit(cube, small_params())
        assert model.dict.atoms.shape == (4, 3)
        assert model.mask.block_count == 2
        assert model.plan.block_size == 4
        assert model.feature_length == 2 * 3

    def test_top_n_mask(self):
        cube = toy_cube(5)
        model = fit(cube, small_params(mask_mode="top_n", active_blocks=1))
        assert model.mask.n_active == 1
        assert model.feature_length == 3

    def test_trim_recorded(self):
        cube = toy_cube(6, bands=9)
        model = fit(cube, small_params())
        assert model.plan.trimmed_bands == 0          # re-planned on trimmed cube
        assert model.plan.used_bands == 8
        assert model.dict.s == 4

    def test_deterministic(self):
        cube = toy_cube(7)
        m1 = fit(cube, small_params())
        m2 = fit(cube, small_params())
        np.testing.assert_array_equal(m1.dict.atoms, m2.dict.atoms)
        np.testing.assert_array_equal(m1.mask.flags, m2.mask.flags)
        assert m1.solver_cfg.mu == m2.solver_cfg.mu

    def test_mu_defaults_positive(self):
        cube = toy_cube(8)
        model = fit(cube, small_params())
        assert model.mu_dict == pytest.approx(1.0 / 2.0)   # 1/sqrt(s), s = 4
        assert model.solver_cfg.mu > 0

    def test_unknown_mask_mode(self):
        with pytest.raises(ConfigError):
            fit(toy_cube(), small_params(mask_mode="bogus"))


class TestEncode:
    def test_feature_length_all_active(self):
        cube = toy_cube(9, width=4, height=4)
        model = fit(cube, small_params())
        feats = encode(cube, model)
        assert feats.features.shape == (model.feature_length, 16)
        np.testing.assert_array_equal(np.sort(feats.pixel_ids), np.arange(16))

    def test_purity_under_filter(self):
        cube = toy_cube(10)
        model = fit(cube, small_params())
        full = encode(cube, model)
        sub = encode(cube, model, pixel_filter=np.array([3, 17, 40]))
        order = {p: i for i, p in enumerate(full.pixel_ids.tolist())}
        for i, p in enumerate(sub.pixel_ids.tolist()):
            np.testing.assert_allclose(sub.features[:, i], full.features[:, order[p]])

    def test_inactive_slices_lossless(self):
        # zero-filling the dropped slices reproduces the raw blockwise codes
        cube = toy_cube(11)
        model = fit(cube, small_params(mask_mode="top_n", active_blocks=1))
        feats = encode(cube, model)
        plan, k = model.plan, model.dict.k
        cube_t = apply_band_trim(cube, plan)
        cube_n, _ = normalize_cube(cube_t, model.normalization, scale=model.norm_scale)
        active = model.mask.active_blocks()
        for i in range(plan.n_groups):
            res = code_group_blockwise(
                extract_group(cube_n, plan, i), model.dict.atoms, model.mask,
                model.solver_cfg,
            )
            rebuilt = np.zeros_like(res.codes)
            for slot, j in enumerate(active):
                for c, p in enumerate(plan.groups[i]):
                    col = np.flatnonzero(feats.pixel_ids == p)[0]
                    rebuilt[j * k:(j + 1) * k, c] = feats.features[
                        slot * k:(slot + 1) * k, col
                    ]
            np.testing.assert_array_equal(rebuilt, res.codes)

    def test_thread_count_invariance(self):
        cube = toy_cube(12)
        model = fit(cube, small_params())
        f1 = encode(cube, model, threads=1)
        f4 = encode(cube, model, threads=4)
        np.testing.assert_array_equal(f1.pixel_ids, f4.pixel_ids)
        np.testing.assert_array_equal(f1.features, f4.features)

    def test_geometry_mismatch(self):
        model = fit(toy_cube(13), small_params())
        with pytest.raises(ModelMismatchError):
            encode(toy_cube(13, width=6, height=6), model)


class TestSplitSpec:
    def labels(self):
        return LabelMap(labels=np.array([0] * 4 + [1] * 10 + [2] * 10))

    def test_counts(self):
        train, test = SplitSpec(counts={1: 3, 2: 4}).draw(self.labels(), seed=0)
        lab = self.labels().labels
        assert np.sum(lab[train] == 1) == 3
        assert np.sum(lab[train] == 2) == 4
        assert train.size + test.size == 20
        assert not set(train) & set(test)

    def test_fraction(self):
        train, test = SplitSpec(fraction=0.2).draw(self.labels(), seed=1)
        lab = self.labels().labels
        assert np.sum(lab[train] == 1) == 2
        assert np.sum(lab[train] == 2) == 2

    def test_background_excluded(self):
        train, test = SplitSpec(fraction=0.5).draw(self.labels(), seed=2)
        lab = self.labels().labels
        assert np.all(lab[train] > 0)
        assert np.all(lab[test] > 0)

    def test_degenerate(self):
        with pytest.raises(DegenerateSplitError):
            SplitSpec(counts={1: 10, 2: 1}).draw(self.labels(), seed=0)
        with pytest.raises(ConfigError):
            SplitSpec().draw(self.labels(), seed=0)

    def test_seeded(self):
        s = SplitSpec(fraction=0.3)
        a = s.draw(self.labels(), seed=9)
        b = s.draw(self.labels(), seed=9)
        np.testing.assert_array_equal(a[0], b[0])


class TestExperiments:
    def test_separable_perfect(self):
        out = synth_scene()
        report = run_experiment(
            out["cube"], out["labels"], SplitSpec(fraction=0.2),
            FitParams(m=4, B=4, k=4, mask_mode="top_n", active_blocks=1,
                      epochs=2, batch_size=64, seed=0),
            repeats=2, svm_C=10.0, svm_gamma=0.5,
        )
        summary = report.summary()
        assert summary["runs"] == 2
        assert summary["oa"]["mean"] == 1.0
        assert summary["kappa"]["mean"] == 1.0

    def test_report_carries_per_run_samples(self):
        out = synth_scene(noise=0.3)
        report = run_experiment(
            out["cube"], out["labels"], SplitSpec(fraction=0.2),
            FitParams(m=4, B=4, k=4, mask_mode="all", epochs=1,
                      batch_size=64, seed=0),
            repeats=3, svm_C=10.0, svm_gamma=0.5,
        )
        assert len(report.runs) == 3
        for run in report.runs:
            assert {"oa", "aa", "kappa", "timings"} <= set(run)
            t = run["timings"]
            assert t["total"] >= 0.99 * (t["fit"] + t["encode"] + t["classify"])

    def test_baseline_raw_features(self):
        out = synth_scene()
        report = baseline_svm_raw(
            out["cube"], out["labels"], SplitSpec(fraction=0.2),
            repeats=1, svm_C=10.0, svm_gamma=0.5,
        )
        assert report.summary()["oa"]["mean"] == 1.0
