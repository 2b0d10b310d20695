import json

import numpy as np
import pytest
from click.testing import CliRunner

from smsb import formats
from smsb.cli import EXIT_CODES, PRESETS, RunConfig, build_config, main
from smsb.errors import ConfigError, FormatError, ModelMismatchError


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def scene(tmp_path, runner):
    res = runner.invoke(
        main,
        ["synth", "--classes", "3", "--seed", "7", "--out-dir", str(tmp_path)],
    )
    assert res.exit_code == 0, res.output
    return {
        "cube": str(tmp_path / "cube.smsb"),
        "labels": str(tmp_path / "labels.smsb"),
        "dir": tmp_path,
    }


COMMON = ["--blocks", "4", "--atoms", "4", "--m", "4", "--mask-mode", "top_n",
          "--active-blocks", "2", "--epochs", "2"]


class TestBuildConfig:
    def test_preset_values(self):
        cfg = build_config("indian-pines", None, {})
        assert (cfg.m, cfg.B, cfg.k, cfg.active_blocks) == (12, 10, 28, 8)

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            build_config("nope", None, {})

    def test_override_precedence(self, tmp_path):
        cfg_file = tmp_path / "c.json"
        cfg_file.write_text(json.dumps({"m": 6, "k": 9}))
        cfg = build_config("indian-pines", str(cfg_file), {"k": 5})
        assert cfg.m == 6          # file beats preset
        assert cfg.k == 5          # flag beats file

    def test_unknown_key_rejected(self, tmp_path):
        cfg_file = tmp_path / "c.json"
        cfg_file.write_text(json.dumps({"bogus": 1}))
        with pytest.raises(ConfigError):
            build_config(None, str(cfg_file), {})

    def test_threads_env_fallback(self, monkeypatch):
        cfg = RunConfig(threads=0)
        monkeypatch.setenv("SMSB_THREADS", "3")
        assert cfg.effective_threads() == 3
        assert RunConfig(threads=2).effective_threads() == 2


class TestDumpConfig:
    def test_round_trip(self, runner, scene, tmp_path):
        res = runner.invoke(
            main,
            ["fit", "--cube", scene["cube"], "--out", str(tmp_path / "m.smsb"),
             "--preset", "salinas", "--dump-config"],
        )
        assert res.exit_code == 0, res.output
        dumped = json.loads(res.output)
        assert dumped["m"] == PRESETS["salinas"]["m"]
        # the dump reloads as a config file with identical result
        cfg_file = tmp_path / "dump.json"
        cfg_file.write_text(res.output)
        cfg = build_config(None, str(cfg_file), {})
        assert cfg == RunConfig(**dumped)


class TestWorkflow:
    def test_full_pipeline(self, runner, scene, tmp_path):
        model = str(tmp_path / "model.smsb")
        feats = str(tmp_path / "feats.smsb")
        trained = str(tmp_path / "trained.smsb")
        pred = str(tmp_path / "pred.smsb")
        ppm = str(tmp_path / "map.ppm")

        res = runner.invoke(main, ["fit", "--cube", scene["cube"], "--out", model] + COMMON)
        assert res.exit_code == 0, res.output
        assert "2/4 active blocks" in res.output

        res = runner.invoke(
            main, ["encode", "--cube", scene["cube"], "--model", model,
                   "--out", feats, "--threads", "2"],
        )
        assert res.exit_code == 0, res.output

        res = runner.invoke(
            main, ["train-svm", "--features", feats, "--labels", scene["labels"],
                   "--model", model, "--out", trained,
                   "--svm-c", "10", "--svm-gamma", "0.1"],
        )
        assert res.exit_code == 0, res.output

        res = runner.invoke(
            main, ["classify", "--cube", scene["cube"], "--model", trained,
                   "--out", pred, "--threads", "2"],
        )
        assert res.exit_code == 0, res.output

        predicted, _, _ = formats.read_labels(pred)
        truth, _, _ = formats.read_labels(scene["labels"])
        # noiseless separable scene: every labeled pixel classified correctly
        assert np.all(predicted.labels == truth.labels)

        res = runner.invoke(main, ["map", "--labels", pred, "--out", ppm])
        assert res.exit_code == 0, res.output
        with open(ppm, "rb") as fh:
            assert fh.read(3) == b"P6\n"

    def test_classify_without_svm(self, runner, scene, tmp_path):
        model = str(tmp_path / "model.smsb")
        res = runner.invoke(main, ["fit", "--cube", scene["cube"], "--out", model] + COMMON)
        assert res.exit_code == 0
        res = runner.invoke(
            main, ["classify", "--cube", scene["cube"], "--model", model,
                   "--out", str(tmp_path / "p.smsb")],
        )
        assert res.exit_code == EXIT_CODES[ModelMismatchError]
        assert "train-svm" in res.output

    def test_evaluate(self, runner, scene, tmp_path):
        out = str(tmp_path / "report.json")
        res = runner.invoke(
            main,
            ["evaluate", "--cube", scene["cube"], "--labels", scene["labels"],
             "--repeats", "2", "--train-fraction", "0.2",
             "--svm-c", "10", "--svm-gamma", "0.1", "--out", out] + COMMON,
        )
        assert res.exit_code == 0, res.output
        assert "OA" in res.output and "+/-" in res.output
        report = json.loads(open(out).read())
        assert report["summary"]["runs"] == 2
        assert report["summary"]["oa"]["mean"] == 1.0

    def test_evaluate_baseline(self, runner, scene):
        res = runner.invoke(
            main,
            ["evaluate", "--cube", scene["cube"], "--labels", scene["labels"],
             "--baseline", "--repeats", "1", "--train-fraction", "0.2",
             "--svm-c", "10", "--svm-gamma", "0.1"],
        )
        assert res.exit_code == 0, res.output
        assert "OA    100.00" in res.output

    def test_bench(self, runner, scene):
        res = runner.invoke(
            main,
            ["bench", "--cube", scene["cube"], "--labels", scene["labels"],
             "--train-fraction", "0.2", "--svm-c", "10", "--svm-gamma", "0.1"]
            + COMMON,
        )
        assert res.exit_code == 0, res.output
        for stage in ("fit", "encode", "classify", "total"):
            assert stage in res.output

    def test_determinism(self, runner, scene, tmp_path):
        m1, m2 = str(tmp_path / "m1.smsb"), str(tmp_path / "m2.smsb")
        for out in (m1, m2):
            res = runner.invoke(
                main, ["fit", "--cube", scene["cube"], "--out", out, "--seed", "4"] + COMMON
            )
            assert res.exit_code == 0
        assert open(m1, "rb").read() == open(m2, "rb").read()


class TestErrorSurface:
    def test_format_error_exit_code(self, runner, tmp_path):
        bad = tmp_path / "bad.smsb"
        bad.write_bytes(b"NOPE 1\nEND\n")
        res = runner.invoke(
            main, ["fit", "--cube", str(bad), "--out", str(tmp_path / "m.smsb")]
        )
        assert res.exit_code == EXIT_CODES[FormatError]
        assert "error[" in res.output

    def test_config_error_exit_code(self, runner, scene, tmp_path):
        res = runner.invoke(
            main, ["fit", "--cube", scene["cube"], "--out", str(tmp_path / "m.smsb"),
                   "--preset", "unknown"],
        )
        assert res.exit_code == EXIT_CODES[ConfigError]

    def test_help_lists_flags(self, runner):
        res = runner.invoke(main, ["fit", "--help"])
        assert res.exit_code == 0
        for flag in ("--config", "--preset", "--seed", "--repeats", "--threads",
                     "--mu-dict", "--mu-code", "--mask-mode", "--out", "--dump-config"):
            assert flag in res.output
