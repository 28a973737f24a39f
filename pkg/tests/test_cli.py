"""Experiment runner: config handling, CSV output, exit codes, determinism."""

import json
import subprocess
import sys

import numpy as np
import pytest

from manifold_sde.analysis import ErrorCurve
from manifold_sde.cli import (
    CSV_HEADER,
    ConfigError,
    curve_rows,
    emit_curve_csv,
    main,
    parse_config_text,
    read_curve_csv,
    run,
)

FAST_CONVERGENCE = ["levels=8,16,32,64", "ref_steps=256", "n_paths=64"]


class TestConfigParsing:
    def test_comments_and_blanks(self):
        cfg = parse_config_text("""
        # a comment
        manifold.name = torus   # trailing comment
        T = 2.0

        levels=4,8
        """)
        assert cfg == {"manifold.name": "torus", "T": "2.0", "levels": "4,8"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 1"):
            parse_config_text("not a key value pair")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config_text("a=1\na=2")

    def test_empty_key(self):
        with pytest.raises(ConfigError, match="empty key"):
            parse_config_text("=3")


class TestExitCodes:
    def test_unknown_key_exits_2(self, tmp_path, capsys):
        code = run("convergence", overrides=["bogus.key=1"], out=tmp_path)
        assert code == 2
        assert "bogus.key" in capsys.readouterr().err

    def test_unknown_manifold_exits_2(self, tmp_path, capsys):
        code = run("convergence", overrides=["manifold.name=moebius"], out=tmp_path)
        assert code == 2
        assert "moebius" in capsys.readouterr().err

    def test_malformed_value_exits_2(self, tmp_path, capsys):
        code = run("convergence", overrides=["n_paths=many"], out=tmp_path)
        assert code == 2
        assert "n_paths" in capsys.readouterr().err

    def test_synthetic_slope_one_fails_band_check(self, tmp_path):
        # a planted h^1.0 curve must trip the strong-convergence band under --check
        code = run("convergence", overrides=["synthetic.slope=1.0"],
                   seed=1, check=True, out=tmp_path)
        assert code == 3

    def test_synthetic_half_slope_passes(self, tmp_path):
        code = run("convergence", overrides=["synthetic.slope=0.5"],
                   seed=1, check=True, out=tmp_path)
        assert code == 0

    def test_failed_check_without_flag_still_exits_0(self, tmp_path):
        code = run("convergence", overrides=["synthetic.slope=1.0"],
                   seed=1, check=False, out=tmp_path)
        assert code == 0

    def test_unreadable_config_exits_2(self, tmp_path):
        assert run("convergence", config_path=tmp_path / "nope.cfg") == 2

    def test_selftest_passes(self, tmp_path):
        assert run("selftest", out=tmp_path, check=True) == 0


class TestCsv:
    def test_empty_rows_header_only(self, tmp_path):
        path = emit_curve_csv([], tmp_path / "empty.csv")
        assert path.read_text() == CSV_HEADER + "\n"

    def test_six_level_curve_has_seven_lines(self, tmp_path):
        h = 2.0 ** -np.arange(4, 10)
        curve = ErrorCurve(kind="strong-vs-reference", p=2, h=h, error=h ** 0.5,
                           stderr=0.01 * h, n_paths=[64] * 6)
        path = emit_curve_csv(curve, tmp_path / "c.csv")
        text = path.read_text()
        assert len(text.splitlines()) == 7
        assert "\r" not in text

    def test_roundtrip_is_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        h = np.sort(rng.uniform(1e-6, 1.0, 5))[::-1]
        curve = ErrorCurve(kind="k", p=1, h=h, error=rng.uniform(0.1, 2.0, 5),
                           stderr=rng.uniform(0, 1e-3, 5), n_paths=[100] * 5)
        path = emit_curve_csv(curve, tmp_path / "r.csv")
        assert read_curve_csv(path) == curve_rows(curve)


class TestDeterminism:
    def test_identical_csv_across_runs_and_workers(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert run("convergence", overrides=FAST_CONVERGENCE,
                   seed=42, workers=1, out=out1) == 0
        assert run("convergence", overrides=FAST_CONVERGENCE,
                   seed=42, workers=3, out=out2) == 0
        b1 = (out1 / "results.csv").read_bytes()
        b2 = (out2 / "results.csv").read_bytes()
        assert b1 == b2

    def test_manifest_shape(self, tmp_path):
        assert run("selftest", seed=1, out=tmp_path) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert list(manifest) == ["experiment", "config", "version",
                                  "wall_time_s", "checks", "outputs"]
        assert manifest["experiment"] == "selftest"
        assert all(c["passed"] for c in manifest["checks"])


class TestExperiments:
    def test_geometry_check_passes_on_sphere(self, tmp_path):
        code = run("geometry-check", overrides=["n_mc=5000"], seed=2,
                   check=True, out=tmp_path)
        assert code == 0
        rows = read_curve_csv(tmp_path / "results.csv")
        names = {r[0] for r in rows}
        assert "projector-symmetry" in names and "ito-monte-carlo-3se" in names

    def test_geometry_check_on_torus(self, tmp_path):
        code = run("geometry-check",
                   overrides=["manifold.name=torus", "n_mc=5000", "n_points=6"],
                   seed=3, check=True, out=tmp_path)
        assert code == 0

    def test_small_coupling_run(self, tmp_path):
        code = run("coupling",
                   overrides=["levels=16,32,64,128", "n_paths=64",
                              "check.slope_min=0.2", "check.slope_max=0.9",
                              "check.agree=0.4"],
                   seed=4, check=True, out=tmp_path)
        assert code == 0
        rows = read_curve_csv(tmp_path / "results.csv")
        assert {r[1] for r in rows} == {1, 2}

    def test_small_rld_sample_run(self, tmp_path):
        code = run("rld-sample",
                   overrides=["T=1.0", "h=0.0625", "n_paths=256",
                              "check.moment_tol=0.5"],
                   seed=5, check=True, out=tmp_path)
        assert code == 0

    def test_small_rld_mixing_run(self, tmp_path):
        code = run("rld-mixing",
                   overrides=["T=2.0", "h=0.125", "n_paths=64",
                              "checkpoints=0.5,1,2", "target_reps=3"],
                   seed=6, out=tmp_path)
        assert code == 0
        rows = read_curve_csv(tmp_path / "results.csv")
        kinds = [r[0] for r in rows]
        assert kinds.count("mixing-w2") == 3 and "mixing-w2-baseline" in kinds

    def test_small_one_step_bias_run(self, tmp_path):
        code = run("one-step-bias",
                   overrides=["h_list=0.25,0.125,0.0625,0.03125",
                              "n_samples=4000", "n_points=2",
                              "check.bias_min=0.5", "check.bias_max=2.5",
                              "check.centered_min=1.5", "check.centered_max=2.5"],
                   seed=7, check=True, out=tmp_path)
        assert code == 0


class TestCommandLine:
    def test_console_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "manifold_sde.cli", "selftest",
             "--out", str(tmp_path), "--check"],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        assert "[PASS]" in proc.stdout

    def test_config_file_plus_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("synthetic.slope=1.0\nseed=9\n")
        assert main(["convergence", "--config", str(cfg), "--check",
                     "--out", str(tmp_path / "o1")]) == 3
        assert main(["convergence", "--config", str(cfg), "--check",
                     "--set", "synthetic.slope=0.5",
                     "--out", str(tmp_path / "o2")]) == 0
