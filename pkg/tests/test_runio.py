"""Driver: config validation, manifests, determinism, resume, CLI."""

import json
from pathlib import Path

import numpy as np
import pytest

from qdecay.cli import main as cli_main
from qdecay.errors import ConfigError
from qdecay.observables import series_from_csv
from qdecay.runio import (
    manifest_config,
    parse_config_text,
    run_experiment,
    validate_config,
)

BASE = {
    "command": "propagate",
    "model": "wm",
    "s": "1.5",
    "eps": "1.0",
    "b": "30",
    "half_size": "220",
    "realizations": "3",
    "tmax": "2t0",
    "tpoints": "8",
    "master_seed": "11",
    "workers": "1",
}


class TestConfigParsing:
    def test_parse_text(self):
        cfg = parse_config_text("a = 1\n# comment\nb = two words # trail\n\n")
        assert cfg == {"a": "1", "b": "two words"}

    def test_parse_reports_all_problems(self):
        with pytest.raises(ConfigError) as err:
            parse_config_text("a = 1\nbroken line\na = 2\n")
        assert len(err.value.problems) == 2

    def test_validation_enumerates_all(self):
        bad = dict(BASE, s="-1", eps="zero", tgrid="spline")
        with pytest.raises(ConfigError) as err:
            validate_config(bad)
        text = " | ".join(err.value.problems)
        assert "s" in text and "eps" in text and "tgrid" in text
        assert len(err.value.problems) >= 3

    def test_b_and_rho_resolve_omega_c(self):
        norm = validate_config(dict(BASE, b="50", rho="2"))
        assert norm["omega_c"] == pytest.approx(25.0)

    def test_tmax_suffixes(self):
        abs_norm = validate_config(dict(BASE, tmax="3.5"))
        assert abs_norm["tmax"] == pytest.approx(3.5)
        tc_norm = validate_config(dict(BASE, tmax="4tc"))
        assert tc_norm["tmax"] == pytest.approx(4 * 2 * np.pi / 30.0)

    def test_half_size_below_band_rejected(self):
        with pytest.raises(ConfigError):
            validate_config(dict(BASE, half_size="10"))


class TestRunExperiment:
    def test_manifest_round_trip(self, tmp_path):
        run = run_experiment(BASE, tmp_path / "run")
        stored = manifest_config(run)
        assert stored == validate_config(BASE)
        # manifest carries provenance
        manifest = json.loads((run / "manifest.json").read_text())
        assert "tool_version" in manifest and "created_unix" in manifest

    def test_byte_identical_reruns(self, tmp_path):
        a = run_experiment(BASE, tmp_path / "a")
        b = run_experiment(BASE, tmp_path / "b")
        assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()

    def test_resume_skips_and_reproduces(self, tmp_path):
        run = run_experiment(BASE, tmp_path / "run")
        first = (run / "series.csv").read_bytes()
        marker = run / "realizations" / "r00001.npz"
        stamp = marker.stat().st_mtime_ns
        run_experiment(BASE, run)  # resume: markers present, tasks skipped
        assert marker.stat().st_mtime_ns == stamp
        assert (run / "series.csv").read_bytes() == first

    def test_partial_resume_completes(self, tmp_path):
        run = run_experiment(BASE, tmp_path / "run")
        first = (run / "series.csv").read_bytes()
        (run / "realizations" / "r00002.npz").unlink()
        run_experiment(BASE, run)
        assert (run / "series.csv").read_bytes() == first

    def test_ldos_outputs(self, tmp_path):
        cfg = dict(BASE, command="ldos", realizations="2", half_size="60")
        run = run_experiment(cfg, tmp_path / "ldos")
        for name in ("ldos_log.csv", "ldos_linear.csv"):
            text = (run / name).read_text()
            assert text.startswith("# model=wm")
            assert "bin_center,bin_width,weight_density,stderr" in text

    def test_theory_outputs(self, tmp_path):
        cfg = {
            "command": "theory", "model": "wm", "s": "1.5", "eps": "1.0",
            "omega_c": "30", "tmax": "3t0", "tpoints": "9",
        }
        run = run_experiment(cfg, tmp_path / "theory")
        text = (run / "theory.csv").read_text()
        assert "P_stretched" in text and "dE_lrt" in text
        assert "regime=stretched_exponential" in text


class TestCli:
    def test_propagate_then_fit_and_figures(self, tmp_path):
        run = tmp_path / "run"
        rc = cli_main(
            [
                "propagate", "--model", "wm", "--s", "1.5", "--eps", "1.0",
                "--b", "30", "--half-size", "220", "--realizations", "3",
                "--tmax", "3t0", "--tpoints", "12", "--master-seed", "5",
                "--workers", "1", "--out", str(run),
            ]
        )
        assert rc == 0
        series = series_from_csv((run / "series.csv").read_text())
        assert series.n_realizations == 3
        fit_dir = tmp_path / "fit"
        t0 = 0.00994718394324346  # s=1.5, eps=1 value, frozen elsewhere
        rc = cli_main(
            [
                "fit", "--series", str(run / "series.csv"),
                "--window-lo", str(0.3 * t0), "--window-hi", str(3 * t0),
                "--out", str(fit_dir),
            ]
        )
        assert rc == 0
        report = json.loads((fit_dir / "fit.json").read_text())
        assert "stretched" in report and "sha256" in report
        rc = cli_main(
            ["figure", "--run", str(run), "--id", "survival",
             "--out", str(tmp_path / "fig.svg")]
        )
        assert rc == 0
        assert (tmp_path / "fig.svg").stat().st_size > 0

    def test_config_error_exit_code(self, tmp_path):
        rc = cli_main(
            ["propagate", "--model", "nope", "--s", "-3", "--eps", "1",
             "--b", "30", "--tmax", "1", "--out", str(tmp_path / "x")]
        )
        assert rc == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "command = propagate\nmodel = wm\ns = 1.5\neps = 1.0\nb = 30\n"
            "half_size = 220\nrealizations = 2\ntmax = 1t0\ntpoints = 6\n"
            "master_seed = 3\nworkers = 1\n"
        )
        run = tmp_path / "run"
        rc = cli_main(
            ["propagate", "--config", str(cfg), "--realizations", "3",
             "--out", str(run)]
        )
        assert rc == 0
        assert manifest_config(run)["realizations"] == 3

    def test_collapse_command(self, tmp_path):
        runs = []
        for k, eps in enumerate(["0.8", "1.0", "1.2"]):
            run = tmp_path / f"r{k}"
            rc = cli_main(
                ["propagate", "--model", "wm", "--s", "1.5", "--eps", eps,
                 "--b", "30", "--half-size", "260", "--realizations", "2",
                 "--tmax", "3t0", "--tpoints", "14", "--master-seed", str(k),
                 "--workers", "1", "--out", str(run)]
            )
            assert rc == 0
            runs.append(str(run / "series.csv"))
        out = tmp_path / "collapse"
        rc = cli_main(
            ["collapse", "--series", ";".join(runs), "--window-lo", "0.3",
             "--window-hi", "2.5", "--out", str(out)]
        )
        assert rc == 0
        report = json.loads((out / "collapse.json").read_text())
        assert report["residual"] < 0.5
