#!/usr/bin/env python3
"""
CLI Tests
=========
End-to-end tests of srgeodesics.py through main():
- listings and usage errors (exit 0 / 2)
- a small run with report.json and CSV layout checks
- failing checks (exit 1) and numerical failures (exit 3)
- deterministic verify reports
"""

import json
from pathlib import Path

import pytest

from src.exceptions import DivergenceError
from srgeodesics import EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, main


# =============================================================================
# Test Configuration
# =============================================================================

HEISENBERG_RUN = """\
tiny_run:
  model: heisenberg
  initial_conditions:
    - {x0: [0.0, 0.0, 0.0], lambda0: [1.0, 0.0, 1.0]}
    - {x0: [0.2, 0.1, 0.0], lambda0: [0.05, -0.1, 1.0]}
  T: 0.5
  h: 0.001
  probes: 5
  checks: [energy-drift, kappa1-constant, kappa2-vanishing, j2]
"""

PRODUCT_RUN = """\
product_run:
  model: product-heisenberg
  initial_conditions:
    - {x0: [0, 0, 0, 0, 0, 0], alpha: [1.0, 2.0], v: [0.7071067811865476, 0.0, 0.7071067811865476, 0.0]}
  T: 0.2
  h: 0.01
  probes: 5
  checks: [j2]
"""

REPORT_KEYS = {"experiment", "model", "modelInfo", "seed", "parameters", "tolerances", "checks", "trajectories", "pass", "timing"}


# =============================================================================
# Helper Functions
# =============================================================================

def write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "config.yaml"
    path.write_text(text)
    return path


def run_cli(*args: str) -> int:
    return main(["--no-progress", *args])


def load_report(path: Path) -> dict:
    with open(path) as f:
        return json.load(f)


# =============================================================================
# Tests
# =============================================================================

class TestListings:
    """list-models, list-checks and usage"""

    def test_list_models(self, capsys):
        assert run_cli("list-models") == EXIT_OK
        out = capsys.readouterr().out
        for name in ("heisenberg", "product-heisenberg", "quaternionic-htype", "hopf", "twisted-heisenberg"):
            assert name in out

    def test_list_checks(self, capsys):
        assert run_cli("list-checks") == EXIT_OK
        out = capsys.readouterr().out
        assert "rvrw-orthogonality" in out and "step2-decomposition" in out

    def test_no_command(self):
        assert main([]) == EXIT_INPUT

    def test_unknown_verify_model(self, tmp_path, capsys):
        assert run_cli("--out", str(tmp_path), "verify", "nosuchmodel") == EXIT_INPUT
        assert "Unknown model" in capsys.readouterr().out


class TestRun:
    """run <config>"""

    def test_small_run_writes_report_and_csvs(self, tmp_path):
        config = write_config(tmp_path, HEISENBERG_RUN)
        out = tmp_path / "results"
        assert run_cli("--out", str(out), "run", str(config)) == EXIT_OK

        run_dir = out / "tiny_run"
        report = load_report(run_dir / "report.json")
        assert set(report) == REPORT_KEYS
        assert report["model"] == "heisenberg"
        assert report["pass"] is True
        assert [c["name"] for c in report["checks"]] == ["energy-drift", "j2", "kappa1-constant", "kappa2-vanishing"]
        assert report["trajectories"][1]["skipped"] == "vertical initial covector"

        trajectory_header = (run_dir / "tiny_run_ic000_trajectory.csv").read_text().splitlines()[0]
        assert trajectory_header == "t,x1,x2,x3,lambda1,lambda2,lambda3"
        curvature_header = (run_dir / "tiny_run_ic000_curvature.csv").read_text().splitlines()[0]
        assert curvature_header == "t,y1,y2,kappa1,kappa2"
        assert (run_dir / "tiny_run_ic001_trajectory.csv").exists()
        assert not (run_dir / "tiny_run_ic001_curvature.csv").exists()

    def test_failing_check_exits_one(self, tmp_path):
        config = write_config(tmp_path, PRODUCT_RUN)
        assert run_cli("--out", str(tmp_path / "results"), "run", str(config)) == EXIT_CHECK_FAILED
        report = load_report(tmp_path / "results" / "product_run" / "report.json")
        assert report["pass"] is False

    def test_tolerance_flag_overrides_config(self, tmp_path):
        config = write_config(tmp_path, PRODUCT_RUN)
        assert run_cli("--tol-algebraic", "1e3", "--out", str(tmp_path / "r"), "run", str(config)) == EXIT_OK

    @pytest.mark.parametrize("step", ["0", "-0.01"])
    def test_non_positive_step_exits_two(self, tmp_path, step):
        config = write_config(tmp_path, HEISENBERG_RUN.replace("h: 0.001", f"h: {step}"))
        assert run_cli("--out", str(tmp_path), "run", str(config)) == EXIT_INPUT

    def test_missing_config_exits_two(self, tmp_path):
        assert run_cli("run", str(tmp_path / "missing.yaml")) == EXIT_INPUT

    def test_divergence_exits_three(self, tmp_path, monkeypatch):
        def diverge(*args, **kwargs):
            raise DivergenceError("normal geodesic diverged", last_good_time=0.25)

        monkeypatch.setattr("src.experiment_runner.integrate_normal_geodesics", diverge)
        config = write_config(tmp_path, HEISENBERG_RUN)
        assert run_cli("--out", str(tmp_path), "run", str(config)) == EXIT_NUMERICAL


class TestVerify:
    """verify <model>"""

    def test_verify_is_deterministic(self, tmp_path):
        reports = []
        for label in ("first", "second"):
            out = tmp_path / label
            code = run_cli("--seed", "7", "--out", str(out), "verify", "heisenberg",
                           "--T", "0.5", "--ics", "3", "--probes", "5")
            assert code == EXIT_OK
            report = load_report(out / "verify_heisenberg" / "report.json")
            report.pop("timing")
            reports.append(report)
        assert reports[0] == reports[1]
        assert len(reports[0]["checks"]) == 21
        assert len(reports[0]["trajectories"]) == 3

    def test_options_after_command(self, tmp_path):
        """`verify heisenberg --seed 7` matches `--seed 7 verify heisenberg`."""
        small = ["--T", "0.5", "--ics", "2", "--probes", "3"]
        after = tmp_path / "after"
        before = tmp_path / "before"
        assert main(["verify", "heisenberg", "--seed", "7", "--no-progress", "--out", str(after), *small]) == EXIT_OK
        assert run_cli("--seed", "7", "--out", str(before), "verify", "heisenberg", *small) == EXIT_OK

        reports = [load_report(base / "verify_heisenberg" / "report.json") for base in (after, before)]
        for report in reports:
            report.pop("timing")
        assert reports[0]["seed"] == 7
        assert reports[0] == reports[1]

    def test_tolerance_flag_after_command(self, tmp_path):
        config = write_config(tmp_path, PRODUCT_RUN)
        assert run_cli("--out", str(tmp_path / "r"), "run", str(config), "--tol-algebraic", "1e3") == EXIT_OK
