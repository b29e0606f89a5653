#!/usr/bin/env python3
"""
Report Tests
============
CheckReport assembly, JSON conversion and the CSV result formats.
"""

import json

import numpy as np
import pytest

from src.reports import (
    build_check_report,
    merge_reports,
    read_csv,
    to_jsonable,
    write_curvature_csv,
    write_report_json,
    write_trajectory_csv,
)


class TestCheckReport:
    """build_check_report"""

    def test_pass_is_strictly_below_tolerance(self):
        assert build_check_report("j2", [0.5, 1e-11], 1e-10).passed is False
        assert build_check_report("j2", [1e-11, 2e-11], 1e-10).passed is True
        assert build_check_report("j2", [1e-10], 1e-10).passed is False

    def test_witnesses_are_worst_first(self):
        residuals = [0.1, 0.7, 0.3, 0.9, 0.0, 0.5, 0.2]
        report = build_check_report("j2", residuals, 1.0, [{"id": i} for i in range(7)])
        assert [w["id"] for w in report.witnesses] == [3, 1, 5, 2, 6]
        assert report.witnesses[0]["residual"] == 0.9
        assert report.samples == 7

    def test_nan_counts_as_failure(self):
        report = build_check_report("theorem1", [0.0, float("nan")], 1.0)
        assert report.max_residual == np.inf and not report.passed

    def test_witness_count_must_match(self):
        with pytest.raises(ValueError):
            build_check_report("j2", [0.0, 1.0], 1.0, [{"id": 0}])

    def test_merge_is_deterministic(self):
        reports = [build_check_report(name, [r], 1.0) for name, r in (("j2", 0.1), ("htype", 0.2), ("j2", 0.3))]
        merged = merge_reports(reports)
        assert [(r.check_name, r.max_residual) for r in merged] == [("htype", 0.2), ("j2", 0.3), ("j2", 0.1)]


class TestSerialization:
    """JSON and CSV output"""

    def test_to_jsonable(self):
        value = to_jsonable({"a": np.arange(2), "b": np.float64(np.inf), "c": np.bool_(True), 1: np.int64(4)})
        assert value == {"a": [0, 1], "b": "inf", "c": True, "1": 4}

    def test_report_json_is_sorted(self, tmp_path):
        path = write_report_json(tmp_path / "out" / "report.json", {"z": 1, "a": np.array([1.5])})
        text = path.read_text()
        assert json.loads(text) == {"a": [1.5], "z": 1}
        assert text.index('"a"') < text.index('"z"')

    def test_trajectory_csv_columns(self, tmp_path):
        t = np.linspace(0.0, 1.0, 3)
        path = write_trajectory_csv(tmp_path / "traj.csv", t, np.zeros((3, 3)), np.ones((3, 3)))
        frame = read_csv(path)
        assert list(frame.columns) == ["t", "x1", "x2", "x3", "lambda1", "lambda2", "lambda3"]
        assert frame["t"].tolist() == t.tolist()

    def test_curvature_csv_round_trips_exactly(self, tmp_path):
        t = np.linspace(0.0, 1.0, 4)
        kappa1 = np.array([1.0 / 3.0, np.pi, 2.0**-40, 1e300])
        path = write_curvature_csv(tmp_path / "curv.csv", t, np.zeros((4, 2)), kappa1, np.zeros(4))
        frame = read_csv(path)
        assert list(frame.columns) == ["t", "y1", "y2", "kappa1", "kappa2"]
        np.testing.assert_array_equal(frame["kappa1"].to_numpy(), kappa1)
