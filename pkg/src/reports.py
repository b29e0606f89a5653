"""Check reports and the on-disk result formats (CSV trajectories, report.json)."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

MAX_WITNESSES = 5
CSV_FLOAT_FORMAT = "%.17g"


@dataclass
class CheckReport:
    """Pass/fail record of one check over a set of probes.

    `passed` is always `max_residual < tolerance`; witnesses hold the worst
    probes, largest residual first.
    """
    check_name: str
    samples: int
    max_residual: float
    tolerance: float
    passed: bool
    witnesses: List[Dict[str, Any]] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return to_jsonable({
            "name": self.check_name,
            "samples": self.samples,
            "pass": self.passed,
            "maxResidual": self.max_residual,
            "tolerance": self.tolerance,
            "witnesses": self.witnesses,
            "details": self.details,
        })


def build_check_report(
    check_name: str,
    residuals: Iterable[float],
    tolerance: float,
    witnesses: Optional[Sequence[Dict[str, Any]]] = None,
    details: Optional[Dict[str, Any]] = None,
    max_witnesses: int = MAX_WITNESSES,
) -> CheckReport:
    """Assemble a CheckReport from per-probe residuals.

    NaN residuals count as infinite. When `witnesses` is given it must align
    with `residuals`; each kept witness gains a `residual` entry.
    """
    res = np.asarray(list(residuals) if not isinstance(residuals, np.ndarray) else residuals, dtype=float).ravel()
    res = np.where(np.isnan(res), np.inf, res)
    if witnesses is not None and len(witnesses) != res.size:
        raise ValueError(f"{len(witnesses)} witnesses for {res.size} residuals")

    max_residual = float(np.max(res)) if res.size else 0.0
    order = np.argsort(-res, kind="stable")[:max_witnesses]
    kept: List[Dict[str, Any]] = []
    for index in order:
        entry = dict(witnesses[index]) if witnesses is not None else {}
        entry["probe"] = int(index)
        entry["residual"] = float(res[index])
        kept.append(entry)

    return CheckReport(
        check_name=check_name,
        samples=int(res.size),
        max_residual=max_residual,
        tolerance=float(tolerance),
        passed=bool(max_residual < tolerance),
        witnesses=kept,
        details=details or {},
    )


def merge_reports(reports: Iterable[CheckReport]) -> List[CheckReport]:
    """Deterministic ordering: by check name, then residual (largest first)."""
    return sorted(reports, key=lambda r: (r.check_name, -r.max_residual))


def to_jsonable(value: Any) -> Any:
    """Numpy-aware conversion; non-finite floats become strings."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    return value


def write_report_json(path: Path, report: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_jsonable(report), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info(f"Wrote report {path}")
    return path


def write_trajectory_csv(path: Path, times: np.ndarray, points: np.ndarray, covectors: np.ndarray) -> Path:
    """Columns t, x1..xd, lambda1..lambdad."""
    d = points.shape[-1]
    frame = pd.DataFrame(
        np.column_stack([times, points, covectors]),
        columns=["t"] + [f"x{i + 1}" for i in range(d)] + [f"lambda{i + 1}" for i in range(d)],
    )
    return _write_csv(path, frame)


def write_curvature_csv(
    path: Path, times: np.ndarray, base_points: np.ndarray, kappa1: np.ndarray, kappa2: np.ndarray
) -> Path:
    """Columns t, y1..yn, kappa1, kappa2."""
    d = base_points.shape[-1]
    frame = pd.DataFrame(
        np.column_stack([times, base_points, kappa1, kappa2]),
        columns=["t"] + [f"y{i + 1}" for i in range(d)] + ["kappa1", "kappa2"],
    )
    return _write_csv(path, frame)


def _write_csv(path: Path, frame: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def read_csv(path: Path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")
