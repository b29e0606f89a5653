#!/usr/bin/env python3
"""
Experiment Runner
=================
Builds a model from an experiment section, integrates its normal geodesics,
computes curvature profiles by both routes, runs the requested checks and
writes the per-IC CSV files and the JSON report.

Output layout under <out>/<experiment>/:
    report.json
    <experiment>_ic000_trajectory.csv   t, x1..xd, lambda1..lambdad
    <experiment>_ic000_curvature.csv    t, y1..yb, kappa1, kappa2

Initial conditions are post-processed in a thread pool; results and reports
are assembled in IC order so the outputs do not depend on scheduling.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from src.config import CheckName, ExperimentConfig, ToleranceConfig
from src.criteria import (
    Probes,
    check_dot_kappa,
    check_htype,
    check_j2,
    check_local_condition_d,
    check_r2,
    check_rvrw_orthogonality,
    check_theorem1,
    check_theorem2_parallel,
    constant_curvature_tensor,
    cyclic_cov_deriv_residuals,
    parallel_curvature_residuals,
    sample_probes,
    transverse_symmetry_residuals,
    vertical_abelian_residuals,
)
from src.exceptions import GeometryError, InputError
from src.flows import Trajectory, energy_drift, integrate_normal_geodesics, project_trajectory
from src.frenet import CurvatureProfile, frenet_curvatures, kappa_via_extremal
from src.geometry_core import (
    AnnihilatorCovector,
    PhaseState,
    SubmersionModel,
    as_chart_array,
    extremal_covector,
    extremal_covector_from_coefficients,
    random_unit_coefficients,
)
from src.metric_extension import (
    check_nondegenerate,
    check_step2_decomposition,
    compare_projections,
    normalization_identity_residual,
)
from src.models import bracket_deficiency, get_model, step2_carnot, structure_constants_from_entries, validate_model
from src.reports import (
    CheckReport,
    build_check_report,
    merge_reports,
    write_curvature_csv,
    write_report_json,
    write_trajectory_csv,
)
from src.utils import derived_rng

logger = logging.getLogger(__name__)

VERIFY_T = 2.0
VERIFY_H = 1e-3
VERIFY_ICS = 20
VERIFY_PROBES = 50
COMPARE_PROBES = 10
NORMALIZATION_TRIALS = 5
ZERO_SPEED = 1e-12
# stream index for random initial conditions, after the per-check streams
IC_STREAM = len(CheckName)


@dataclass
class TrajectoryResult:
    """Everything computed for one initial condition."""
    index: int
    trajectory: Trajectory
    frenet: Optional[CurvatureProfile]
    extremal: Optional[CurvatureProfile]
    energy_drift: float
    route_difference: float
    skipped: Optional[str] = None

    def summary(self) -> Dict[str, Any]:
        entry: Dict[str, Any] = {
            "index": self.index,
            "x0": self.trajectory.points[0],
            "lambda0": self.trajectory.covectors[0],
            "normalized": self.trajectory.normalized,
            "energyDrift": self.energy_drift,
        }
        if self.skipped:
            entry["skipped"] = self.skipped
            return entry
        entry["frenet"] = self.frenet.verdict.to_dict()
        entry["extremal"] = self.extremal.verdict.to_dict()
        entry["routeDifference"] = self.route_difference
        return entry


@dataclass
class RunOutcome:
    experiment: str
    model: str
    reports: List[CheckReport]
    summaries: List[Dict[str, Any]]
    report_path: Path
    elapsed: float
    files: List[Path] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports)


def build_model(config: ExperimentConfig) -> SubmersionModel:
    """Registry model, or a step-2 Carnot model from inline structure constants.

    Inline models are not required to be bracket generating so that the
    step-2 decomposition check can report the deficiency.
    """
    if config.model is not None:
        return get_model(config.model)
    c = structure_constants_from_entries(config.structure_constants, config.n, config.m)
    deficient = bracket_deficiency(c)
    if deficient.shape[1]:
        logger.warning(f"[{config.name}] structure constants miss {deficient.shape[1]} vertical direction(s)")
    return step2_carnot(c, config.n, config.m, name=config.name, require_bracket_generating=False)


class ExperimentRunner:
    """Runs trajectories and checks for one model."""

    def __init__(
        self,
        model: SubmersionModel,
        name: str,
        seed: int,
        tolerances: ToleranceConfig,
        T: float,
        h: float,
        probes: int = VERIFY_PROBES,
        normalize: bool = True,
        workers: int = 1,
        show_progress: bool = True,
    ) -> None:
        self.model = model
        self.name = name
        self.seed = int(seed)
        self.tolerances = tolerances
        self.T = float(T)
        self.h = float(h)
        self.probes = int(probes)
        self.normalize = normalize
        self.workers = max(1, int(workers))
        self.show_progress = show_progress
        self._suites: Dict[CheckName, Callable[[np.random.Generator, float], CheckReport]] = {
            CheckName.MODEL_INVARIANTS: self._model_invariants,
            CheckName.THEOREM1: self._theorem1,
            CheckName.THEOREM2_PARALLEL: self._theorem2_parallel,
            CheckName.J2: self._j2,
            CheckName.RVRW_ORTHOGONALITY: self._rvrw,
            CheckName.DOT_KAPPA: self._dot_kappa,
            CheckName.HTYPE: self._htype,
            CheckName.LOCAL_CONDITION_D: self._local_condition_d,
            CheckName.R2: self._r2,
            CheckName.PARALLEL_CURVATURE: self._parallel_curvature,
            CheckName.CYCLIC_COVDERIV: self._cyclic_covderiv,
            CheckName.TRANSVERSE_SYMMETRIES: self._transverse_symmetries,
            CheckName.VERTICAL_ABELIAN: self._vertical_abelian,
            CheckName.NONDEGENERATE: self._nondegenerate,
            CheckName.STEP2_DECOMPOSITION: self._step2_decomposition,
            CheckName.NORMALIZATION_IDENTITY: self._normalization_identity,
            CheckName.COMPARE_PROJECTIONS: self._compare_projections,
        }

    @classmethod
    def from_config(
        cls,
        config: ExperimentConfig,
        tolerance_overrides: Optional[Dict[str, float]] = None,
        seed: Optional[int] = None,
        workers: int = 1,
        show_progress: bool = True,
    ) -> "ExperimentRunner":
        tolerances = config.tolerance_config().with_overrides(tolerance_overrides)
        return cls(
            build_model(config),
            config.name,
            config.seed if seed is None else seed,
            tolerances,
            config.T,
            config.h,
            probes=config.probes,
            normalize=config.normalize,
            workers=workers,
            show_progress=show_progress,
        )

    # ------------------------------------------------------------------
    # Initial conditions
    # ------------------------------------------------------------------

    def initial_conditions(self, entries: List[Dict[str, Any]], random_count: int) -> List[PhaseState]:
        """Listed ICs first, then `random_count` seeded random ones."""
        model = self.model
        states: List[PhaseState] = []
        for index, entry in enumerate(entries):
            x0 = model.validate_points(entry["x0"])
            if "lambda0" in entry:
                lam0 = as_chart_array(entry["lambda0"], model.chart_dim, f"initial_conditions[{index}].lambda0")
            else:
                alpha = np.asarray(entry["alpha"], dtype=float)
                if alpha.shape == (model.vertical_dim,):
                    alpha = AnnihilatorCovector(alpha)
                lam0 = extremal_covector(model, x0, alpha, entry["v"])
            states.append(PhaseState(x0, lam0))

        if random_count:
            rng = derived_rng(self.seed, IC_STREAM)
            x0 = model.random_points(rng, random_count)
            b = rng.normal(size=(random_count, model.vertical_dim))
            a = random_unit_coefficients(rng, random_count, model.n)
            lam0 = extremal_covector_from_coefficients(model, x0, b, a)
            states.extend(PhaseState(x, lam) for x, lam in zip(x0, lam0))
        return states

    # ------------------------------------------------------------------
    # Trajectories
    # ------------------------------------------------------------------

    def integrate(self, states: List[PhaseState]) -> List[Trajectory]:
        if not states:
            return []
        x0 = np.stack([s.x for s in states])
        lam0 = np.stack([s.lam for s in states])
        return integrate_normal_geodesics(self.model, x0, lam0, self.T, self.h, normalize=self.normalize)

    def _process(self, index: int, traj: Trajectory, out_dir: Optional[Path]) -> TrajectoryResult:
        model = self.model
        drift = energy_drift(model, traj)
        if out_dir is not None:
            write_trajectory_csv(self._path(out_dir, index, "trajectory"), traj.times, traj.points, traj.covectors)

        speed = float(np.linalg.norm(traj.velocities[0]))
        if speed < ZERO_SPEED:
            logger.info(f"[{self.name}] IC {index}: vertical covector, projection is a point")
            return TrajectoryResult(index, traj, None, None, drift, 0.0, skipped="vertical initial covector")

        base = project_trajectory(model, traj)
        frenet = frenet_curvatures(model, base, self.tolerances.kappa_constant, self.tolerances.kappa_vanish)
        extremal = kappa_via_extremal(model, traj, self.tolerances.kappa_constant, self.tolerances.kappa_vanish)
        route = float(np.max(np.abs(frenet.kappa1 - extremal.kappa1)))
        if out_dir is not None:
            write_curvature_csv(
                self._path(out_dir, index, "curvature"), base.times, base.points, frenet.kappa1, frenet.kappa2
            )
        return TrajectoryResult(index, traj, frenet, extremal, drift, route)

    def _path(self, out_dir: Path, index: int, kind: str) -> Path:
        return out_dir / f"{self.name}_ic{index:03d}_{kind}.csv"

    def process_trajectories(self, trajectories: List[Trajectory], out_dir: Optional[Path] = None) -> List[TrajectoryResult]:
        results: Dict[int, TrajectoryResult] = {}
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            futures = {executor.submit(self._process, i, traj, out_dir): i for i, traj in enumerate(trajectories)}
            with tqdm(total=len(futures), desc=f"{self.name} ICs", unit="ic", disable=not self.show_progress) as pbar:
                for future in as_completed(futures):
                    results[futures[future]] = future.result()
                    pbar.update(1)
        return [results[i] for i in sorted(results)]

    # ------------------------------------------------------------------
    # Checks
    # ------------------------------------------------------------------

    def run_checks(self, checks: List[CheckName], results: List[TrajectoryResult]) -> List[CheckReport]:
        order = sorted(CheckName, key=lambda c: c.value)
        reports = []
        for check in sorted(set(checks), key=lambda c: c.value):
            tolerance = self.tolerances.for_check(check)
            if check in self._suites:
                rng = derived_rng(self.seed, order.index(check))
                try:
                    report = self._suites[check](rng, tolerance)
                except GeometryError as e:
                    logger.error(f"[{self.name}] {check.value}: {e}")
                    report = build_check_report(
                        check.value, [np.inf], tolerance if tolerance is not None else 0.0, details={"error": str(e)}
                    )
            else:
                report = self._trajectory_check(check, results, tolerance)
            logger.info(f"[{self.name}] {check.value}: {'pass' if report.passed else 'FAIL'} "
                        f"(max residual {report.max_residual:.3e}, tolerance {report.tolerance:.1e})")
            reports.append(report)
        return merge_reports(reports)

    def _trajectory_check(self, check: CheckName, results: List[TrajectoryResult], tolerance: float) -> CheckReport:
        curved = [r for r in results if r.skipped is None]
        if check == CheckName.ENERGY_DRIFT:
            residuals = [r.energy_drift for r in results]
            witnesses = [{"ic": r.index} for r in results]
        elif check == CheckName.KAPPA1_CONSTANT:
            residuals = [0.0 if r.frenet.verdict.geodesic else r.frenet.verdict.kappa1_rel_std for r in curved]
            witnesses = [{"ic": r.index, "kappa1Mean": r.frenet.verdict.kappa1_mean} for r in curved]
        elif check == CheckName.KAPPA2_VANISHING:
            residuals = [0.0 if r.frenet.verdict.geodesic else r.frenet.verdict.kappa2_max for r in curved]
            witnesses = [{"ic": r.index} for r in curved]
        elif check == CheckName.ROUTE_AGREEMENT:
            residuals = [r.route_difference for r in curved]
            witnesses = [{"ic": r.index} for r in curved]
        else:
            raise InputError(f"no suite for check '{check.value}'")
        return build_check_report(check.value, residuals, tolerance, witnesses, details={"T": self.T, "h": self.h})

    def _probes(self, rng: np.random.Generator) -> Probes:
        return sample_probes(self.model, rng, self.probes)

    def _residual_report(self, check: CheckName, probes: Probes, residuals, tolerance: float) -> CheckReport:
        witnesses = [probes.witness(i) for i in range(len(probes))]
        return build_check_report(check.value, residuals, tolerance, witnesses)

    def _point_report(self, check: CheckName, points: np.ndarray, residuals, tolerance: float) -> CheckReport:
        return build_check_report(check.value, residuals, tolerance, [{"point": p} for p in points])

    def _model_invariants(self, rng, tolerance):
        return validate_model(self.model, self.model.random_points(rng, self.probes), tolerance)

    def _theorem1(self, rng, tolerance):
        p = self._probes(rng)
        return check_theorem1(self.model, p.points, p.alphas, p.vs, self.T, self.h, tolerance)

    def _theorem2_parallel(self, rng, tolerance):
        p = self._probes(rng)
        return check_theorem2_parallel(self.model, p.points, p.alphas, p.vs, self.T, self.h, tolerance)

    def _j2(self, rng, tolerance):
        p = self._probes(rng)
        return self._residual_report(CheckName.J2, p, check_j2(self.model, p.points, p.alphas, p.vs), tolerance)

    def _rvrw(self, rng, tolerance):
        p = self._probes(rng)
        residuals = check_rvrw_orthogonality(self.model, p.points, p.alphas, p.vs, p.ws)
        return self._residual_report(CheckName.RVRW_ORTHOGONALITY, p, residuals, tolerance)

    def _dot_kappa(self, rng, tolerance):
        p = self._probes(rng)
        return self._residual_report(CheckName.DOT_KAPPA, p, check_dot_kappa(self.model, p.points, p.alphas, p.vs), tolerance)

    def _htype(self, rng, tolerance):
        p = self._probes(rng)
        return check_htype(self.model, p.points, p.alphas, p.betas, tolerance)

    def _local_condition_d(self, rng, tolerance):
        return check_local_condition_d(self.model, self.model.random_points(rng, self.probes), tolerance)

    def _r2(self, rng, tolerance):
        """Base curvature identity with w a unit vector in span{u, v}."""
        k = self.model.base_sectional_curvature or 0.0
        n = self.model.n
        u = random_unit_coefficients(rng, self.probes, n)
        v = random_unit_coefficients(rng, self.probes, n)
        angle = rng.uniform(0.0, 2.0 * np.pi, size=(self.probes, 1))
        w = np.cos(angle) * u + np.sin(angle) * v
        w = w / np.linalg.norm(w, axis=-1, keepdims=True)
        residuals = check_r2(constant_curvature_tensor(k), u, v, w)
        witnesses = [{"u": u[i], "v": v[i], "w": w[i]} for i in range(self.probes)]
        return build_check_report(CheckName.R2.value, residuals, tolerance, witnesses, details={"sectionalCurvature": k})

    def _parallel_curvature(self, rng, tolerance):
        p = self._probes(rng)
        residuals = parallel_curvature_residuals(self.model, p.points, p.vs, p.ws, p.us)
        return self._residual_report(CheckName.PARALLEL_CURVATURE, p, residuals, tolerance)

    def _cyclic_covderiv(self, rng, tolerance):
        p = self._probes(rng)
        residuals = cyclic_cov_deriv_residuals(self.model, p.points, p.us, p.vs, p.ws)
        return self._residual_report(CheckName.CYCLIC_COVDERIV, p, residuals, tolerance)

    def _transverse_symmetries(self, rng, tolerance):
        points = self.model.random_points(rng, self.probes)
        return self._point_report(
            CheckName.TRANSVERSE_SYMMETRIES, points, transverse_symmetry_residuals(self.model, points), tolerance
        )

    def _vertical_abelian(self, rng, tolerance):
        points = self.model.random_points(rng, self.probes)
        return self._point_report(
            CheckName.VERTICAL_ABELIAN, points, vertical_abelian_residuals(self.model, points), tolerance
        )

    def _nondegenerate(self, rng, tolerance):
        return check_nondegenerate(self.model, self.model.random_points(rng, self.probes))

    def _step2_decomposition(self, rng, tolerance):
        return check_step2_decomposition(self.model, self.model.random_points(rng, self.probes))

    def _normalization_identity(self, rng, tolerance):
        p = self._probes(rng)
        residuals = [
            normalization_identity_residual(
                self.model, p.points[i], AnnihilatorCovector(p.alphas[i]), NORMALIZATION_TRIALS, rng
            )
            for i in range(len(p))
        ]
        return self._residual_report(CheckName.NORMALIZATION_IDENTITY, p, residuals, tolerance)

    def _compare_projections(self, rng, tolerance):
        model = self.model
        count = min(self.probes, COMPARE_PROBES)
        points = model.random_points(rng, count)
        b = rng.normal(size=(count, model.vertical_dim))
        a = random_unit_coefficients(rng, count, model.n)
        lam0 = extremal_covector_from_coefficients(model, points, b, a)
        residuals = [compare_projections(model, PhaseState(x, lam), self.T, self.h) for x, lam in zip(points, lam0)]
        witnesses = [{"point": points[i], "lambda0": lam0[i]} for i in range(count)]
        return build_check_report(CheckName.COMPARE_PROJECTIONS.value, residuals, tolerance, witnesses)

    # ------------------------------------------------------------------
    # Full runs
    # ------------------------------------------------------------------

    def execute(
        self,
        checks: List[CheckName],
        states: List[PhaseState],
        out_dir: Path,
        extra: Optional[Dict[str, Any]] = None,
    ) -> RunOutcome:
        """Integrate, post-process, check and write everything under out_dir."""
        started = time.perf_counter()
        started_at = datetime.now(timezone.utc).isoformat()
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"[{self.name}] model '{self.model.name}' (n={self.model.n}, m={self.model.m}), "
                    f"{len(states)} IC(s), {len(checks)} check(s), T={self.T}, h={self.h}")

        results = self.process_trajectories(self.integrate(states), out_dir)
        reports = self.run_checks(checks, results)
        elapsed = time.perf_counter() - started

        document: Dict[str, Any] = {
            "experiment": self.name,
            "model": self.model.name,
            "modelInfo": self.model.describe(),
            "seed": self.seed,
            "parameters": {"T": self.T, "h": self.h, "probes": self.probes, "normalize": self.normalize},
            "tolerances": self.tolerances.to_dict(),
            "checks": [report.to_dict() for report in reports],
            "trajectories": [r.summary() for r in results],
            "pass": all(report.passed for report in reports),
            "timing": {"startedAt": started_at, "elapsedSeconds": elapsed},
        }
        if extra:
            document.update(extra)
        report_path = write_report_json(out_dir / "report.json", document)
        files = [self._path(out_dir, r.index, kind) for r in results for kind in ("trajectory", "curvature")
                 if kind == "trajectory" or r.skipped is None]
        return RunOutcome(self.name, self.model.name, reports, [r.summary() for r in results], report_path, elapsed, files)


def run_experiment(
    config: ExperimentConfig,
    cli_out: Optional[str] = None,
    tolerance_overrides: Optional[Dict[str, float]] = None,
    seed: Optional[int] = None,
    workers: int = 1,
    show_progress: bool = True,
) -> RunOutcome:
    runner = ExperimentRunner.from_config(config, tolerance_overrides, seed, workers, show_progress)
    states = runner.initial_conditions(config.initial_conditions, config.random_ics)
    checks = [CheckName.from_string(c) for c in config.checks]
    return runner.execute(checks, states, config.resolve_output_dir(cli_out))


def verify_model(
    model_name: str,
    out_base: Path,
    tolerance_overrides: Optional[Dict[str, float]] = None,
    seed: int = 0,
    workers: int = 1,
    show_progress: bool = True,
    T: float = VERIFY_T,
    h: float = VERIFY_H,
    ics: int = VERIFY_ICS,
    probes: int = VERIFY_PROBES,
) -> RunOutcome:
    """Every check with defaults on a registered model; report in <out>/verify_<model>/."""
    model = get_model(model_name)
    tolerances = ToleranceConfig().with_overrides(tolerance_overrides)
    runner = ExperimentRunner(
        model, f"verify_{model.name}", seed, tolerances, T, h, probes=probes, workers=workers, show_progress=show_progress
    )
    states = runner.initial_conditions([], ics)
    return runner.execute(CheckName.verify_defaults(), states, Path(out_base) / runner.name)
