#!/usr/bin/env python3
"""
srgeodesics - Unified Entry Point
=================================
Projections of sub-Riemannian geodesics: integrate normal geodesics of
built-in or configured submersions, measure the geodesic curvatures of their
projections and verify the curvature criteria.

Usage Examples:
    # Run every experiment section of a config file
    python srgeodesics.py run config/heisenberg_demo.yaml

    # Full check suite on a built-in model
    python srgeodesics.py verify heisenberg --seed 7
    python srgeodesics.py --tol-numeric 1e-6 verify hopf

    # Listings
    python srgeodesics.py list-models
    python srgeodesics.py list-checks

Exit codes: 0 all checks passed, 1 a check failed, 2 configuration or input
error, 3 numerical failure (divergence, degenerate geometry along a flow).
"""

import argparse
import logging
import sys
from typing import Dict, List, Optional

from dotenv import load_dotenv
from rich.console import Console

from src.config import DEFAULT_SEED, SystemConfig, load_experiments
from src.exceptions import (
    ConfigError,
    DivergenceError,
    GeometryError,
    InputError,
    ModelConstructionError,
    NumericalError,
)

# Load environment
load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


class SRGeodesicsCLI:
    """Unified CLI for experiments and model verification."""

    def __init__(self, args, console: Optional[Console] = None):
        """Initialize CLI with parsed arguments."""
        self.args = args
        self.console = console or Console()
        self.system = SystemConfig()
        self.seed = args.seed
        self.show_progress = not getattr(args, "no_progress", False)
        self.workers = getattr(args, "workers", None) or self.system.workers

    def tolerance_overrides(self) -> Dict[str, float]:
        """--tol-* flags as ToleranceConfig overrides."""
        overrides = {}
        if self.args.tol_algebraic is not None:
            overrides["algebraic"] = self.args.tol_algebraic
        if self.args.tol_numeric is not None:
            overrides["numeric"] = self.args.tol_numeric
        return overrides

    def run(self) -> int:
        """Execute the requested command and map failures to exit codes."""
        command = self.args.command
        try:
            if command == "run":
                return self.run_experiments()
            elif command == "verify":
                return self.run_verify()
            elif command == "list-models":
                return self.list_models()
            elif command == "list-checks":
                return self.list_checks()
            else:
                print(f"❌ Unknown command: {command}")
                return EXIT_INPUT
        except (ConfigError, InputError, ModelConstructionError) as e:
            logger.error(str(e))
            print(f"❌ {e}")
            return EXIT_INPUT
        except DivergenceError as e:
            logger.error(str(e))
            print(f"❌ Integration diverged: {e}")
            return EXIT_NUMERICAL
        except (NumericalError, GeometryError) as e:
            logger.error(str(e))
            print(f"❌ Numerical failure: {e}")
            return EXIT_NUMERICAL

    # ========================================
    # Commands
    # ========================================

    def run_experiments(self) -> int:
        from src.experiment_runner import run_experiment
        from src.summary_display import print_run_summary

        experiments = load_experiments(self.args.config)
        overrides = self.tolerance_overrides()
        failed: List[str] = []
        for config in experiments:
            outcome = run_experiment(
                config,
                cli_out=self.args.out,
                tolerance_overrides=overrides,
                seed=self.seed,
                workers=self.workers,
                show_progress=self.show_progress,
            )
            print_run_summary(outcome.experiment, outcome.reports, outcome.summaries, outcome.elapsed, self.console)
            print(f"📄 Report: {outcome.report_path}")
            if not outcome.passed:
                failed.append(outcome.experiment)

        if failed:
            print(f"❌ Failed experiments: {', '.join(failed)}")
            return EXIT_CHECK_FAILED
        print(f"✅ {len(experiments)} experiment(s) passed")
        return EXIT_OK

    def run_verify(self) -> int:
        from src.experiment_runner import verify_model
        from src.models import MODEL_NAMES
        from src.summary_display import print_run_summary

        if self.args.model not in MODEL_NAMES:
            print(f"❌ Unknown model: {self.args.model}")
            print(f"   Valid models: {', '.join(MODEL_NAMES)}")
            return EXIT_INPUT

        out_base = self.args.out or self.system.output_dir
        outcome = verify_model(
            self.args.model,
            out_base,
            tolerance_overrides=self.tolerance_overrides(),
            seed=DEFAULT_SEED if self.seed is None else self.seed,
            workers=self.workers,
            show_progress=self.show_progress,
            T=self.args.T,
            h=self.args.h,
            ics=self.args.ics,
            probes=self.args.probes,
        )
        print_run_summary(outcome.experiment, outcome.reports, outcome.summaries, outcome.elapsed, self.console)
        print(f"📄 Report: {outcome.report_path}")
        return EXIT_OK if outcome.passed else EXIT_CHECK_FAILED

    def list_models(self) -> int:
        from src.models import MODEL_DESCRIPTIONS, get_model
        from src.summary_display import models_table

        dims = {}
        for name in MODEL_DESCRIPTIONS:
            model = get_model(name)
            dims[name] = {"n": model.n, "m": model.m}
        self.console.print(models_table(MODEL_DESCRIPTIONS, dims))
        return EXIT_OK

    def list_checks(self) -> int:
        from src.summary_display import check_names_table

        self.console.print(check_names_table())
        return EXIT_OK


GLOBAL_DEFAULTS = {
    "tol_algebraic": None,
    "tol_numeric": None,
    "seed": None,
    "out": None,
    "log_level": None,
    "workers": None,
    "no_progress": False,
}


def common_options() -> argparse.ArgumentParser:
    """Options accepted both before and after the command.

    Defaults are suppressed so a value given on either side survives; main()
    fills in GLOBAL_DEFAULTS for anything left unset.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--tol-algebraic', type=float, default=argparse.SUPPRESS, help='Tolerance for algebraic identities (default 1e-10)')
    common.add_argument('--tol-numeric', type=float, default=argparse.SUPPRESS, help='Tolerance for integrated checks (default 1e-5)')
    common.add_argument('--seed', type=int, default=argparse.SUPPRESS, help='Seed for random initial conditions and probes')
    common.add_argument('--out', default=argparse.SUPPRESS, help='Output directory (overrides SRGEO_OUTPUT_DIR and config)')
    common.add_argument('--log-level', default=argparse.SUPPRESS, help='Logging level (default from SRGEO_LOG_LEVEL or INFO)')
    common.add_argument('--workers', type=int, default=argparse.SUPPRESS, help='Threads for per-IC post-processing')
    common.add_argument('--no-progress', action='store_true', default=argparse.SUPPRESS, help='Hide progress bars')
    return common


def create_parser():
    """Create argument parser."""
    common = common_options()
    parser = argparse.ArgumentParser(
        parents=[common],
        description="srgeodesics - projections of sub-Riemannian geodesics and their curvature criteria",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python srgeodesics.py run config/heisenberg_demo.yaml
  python srgeodesics.py --out ./results run config/product_heisenberg_htype.yaml
  python srgeodesics.py verify heisenberg --seed 7
  python srgeodesics.py verify hopf --ics 25 --T 3
  python srgeodesics.py list-models
  python srgeodesics.py list-checks
        """
    )

    # Subcommands
    subparsers = parser.add_subparsers(dest='command', help='Command to execute')

    run_parser = subparsers.add_parser('run', parents=[common], help='Run the experiments of a config file')
    run_parser.add_argument('config', help='YAML config file')

    verify_parser = subparsers.add_parser('verify', parents=[common], help='Run every check on a built-in model')
    verify_parser.add_argument('model', help='Model name (see list-models)')
    verify_parser.add_argument('--T', type=float, default=2.0, help='Integration horizon (default 2.0)')
    verify_parser.add_argument('--step', dest='h', type=float, default=1e-3, help='RK4 step (default 1e-3)')
    verify_parser.add_argument('--ics', type=int, default=20, help='Random initial conditions (default 20)')
    verify_parser.add_argument('--probes', type=int, default=50, help='Random probes per check (default 50)')

    subparsers.add_parser('list-models', parents=[common], help='List built-in models')
    subparsers.add_parser('list-checks', parents=[common], help='List check names')

    return parser


def configure_logging(level: Optional[str]) -> None:
    """Configure root logging the same way for every command."""
    level = (level or SystemConfig().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = create_parser()
    args = parser.parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)

    if not args.command:
        parser.print_help()
        return EXIT_INPUT

    try:
        configure_logging(args.log_level)
        cli = SRGeodesicsCLI(args)
    except ConfigError as e:
        print(f"❌ {e}")
        return EXIT_INPUT
    return cli.run()


if __name__ == "__main__":
    sys.exit(main())
