#!/usr/bin/env python3
"""
Summary Display
===============
Rich tables for check reports, trajectory verdicts, models and checks.
"""

from typing import Any, Dict, Iterable, List, Optional

from rich.box import SIMPLE
from rich.console import Console
from rich.table import Table
from rich.text import Text

from src.config import CheckName
from src.reports import CheckReport
from src.utils import format_duration, format_residual


def _status(passed: bool) -> Text:
    return Text("pass", style="green bold") if passed else Text("FAIL", style="red bold")


def checks_table(reports: Iterable[CheckReport], title: str = "Checks") -> Table:
    table = Table(title=title, show_header=True, header_style="bold", box=SIMPLE, padding=(0, 1))
    table.add_column("Check", style="white")
    table.add_column("Samples", justify="right", style="dim")
    table.add_column("Max residual", justify="right", style="cyan")
    table.add_column("Tolerance", justify="right", style="dim")
    table.add_column("Status")
    for report in reports:
        table.add_row(
            report.check_name,
            str(report.samples),
            format_residual(report.max_residual),
            format_residual(report.tolerance),
            _status(report.passed),
        )
    return table


def trajectories_table(summaries: List[Dict[str, Any]], title: str = "Trajectories") -> Table:
    """One row per initial condition from the runner's trajectory summaries."""
    table = Table(title=title, show_header=True, header_style="bold", box=SIMPLE, padding=(0, 1))
    table.add_column("IC", justify="right", style="dim")
    table.add_column("kappa1 mean", justify="right", style="cyan")
    table.add_column("kappa1 rel std", justify="right")
    table.add_column("kappa2 max", justify="right")
    table.add_column("Route diff", justify="right")
    table.add_column("Energy drift", justify="right", style="dim")
    for summary in summaries:
        frenet = summary.get("frenet", {})
        table.add_row(
            str(summary["index"]),
            f"{frenet.get('kappa1Mean', float('nan')):.6g}",
            format_residual(frenet.get("kappa1RelStd", float("nan"))),
            format_residual(frenet.get("kappa2Max", float("nan"))),
            format_residual(summary.get("routeDifference", float("nan"))),
            format_residual(summary.get("energyDrift", float("nan"))),
        )
    return table


def models_table(descriptions: Dict[str, str], dims: Dict[str, Dict[str, int]]) -> Table:
    table = Table(show_header=True, header_style="bold", box=SIMPLE, padding=(0, 1))
    table.add_column("Model", style="white")
    table.add_column("n", justify="right")
    table.add_column("m", justify="right")
    table.add_column("Description", style="dim")
    for name in sorted(descriptions):
        table.add_row(name, str(dims[name]["n"]), str(dims[name]["m"]), descriptions[name])
    return table


def check_names_table() -> Table:
    table = Table(show_header=True, header_style="bold", box=SIMPLE, padding=(0, 1))
    table.add_column("Check", style="white")
    table.add_column("Tolerance", style="cyan")
    table.add_column("Description", style="dim")
    for check in sorted(CheckName, key=lambda c: c.value):
        table.add_row(check.value, check.tolerance_kind.value, check.description)
    return table


def print_run_summary(
    experiment: str,
    reports: List[CheckReport],
    summaries: List[Dict[str, Any]],
    elapsed: Optional[float] = None,
    console: Optional[Console] = None,
) -> None:
    console = console or Console()
    console.print("=" * 70)
    heading = f"{experiment}"
    if elapsed is not None:
        heading += f"  ({format_duration(elapsed)})"
    console.print(Text(heading, style="bold"))
    console.print("=" * 70)
    if summaries:
        console.print(trajectories_table(summaries))
    if reports:
        console.print(checks_table(reports))
    failed = [r.check_name for r in reports if not r.passed]
    if failed:
        console.print(f"❌ {len(failed)} check(s) failed: {', '.join(failed)}")
    else:
        console.print(f"✅ all {len(reports)} check(s) passed")
