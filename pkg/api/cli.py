from pathlib import Path
from typing import List, Optional, Sequence

import click
import typer
from rich.console import Console
from rich.table import Table

from core.config import VERSION
from core.exceptions import ToolkitError, VerificationError
from core.logger import configure_logging, get_logger
from services.io import parse_config
from services.laplace import convergence_ratio, laplace_validate
from services.runner import RunOutcome, run_optimization
from services.verification import CHECKS, run_verification

app = typer.Typer(name="pftopo", help="Phase-field topology optimization for elastic eigenvalues.",
                  add_completion=False, no_args_is_help=True)
console = Console()
logger = get_logger(__name__)


def _version(value: bool) -> None:
    if value:
        console.print(f"pftopo {VERSION}")
        raise typer.Exit()


@app.callback()
def main(
    version: bool = typer.Option(False, "--version", callback=_version, is_eager=True,
                                 help="Show the version and exit."),
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Override PFTOPO_LOG_LEVEL."),
    log_json: Optional[bool] = typer.Option(None, "--log-json/--log-console", help="Log rendering."),
):
    configure_logging(log_level, log_json)


def _report(outcome: RunOutcome) -> None:
    final = outcome.summary["final"]
    table = Table(title="optimization result", show_header=False)
    table.add_row("termination", outcome.summary["termination_reason"])
    table.add_row("iterations", str(outcome.summary["iterations"]))
    table.add_row("objective", f"{final['objective']:.9g}")
    table.add_row("eigenvalues", ", ".join(f"{v:.6g}" for v in final["lambdas"]) or "-")
    if "compliance" in final:
        table.add_row("compliance", f"{final['compliance']:.9g}")
    table.add_row("VI gap", f"{outcome.summary['vi_residual']:.3g}")
    table.add_row("output", str(outcome.directory))
    console.print(table)


@app.command("optimize-eigen")
def optimize_eigen(
    config: Path = typer.Argument(..., help="YAML run configuration"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Override output.directory"),
):
    """Minimize Ψ(λ's) + γE^ε over admissible phase fields."""
    _report(run_optimization(parse_config(config), combined=False, output_dir=output))


@app.command("optimize-combined")
def optimize_combined(
    config: Path = typer.Argument(..., help="YAML run configuration with a loads section"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Override output.directory"),
):
    """Minimize αF + βJ₀ + Ψ(λ's) + γE^ε over admissible phase fields."""
    _report(run_optimization(parse_config(config), combined=True, output_dir=output))


@app.command()
def verify(
    config: Path = typer.Argument(..., help="YAML run configuration"),
    check: Optional[List[str]] = typer.Option(None, "--check", "-c",
                                              help=f"Run only these checks: {', '.join(CHECKS)}"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Override optimizer.seed"),
):
    """Run the derivative and invariant suite; exits 1 if any check fails."""
    unknown = [name for name in check or [] if name not in CHECKS]
    if unknown:
        raise typer.BadParameter(f"unknown check(s): {', '.join(unknown)}", param_hint="--check")
    results = run_verification(parse_config(config), only=check, seed=seed)
    table = Table(title="verification")
    for column in ("check", "status", "seconds", "detail"):
        table.add_column(column)
    for r in results:
        status = "[green]pass[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.name, status, f"{r.seconds:.2f}", r.detail)
    console.print(table)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise VerificationError(failed)


@app.command("laplace-validate")
def laplace_validate_cmd(
    nx: int = typer.Argument(..., min=2, help="Cells per side of the unit square"),
    count: int = typer.Option(8, "--count", min=1, help="Nonzero eigenvalues to compare"),
    convergence: bool = typer.Option(False, "--convergence", help="Also report the error ratio against nx/2"),
    max_error: Optional[float] = typer.Option(None, "--max-error", help="Fail when a relative error exceeds this"),
):
    """Compare Neumann–Laplace eigenvalues of the unit square with π²(m² + n²)."""
    rows = laplace_validate(nx, count)
    table = Table(title=f"Neumann Laplacian, {nx}x{nx}")
    for column in ("(m, n)", "π²(m²+n²)", "observed", "rel. error"):
        table.add_column(column, justify="right")
    for r in rows:
        table.add_row(str(r.modes), f"{r.exact:.8g}", f"{r.observed:.8g}", f"{r.rel_error:.3e}")
    console.print(table)
    if convergence:
        ratio = convergence_ratio(laplace_validate(nx // 2, count), rows)
        console.print(f"error ratio {nx // 2}x{nx // 2} / {nx}x{nx}: {ratio:.3f}")
    worst = max(r.rel_error for r in rows)
    if max_error is not None and worst > max_error:
        raise VerificationError([f"laplace rel. error {worst:.3e} > {max_error:g}"])


def cli_main(argv: Sequence[str] | None = None) -> int:
    """Run the CLI and map failures to exit codes: 1 verification, 2 configuration, 3 numerical."""
    command = typer.main.get_command(app)
    try:
        result = command.main(args=list(argv) if argv is not None else None,
                              prog_name="pftopo", standalone_mode=False)
    except ToolkitError as e:
        console.print(f"[red]error:[/red] {e}")
        logger.error("cli.failed", error=type(e).__name__, exit_code=e.exit_code)
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        return 130
    return result if isinstance(result, int) else 0
