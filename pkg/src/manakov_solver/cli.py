"""Command-line interface for the stochastic Manakov solvers."""

from __future__ import annotations

import functools
import logging
import sys
from collections.abc import Callable
from typing import Any

import click
import numpy as np

from . import __version__
from .config import (
    ExperimentConfig,
    Scheme,
    apply_overrides,
    load_config,
    resolve_output_directory,
    with_schemes,
)
from .errors import ConfigError, NumericalFailure
from .harness import ExperimentRunner
from .noise import coarsen, sample_path
from .propagator import save_spectrum_csv

EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

PRESETS: dict[str, Callable[[], ExperimentConfig]] = {
    "desk": ExperimentConfig.desk,
    "full_scale": ExperimentConfig.full_scale,
}


def _build_config(
    config_file: str | None,
    seed: int | None,
    schemes: tuple[str, ...],
    overrides: tuple[str, ...],
) -> ExperimentConfig:
    """Config file (or the desk preset), then overrides, then --scheme and --seed."""
    try:
        config = load_config(config_file) if config_file else ExperimentConfig.desk()
    except OSError as e:
        raise ConfigError(f"config: cannot read {config_file} ({e.strerror})") from e
    if overrides:
        config = apply_overrides(config, list(overrides))
    if schemes:
        config = with_schemes(config, [Scheme.from_name(s).scheme_name for s in schemes])
    if seed is not None:
        config = apply_overrides(config, [f"run.seeds=[{seed}]"])
    config.validate()
    return config


def experiment_options(command: Callable[..., None]) -> Callable[..., None]:
    """Options shared by every experiment command."""
    options = [
        click.option(
            "--config", "-c", "config_file",
            type=click.Path(dir_okay=False),
            help="JSON experiment file (defaults to the desk preset)",
        ),
        click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Run a single seed"),
        click.option("--out", "-o", type=click.Path(file_okay=False), help="Output directory"),
        click.option(
            "--scheme", "-s", "schemes",
            multiple=True,
            type=click.Choice(Scheme.list_schemes()),
            help="Restrict to a scheme (repeatable)",
        ),
        click.option(
            "--override", "overrides",
            multiple=True,
            metavar="SECTION.FIELD=VALUE",
            help="Override a config field (repeatable)",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def handle_errors(command: Callable[..., None]) -> Callable[..., None]:
    """Map configuration errors to exit 1 and numerical failures to exit 2."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        try:
            command(*args, **kwargs)
        except ConfigError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_CONFIG)
        except NumericalFailure as e:
            click.echo(f"Numerical failure: {e}", err=True)
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def _runner(
    config_file: str | None,
    seed: int | None,
    out: str | None,
    schemes: tuple[str, ...],
    overrides: tuple[str, ...],
) -> ExperimentRunner:
    config = _build_config(config_file, seed, schemes, overrides)
    output = resolve_output_directory(config, out)
    click.echo(f"Experiment: {config.name}")
    click.echo(f"Output directory: {output}")
    runner = ExperimentRunner(config=config, output_directory=output)
    runner.save_config()
    return runner


def _fmt_fit(slope: float | None) -> str:
    return "n/a" if slope is None else f"{slope:.3f}"


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Log every step's fixed-point iterations")
def main(verbose: bool) -> None:
    """Stochastic Manakov solvers.

    Conservative time stepping for the Manakov system with
    polarisation-mode-dispersion noise, and the convergence
    experiments built on it.
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@main.command()
@experiment_options
@handle_errors
def converge(
    config_file: str | None,
    seed: int | None,
    out: str | None,
    schemes: tuple[str, ...],
    overrides: tuple[str, ...],
) -> None:
    """Measure convergence orders on a dyadic ladder of time steps.

    Example:

        manakov converge --config scripts/desk.json --out results
    """
    runner = _runner(config_file, seed, out, schemes, overrides)
    report = runner.converge()

    click.echo("\nFitted orders (seed-mean error):")
    for scheme, fits in sorted(report.fits.items()):
        slopes = ", ".join(
            f"{kind} {_fmt_fit(None if fit is None else fit.slope)}"
            for kind, fit in sorted(fits.items())
        )
        click.echo(f"  {scheme}: {slopes}")
    if report.excluded:
        click.echo(f"\n{len(report.excluded)} runs excluded from fits (see report.json)")
    if report.reference_failures:
        for failure in report.reference_failures:
            click.echo(f"Reference run failed: {failure}", err=True)
        sys.exit(EXIT_NUMERICAL)


@main.command()
@experiment_options
@handle_errors
def compare(
    config_file: str | None,
    seed: int | None,
    out: str | None,
    schemes: tuple[str, ...],
    overrides: tuple[str, ...],
) -> None:
    """Compare every scheme on one Brownian path against a fine reference."""
    runner = _runner(config_file, seed, out, schemes, overrides)
    table = runner.compare()

    click.echo(f"\nSeed {table.seed}, dt = {table.dt:.6g} ({table.n_steps} steps)")
    click.echo(f"{'scheme':<16}{'err2':>12}{'errInf':>12}{'massDrift':>12}{'seconds':>10}")
    for row in sorted(table.rows, key=lambda r: r.scheme):
        click.echo(
            f"{row.scheme:<16}{row.err2:>12.4e}{row.err_inf:>12.4e}"
            f"{row.mass_drift:>12.4e}{row.wall_seconds:>10.2f}"
            + ("" if row.status == "completed" else f"  ({row.status})")
        )
    if not table.reference_completed:
        click.echo(f"Reference run failed: {table.reference_status}", err=True)
        sys.exit(EXIT_NUMERICAL)


@main.command("soliton-check")
@experiment_options
@click.option(
    "--resolutions", "-r",
    help="Comma-separated step counts (defaults to the ladder)",
)
@handle_errors
def soliton_check(
    config_file: str | None,
    seed: int | None,
    out: str | None,
    schemes: tuple[str, ...],
    overrides: tuple[str, ...],
    resolutions: str | None,
) -> None:
    """Validate the schemes against the exact soliton without noise."""
    steps = None
    if resolutions:
        try:
            steps = [int(part) for part in resolutions.split(",") if part.strip()]
        except ValueError as e:
            raise ConfigError(f"--resolutions: expected integers, got {resolutions!r}") from e
    runner = _runner(config_file, seed, out, schemes, overrides)
    check = runner.soliton_check(steps)

    for report in check.reports:
        slope = None if report.fit is None else report.fit.slope
        click.echo(f"\n{report.scheme}: fitted order {_fmt_fit(slope)}")
        for dt, err, drift, status in zip(
            report.dts, report.l2_errors, report.peak_drifts, report.statuses
        ):
            click.echo(f"  dt={dt:.6g}  L2 error {err:.4e}  peak drift {drift:.3g}  {status}")
    if not check.completed:
        sys.exit(EXIT_NUMERICAL)


@main.command("path-dump")
@experiment_options
@click.option("--level", "-l", type=int, help="Coarsen to this ladder level (default: finest)")
@handle_errors
def path_dump(
    config_file: str | None,
    seed: int | None,
    out: str | None,
    schemes: tuple[str, ...],
    overrides: tuple[str, ...],
    level: int | None,
) -> None:
    """Write the Brownian path of each seed as a binary dump."""
    config = _build_config(config_file, seed, schemes, overrides)
    ladder = config.ladder
    if level is None:
        level = ladder.levels
    if not 0 <= level <= ladder.levels:
        raise ConfigError(f"--level: must be between 0 and {ladder.levels}")
    output = resolve_output_directory(config, out)

    for s in config.run.seeds:
        path = sample_path(s, ladder.n_fine, ladder.horizon / ladder.n_fine)
        path = coarsen(path, 2 ** (ladder.levels - level))
        filepath = path.save(output / f"path_seed{s}_level{level}.bin")
        total = ", ".join(f"{w:.6f}" for w in path.total)
        click.echo(
            f"seed {s}: level {level}, {path.n_steps} steps (coarsening {path.coarsening}), "
            f"W(T) = ({total}) -> {filepath}"
        )


@main.command()
@experiment_options
@click.option("--step", type=int, default=0, help="Time step of the path whose draws are used")
@click.option("--points", type=int, default=512, help="Number of wavenumbers")
@handle_errors
def spectrum(
    config_file: str | None,
    seed: int | None,
    out: str | None,
    schemes: tuple[str, ...],
    overrides: tuple[str, ...],
    step: int,
    points: int,
) -> None:
    """Dump |det| of the step operator symbol over the grid's wavenumbers."""
    config = _build_config(config_file, seed, schemes, overrides)
    ladder = config.ladder
    dt = ladder.horizon / ladder.n_fine
    s = config.run.seeds[0]
    path = sample_path(s, ladder.n_fine, dt)
    if not 0 <= step < path.n_steps:
        raise ConfigError(f"--step: must be between 0 and {path.n_steps - 1}")
    xi_max = np.pi / config.grid.grid().dx
    xis = np.linspace(0.0, xi_max, points)
    output = resolve_output_directory(config, out)
    filepath = save_spectrum_csv(
        output / f"spectrum_seed{s}_step{step}.csv", xis, dt, config.solver.gamma, path.chi[step]
    )
    click.echo(f"Spectrum saved to: {filepath}")


@main.command("create-config")
@click.argument("output_file", type=click.Path(dir_okay=False))
@click.option(
    "--preset", "-p",
    type=click.Choice(sorted(PRESETS)),
    default="desk",
    help="Configuration preset",
)
def create_config(output_file: str, preset: str) -> None:
    """Create an experiment file from a preset.

    Example:

        manakov create-config my_study.json --preset desk
        # Edit my_study.json as needed
        manakov converge --config my_study.json
    """
    config = PRESETS[preset]()
    config.save(output_file)
    click.echo(f"Configuration template saved to: {output_file}")
    click.echo("Edit this file to customize the experiment, then run:")
    click.echo(f"  manakov converge --config {output_file}")


@main.command()
def schemes() -> None:
    """List available time-stepping schemes."""
    click.echo("\nAvailable schemes:")
    click.echo("=" * 50)
    for scheme in Scheme:
        click.echo(f"\n  {scheme.scheme_name}")
        click.echo(f"    {scheme.description}")
    click.echo("\n" + "=" * 50)
    click.echo("\nUse with: manakov converge --scheme <name>")


if __name__ == "__main__":
    main()
