"""Experiment orchestration: convergence ladders, scheme comparisons and soliton checks."""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, TypeVar

import numpy as np

from .analytic import DeterministicReport, soliton_field, validate_deterministic
from .config import ExperimentConfig, Scheme
from .errors import ConfigError
from .field import Field
from .metrics import (
    ErrorSeries,
    NormKind,
    OrderFit,
    fit_order,
    h1_error,
    mass_drift,
    relative_error,
)
from .noise import BrownianPath, coarsen, sample_path
from .records import RunRecord, StepEvent
from .schemes import evolve

logger = logging.getLogger(__name__)

T = TypeVar("T")

NO_REFERENCE = "no_reference"


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _json_float(value: float) -> float | None:
    return value if math.isfinite(value) else None


def _fit_dict(fit: OrderFit | None) -> dict[str, float] | None:
    return None if fit is None else vars(fit).copy()


def _run_tasks(fn: Callable[..., T], tasks: Sequence[tuple[Any, ...]], workers: int) -> list[T]:
    """Run ``fn(*task)`` for every task; results come back in submission order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(fn, *task) for task in tasks]
        return [future.result() for future in futures]


@dataclass
class SnapshotCollector:
    """Observer keeping every snapshot it is handed, keyed by step."""

    fields: dict[int, Field] = field(default_factory=dict)

    def __call__(self, event: StepEvent) -> None:
        if event.snapshot is not None:
            self.fields[event.step] = event.snapshot


def _timeseries_name(record: RunRecord, level: int) -> str:
    return f"timeseries_{record.scheme}_seed{record.seed}_level{level}.csv"


# --- convergence study ---


@dataclass(frozen=True)
class LevelResult:
    """One (scheme, seed, level) row of a convergence study."""

    scheme: str
    seed: int
    level: int
    n_steps: int
    dt: float
    err_l2: float
    err_linf: float
    err_h1max: float
    status: str
    failed_step: int | None = None

    @property
    def completed(self) -> bool:
        return self.status == "completed"

    def error(self, kind: NormKind) -> float:
        return {
            NormKind.L2REL: self.err_l2,
            NormKind.LINFREL: self.err_linf,
            NormKind.H1: self.err_h1max,
        }[kind]


@dataclass
class _SeedResult:
    rows: list[LevelResult]
    records: list[tuple[int, RunRecord]]
    reference_failure: str | None = None


def _final_errors(err_l2: float, err_linf: float, err_h1: float) -> dict[str, float]:
    return {
        NormKind.L2REL.value: err_l2,
        NormKind.LINFREL.value: err_linf,
        NormKind.H1.value: err_h1,
    }


def _converge_seed(config: ExperimentConfig, scheme: Scheme, seed: int) -> _SeedResult:
    """Fine reference plus every coarser level of one scheme on one Brownian path."""
    ladder = config.ladder
    levels = ladder.levels
    grid = config.grid.grid()
    x0 = soliton_field(0.0, grid, config.soliton)
    config_hash = config.config_hash()
    fine = sample_path(seed, ladder.n_fine, ladder.horizon / ladder.n_fine)
    name = scheme.scheme_name

    rows: list[LevelResult] = []
    records: list[tuple[int, RunRecord]] = []
    reference: RunRecord | None = None
    ref_fields: dict[int, Field] = {}

    for level in range(levels, -1, -1):
        path = coarsen(fine, 2 ** (levels - level))
        stride = 2**level  # steps between times shared by every level
        cfg = replace(config.scheme_config(scheme, path.n_steps, x0), snapshot_every=stride)

        if reference is not None and not reference.completed:
            rows.append(
                LevelResult(name, seed, level, path.n_steps, cfg.dt, *[math.nan] * 3, NO_REFERENCE)
            )
            continue

        collector = SnapshotCollector()
        record = evolve(x0, path, cfg, [collector], config_hash=config_hash)
        aligned = {step // stride: f for step, f in collector.fields.items()}

        if reference is None:
            zero = 0.0 if record.completed else math.nan
            record = replace(record, final_errors=_final_errors(zero, zero, zero))
            records.append((level, record))
            reference, ref_fields = record, aligned
            rows.append(
                LevelResult(
                    name, seed, level, path.n_steps, cfg.dt, zero, zero, zero,
                    record.status.value, record.failed_step,
                )
            )
            if not record.completed:
                logger.warning("%s reference run failed for seed %d", name, seed)
            continue

        if record.completed:
            final_ref = reference.final_field
            err_l2 = relative_error(record.final_field, final_ref, 2, x0)
            err_linf = relative_error(record.final_field, final_ref, "inf", x0)
            err_h1 = max(
                (h1_error(aligned[n], ref_fields[n]) for n in aligned if n in ref_fields),
                default=0.0,
            )
        else:
            err_l2 = err_linf = err_h1 = math.nan
        record = replace(record, final_errors=_final_errors(err_l2, err_linf, err_h1))
        records.append((level, record))
        rows.append(
            LevelResult(
                name, seed, level, path.n_steps, cfg.dt, err_l2, err_linf, err_h1,
                record.status.value, record.failed_step,
            )
        )
        logger.info(
            "%s seed %d level %d (N=%d): L2 error %.3e", name, seed, level, path.n_steps, err_l2
        )

    failure = None
    if reference is not None and not reference.completed:
        failure = (
            f"{name} seed {seed}: reference run {reference.status.value} "
            f"at step {reference.failed_step}"
        )
    rows.sort(key=lambda row: row.level)
    return _SeedResult(rows, records, failure)


def _fit_levels(
    rows: Sequence[LevelResult], kind: NormKind
) -> tuple[ErrorSeries | None, OrderFit | None]:
    """Seed-mean error per coarse level over completed runs, and its order fit."""
    by_level: dict[int, list[float]] = {}
    dts: dict[int, float] = {}
    finest = max((row.level for row in rows), default=0)
    for row in rows:
        if row.level == finest or not row.completed:
            continue
        value = row.error(kind)
        if math.isfinite(value):
            by_level.setdefault(row.level, []).append(value)
            dts[row.level] = row.dt
    levels = sorted(by_level)
    if len(levels) < 2:
        return None, None
    series = ErrorSeries(
        tuple(dts[level] for level in levels),
        tuple(float(np.mean(by_level[level])) for level in levels),
        kind,
    )
    if min(series.errors) <= 0:
        return series, None
    return series, fit_order(series)


@dataclass
class StudyReport:
    """Rows, order fits and exclusions of a convergence study."""

    name: str
    config_hash: str
    rows: list[LevelResult]
    series: dict[str, dict[str, ErrorSeries]]
    fits: dict[str, dict[str, OrderFit | None]]
    seed_fits: dict[str, dict[int, dict[str, OrderFit | None]]]
    excluded: list[str]
    reference_failures: list[str]
    deviations: list[str]
    records: list[tuple[int, RunRecord]] = field(default_factory=list, repr=False)

    def fit(self, scheme: str, kind: NormKind = NormKind.L2REL) -> OrderFit | None:
        return self.fits.get(scheme, {}).get(kind.value)

    def rows_for(self, scheme: str) -> list[LevelResult]:
        rows = [row for row in self.rows if row.scheme == scheme]
        return sorted(rows, key=lambda row: (row.seed, row.level))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "convergence_study",
            "name": self.name,
            "config_hash": self.config_hash,
            "fits": {
                scheme: {kind: _fit_dict(fit) for kind, fit in fits.items()}
                for scheme, fits in self.fits.items()
            },
            "seed_fits": {
                scheme: {
                    str(seed): {kind: _fit_dict(fit) for kind, fit in fits.items()}
                    for seed, fits in per_seed.items()
                }
                for scheme, per_seed in self.seed_fits.items()
            },
            "excluded": sorted(self.excluded),
            "reference_failures": sorted(self.reference_failures),
            "deviations": self.deviations,
        }

    def emit(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for scheme in sorted({row.scheme for row in self.rows}):
            filepath = directory / f"convergence_{scheme}.csv"
            with open(filepath, "w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(
                    ["seed", "level", "dt", "err_L2", "err_Linf", "err_H1max", "status"]
                )
                for row in self.rows_for(scheme):
                    writer.writerow(
                        [
                            row.seed,
                            row.level,
                            _fmt(row.dt),
                            _fmt(row.err_l2),
                            _fmt(row.err_linf),
                            _fmt(row.err_h1max),
                            row.status,
                        ]
                    )
            written.append(filepath)
            for kind, series in sorted(self.series.get(scheme, {}).items()):
                written.append(
                    series.save_csv(
                        directory / f"order_{scheme}_{kind}.csv", self.fits[scheme].get(kind)
                    )
                )
        for level, record in sorted(self.records, key=lambda r: (r[1].scheme, r[1].seed, r[0])):
            written.append(record.save_timeseries_csv(directory / _timeseries_name(record, level)))
        report_path = directory / "report.json"
        report_path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(report_path)
        return written


def run_convergence_study(config: ExperimentConfig) -> StudyReport:
    """Run every (scheme, seed) ladder and fit convergence orders."""
    config.validate()
    kinds = [NormKind.from_name(name) for name in config.run.norm_kinds]
    tasks = [(config, scheme, seed) for scheme in config.schemes for seed in config.run.seeds]
    logger.info(
        "convergence study '%s': %d schemes x %d seeds, N = %s",
        config.name,
        len(config.schemes),
        len(config.run.seeds),
        config.ladder.steps(),
    )
    results = _run_tasks(_converge_seed, tasks, config.run.workers)

    rows: list[LevelResult] = []
    records: list[tuple[int, RunRecord]] = []
    failures: list[str] = []
    for result in results:
        rows.extend(result.rows)
        records.extend(result.records)
        if result.reference_failure:
            failures.append(result.reference_failure)

    excluded = [
        f"{row.scheme} seed {row.seed} level {row.level}: {row.status}"
        + (f" at step {row.failed_step}" if row.failed_step is not None else "")
        for row in rows
        if not row.completed
    ]
    for message in excluded:
        logger.warning("excluded from fits: %s", message)

    series: dict[str, dict[str, ErrorSeries]] = {}
    fits: dict[str, dict[str, OrderFit | None]] = {}
    seed_fits: dict[str, dict[int, dict[str, OrderFit | None]]] = {}
    for scheme in config.schemes:
        name = scheme.scheme_name
        scheme_rows = [row for row in rows if row.scheme == name]
        series[name], fits[name], seed_fits[name] = {}, {}, {}
        for kind in kinds:
            s, fit = _fit_levels(scheme_rows, kind)
            if s is not None:
                series[name][kind.value] = s
            fits[name][kind.value] = fit
        for seed in config.run.seeds:
            seed_rows = [row for row in scheme_rows if row.seed == seed]
            seed_fits[name][seed] = {kind.value: _fit_levels(seed_rows, kind)[1] for kind in kinds}
        l2_fit = fits[name].get(NormKind.L2REL.value)
        if l2_fit is not None:
            logger.info("%s: fitted L2 order %.3f", name, l2_fit.slope)

    return StudyReport(
        name=config.name,
        config_hash=config.config_hash(),
        rows=rows,
        series=series,
        fits=fits,
        seed_fits=seed_fits,
        excluded=excluded,
        reference_failures=failures,
        deviations=config.deviations(),
        records=records,
    )


# --- scheme comparison ---


@dataclass(frozen=True)
class ComparisonRow:
    """Final-time errors against the fine reference, mass drift and wall time of one scheme."""

    scheme: str
    err2: float
    err_inf: float
    mass_drift: float
    wall_seconds: float
    status: str
    failed_step: int | None = None


def _compare_scheme(
    config: ExperimentConfig,
    scheme: Scheme,
    path: BrownianPath,
    x0: Field,
    reference: Field | None,
) -> tuple[ComparisonRow, RunRecord, dict[int, Field]]:
    cfg = config.scheme_config(scheme, path.n_steps, x0)
    collector = SnapshotCollector()
    record = evolve(x0, path, cfg, [collector], config_hash=config.config_hash())
    if record.completed and reference is not None:
        err2 = relative_error(record.final_field, reference, 2, x0)
        err_inf = relative_error(record.final_field, reference, "inf", x0)
        err_h1 = h1_error(record.final_field, reference)
    else:
        err2 = err_inf = err_h1 = math.nan
    record = replace(record, final_errors=_final_errors(err2, err_inf, err_h1))
    row = ComparisonRow(
        scheme.scheme_name,
        err2,
        err_inf,
        mass_drift(record),
        record.wall_seconds,
        record.status.value,
        record.failed_step,
    )
    logger.info(
        "%s: err2 %.3e, mass drift %.3e, %.2f s",
        row.scheme,
        row.err2,
        row.mass_drift,
        row.wall_seconds,
    )
    return row, record, collector.fields


@dataclass
class ComparisonTable:
    """All schemes on one fixed Brownian path and time step."""

    name: str
    config_hash: str
    seed: int
    n_steps: int
    dt: float
    level: int
    reference_scheme: str
    reference_steps: int
    reference_status: str
    rows: list[ComparisonRow]
    deviations: list[str]
    records: list[tuple[int, RunRecord]] = field(default_factory=list, repr=False)
    snapshots: dict[str, dict[int, Field]] = field(default_factory=dict, repr=False)

    @property
    def reference_completed(self) -> bool:
        return self.reference_status == "completed"

    def row(self, scheme: str) -> ComparisonRow:
        for row in self.rows:
            if row.scheme == scheme:
                return row
        raise KeyError(scheme)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "scheme_comparison",
            "name": self.name,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "n_steps": self.n_steps,
            "dt": self.dt,
            "reference_scheme": self.reference_scheme,
            "reference_steps": self.reference_steps,
            "reference_status": self.reference_status,
            "rows": [
                {
                    "scheme": row.scheme,
                    "err2": _json_float(row.err2),
                    "errInf": _json_float(row.err_inf),
                    "massDrift": _json_float(row.mass_drift),
                    "status": row.status,
                    "failed_step": row.failed_step,
                }
                for row in sorted(self.rows, key=lambda r: r.scheme)
            ],
            "deviations": self.deviations,
        }

    def emit(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        filepath = directory / "comparison.csv"
        with open(filepath, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["scheme", "err2", "errInf", "massDrift", "wallSeconds"])
            for row in sorted(self.rows, key=lambda r: r.scheme):
                writer.writerow(
                    [
                        row.scheme,
                        _fmt(row.err2),
                        _fmt(row.err_inf),
                        _fmt(row.mass_drift),
                        _fmt(row.wall_seconds),
                    ]
                )
        written = [filepath]
        for level, record in sorted(self.records, key=lambda r: (r[1].scheme, r[0])):
            written.append(record.save_timeseries_csv(directory / _timeseries_name(record, level)))
        for scheme, fields_by_step in sorted(self.snapshots.items()):
            for step, snapshot in sorted(fields_by_step.items()):
                written.append(snapshot.save_csv(directory / f"snapshot_{scheme}_n{step}.csv"))
        report_path = directory / "comparison_report.json"
        report_path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(report_path)
        return written


def run_scheme_comparison(config: ExperimentConfig, seed: int | None = None) -> ComparisonTable:
    """Every configured scheme at the comparison step against the fine reference scheme."""
    config.validate()
    seed = config.run.seeds[0] if seed is None else seed
    ladder = config.ladder
    n_steps = config.comparison_steps
    if len(config.schemes) < 2:
        logger.warning("comparison with a single scheme: %s", config.solver.schemes)

    grid = config.grid.grid()
    x0 = soliton_field(0.0, grid, config.soliton)
    fine = sample_path(seed, ladder.n_fine, ladder.horizon / ladder.n_fine)
    ref_scheme = config.reference_scheme
    logger.info("reference %s run, N=%d, seed %d", ref_scheme.scheme_name, fine.n_steps, seed)
    reference = evolve(
        x0, fine, config.scheme_config(ref_scheme, fine.n_steps, x0),
        config_hash=config.config_hash(),
    )
    zero = 0.0 if reference.completed else math.nan
    reference = replace(reference, final_errors=_final_errors(zero, zero, zero))
    if not reference.completed:
        logger.warning("reference run %s at step %s", reference.status.value, reference.failed_step)
    ref_field = reference.final_field if reference.completed else None

    path = coarsen(fine, ladder.n_fine // n_steps)
    tasks = [(config, scheme, path, x0, ref_field) for scheme in config.schemes]
    results = _run_tasks(_compare_scheme, tasks, config.run.workers)

    level = config.comparison_level
    records = [(ladder.levels, reference)] + [(level, record) for _, record, _ in results]
    snapshots = {row.scheme: fields for row, _, fields in results if fields}
    return ComparisonTable(
        name=config.name,
        config_hash=config.config_hash(),
        seed=seed,
        n_steps=n_steps,
        dt=path.dt,
        level=level,
        reference_scheme=ref_scheme.scheme_name,
        reference_steps=fine.n_steps,
        reference_status=reference.status.value,
        rows=[row for row, _, _ in results],
        deviations=config.deviations(),
        records=records,
        snapshots=snapshots,
    )


# --- deterministic soliton check ---


@dataclass
class SolitonCheck:
    """Deterministic (gamma = 0) soliton validation of every configured scheme."""

    name: str
    config_hash: str
    reports: list[DeterministicReport]

    @property
    def completed(self) -> bool:
        return all(report.completed for report in self.reports)

    def report(self, scheme: str) -> DeterministicReport:
        for report in self.reports:
            if report.scheme == scheme:
                return report
        raise KeyError(scheme)

    def to_dict(self) -> dict[str, Any]:
        reports = []
        for report in sorted(self.reports, key=lambda r: r.scheme):
            data = report.to_dict()
            for key in ("l2_errors", "linf_errors", "peak_drifts"):
                data[key] = [_json_float(v) for v in data[key]]
            reports.append(data)
        return {
            "kind": "soliton_check",
            "name": self.name,
            "config_hash": self.config_hash,
            "reports": reports,
        }

    def emit(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        written = []
        for report in sorted(self.reports, key=lambda r: r.scheme):
            filepath = directory / f"soliton_{report.scheme}.csv"
            with open(filepath, "w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(["dt", "err_L2", "err_Linf", "peak_drift", "status"])
                for values in zip(
                    report.dts,
                    report.l2_errors,
                    report.linf_errors,
                    report.peak_drifts,
                    report.statuses,
                ):
                    writer.writerow([*(_fmt(v) for v in values[:4]), values[4]])
                if report.fit is not None:
                    f.write(f"# slope={report.fit.slope:.17g}\n")
            written.append(filepath)
        report_path = directory / "soliton_report.json"
        report_path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        written.append(report_path)
        return written


def run_soliton_check(
    config: ExperimentConfig, resolutions: Sequence[int] | None = None
) -> SolitonCheck:
    """Validate each scheme against the exact soliton at gamma = 0 over the horizon."""
    config.validate()
    resolutions = sorted(set(resolutions)) if resolutions else config.ladder.steps()
    if resolutions[0] < 1:
        raise ConfigError(f"resolutions: step counts must be >= 1, got {resolutions}")
    deterministic = replace(config, solver=replace(config.solver, gamma=0.0, guard=False))
    reports = []
    for scheme in config.schemes:
        cfg = deterministic.scheme_config(scheme, resolutions[0])
        reports.append(
            validate_deterministic(cfg, config.soliton, config.ladder.horizon, resolutions)
        )
    return SolitonCheck(config.name, config.config_hash(), reports)


Report = StudyReport | ComparisonTable | SolitonCheck


def emit_csv(report: Report, directory: str | Path) -> list[Path]:
    """Write a report's CSV files and JSON summary into ``directory``."""
    paths = report.emit(directory)
    logger.info("wrote %d files to %s", len(paths), directory)
    return paths


@dataclass
class ExperimentRunner:
    """Runs experiments of one configuration and writes their outputs."""

    config: ExperimentConfig
    output_directory: Path

    def converge(self) -> StudyReport:
        report = run_convergence_study(self.config)
        emit_csv(report, self.output_directory)
        return report

    def compare(self, seed: int | None = None) -> ComparisonTable:
        table = run_scheme_comparison(self.config, seed)
        emit_csv(table, self.output_directory)
        return table

    def soliton_check(self, resolutions: Sequence[int] | None = None) -> SolitonCheck:
        check = run_soliton_check(self.config, resolutions)
        emit_csv(check, self.output_directory)
        return check

    def save_config(self) -> Path:
        """Store the effective configuration next to the outputs."""
        filepath = self.output_directory / "config.json"
        self.config.save(filepath)
        return filepath
