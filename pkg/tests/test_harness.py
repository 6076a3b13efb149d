"""Tests for convergence studies, scheme comparisons and soliton checks."""

import json
import math
from pathlib import Path

import pytest

from manakov_solver.config import (
    ExperimentConfig,
    GridConfig,
    LadderConfig,
    RunConfig,
    SolverConfig,
    apply_overrides,
)
from manakov_solver.harness import (
    NO_REFERENCE,
    ExperimentRunner,
    LevelResult,
    emit_csv,
    run_convergence_study,
    run_scheme_comparison,
    run_soliton_check,
)
from manakov_solver.metrics import NormKind


def small_config(schemes: list[str] | None = None, **run: object) -> ExperimentConfig:
    """A ladder of 4, 8 and 16 steps on a coarse grid."""
    return ExperimentConfig(
        name="small",
        grid=GridConfig(half_width=20.0, interior_points=63),
        ladder=LadderConfig(horizon=0.25, n_coarse=4, levels=2),
        solver=SolverConfig(schemes=schemes or ["crank_nicolson", "split_step"]),
        run=RunConfig(seeds=[1, 2], **run),  # type: ignore[arg-type]
    )


def read_tree(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


class TestConvergenceStudy:
    """Tests for run_convergence_study."""

    def test_rows(self) -> None:
        """Test one row per scheme, seed and level."""
        report = run_convergence_study(small_config())
        assert len(report.rows) == 2 * 2 * 3
        rows = report.rows_for("crank_nicolson")
        assert [(r.seed, r.level) for r in rows] == [
            (1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2),
        ]
        assert [r.dt for r in rows[:3]] == [0.25 / 4, 0.25 / 8, 0.25 / 16]
        assert all(r.completed for r in report.rows)
        assert not report.excluded
        assert not report.reference_failures

    def test_finest_level_has_zero_error(self) -> None:
        """Test the reference rows report zero error."""
        report = run_convergence_study(small_config())
        for row in report.rows:
            if row.level == 2:
                assert (row.err_l2, row.err_linf, row.err_h1max) == (0.0, 0.0, 0.0)
            else:
                assert row.err_l2 > 0
                assert row.err_h1max > 0

    def test_fits(self) -> None:
        """Test every norm is fitted from the coarse levels."""
        report = run_convergence_study(small_config())
        for scheme in ("crank_nicolson", "split_step"):
            for kind in NormKind:
                assert report.fit(scheme, kind) is not None
                assert report.series[scheme][kind.value].dts == (0.25 / 4, 0.25 / 8)
            assert set(report.seed_fits[scheme]) == {1, 2}

    def test_emit(self, tmp_path) -> None:
        """Test the CSV and JSON outputs."""
        report = run_convergence_study(small_config(["crank_nicolson"]))
        paths = emit_csv(report, tmp_path)
        names = {p.name for p in paths}
        assert "convergence_crank_nicolson.csv" in names
        assert "order_crank_nicolson_L2rel.csv" in names
        assert "timeseries_crank_nicolson_seed2_level1.csv" in names
        assert "report.json" in names

        lines = (tmp_path / "convergence_crank_nicolson.csv").read_text().splitlines()
        assert lines[0] == "seed,level,dt,err_L2,err_Linf,err_H1max,status"
        assert len(lines) == 1 + 2 * 3
        assert lines[3].endswith(",0,0,0,completed")

        data = json.loads((tmp_path / "report.json").read_text())
        assert data["kind"] == "convergence_study"
        assert data["config_hash"] == small_config(["crank_nicolson"]).config_hash()
        assert "slope" in data["fits"]["crank_nicolson"]["L2rel"]

    def test_emitted_bytes_are_deterministic(self, tmp_path) -> None:
        """Test two runs of the same config write identical files."""
        config = small_config(["split_step"])
        run_convergence_study(config).emit(tmp_path / "a")
        run_convergence_study(config).emit(tmp_path / "b")
        assert read_tree(tmp_path / "a") == read_tree(tmp_path / "b")

    def test_workers_match_serial(self, tmp_path) -> None:
        """Test a process pool gives the same outputs as a serial run."""
        serial = small_config(["crank_nicolson"])
        parallel = apply_overrides(serial, ["run.workers=2"])
        run_convergence_study(serial).emit(tmp_path / "serial")
        run_convergence_study(parallel).emit(tmp_path / "parallel")
        a, b = read_tree(tmp_path / "serial"), read_tree(tmp_path / "parallel")
        assert a.keys() == b.keys()
        for name in a:
            if name != "report.json":
                assert a[name] == b[name], name

    def test_failed_reference(self) -> None:
        """Test coarser levels are skipped when the reference run fails."""
        config = apply_overrides(small_config(["euler_ito"]), ["solver.overflow_cap=1e-3"])
        report = run_convergence_study(config)
        statuses = {(r.seed, r.level): r.status for r in report.rows}
        assert statuses[(1, 2)] == "overflow"
        assert statuses[(1, 0)] == statuses[(1, 1)] == NO_REFERENCE
        assert len(report.reference_failures) == 2
        assert report.fit("euler_ito") is None
        assert len(report.excluded) == 6

    def test_records_carry_final_errors(self) -> None:
        """Test each run record holds the errors of its row."""
        report = run_convergence_study(small_config(["crank_nicolson"]))
        assert len(report.records) == 2 * 3
        rows = {(row.seed, row.level): row for row in report.rows}
        for level, record in report.records:
            row = rows[(record.seed, level)]
            assert record.final_errors == {
                "L2rel": row.err_l2,
                "LInfRel": row.err_linf,
                "H1": row.err_h1max,
            }
            if level == 2:
                assert set(record.final_errors.values()) == {0.0}
            else:
                assert record.final_errors["L2rel"] > 0

    def test_single_level_ladder(self) -> None:
        """Test levels=0 runs only the reference, with zero errors and no fit."""
        config = apply_overrides(small_config(["split_step"]), ["ladder.levels=0"])
        report = run_convergence_study(config)
        assert [(row.seed, row.level, row.n_steps) for row in report.rows] == [(1, 0, 4), (2, 0, 4)]
        for row in report.rows:
            assert row.completed
            assert (row.err_l2, row.err_linf, row.err_h1max) == (0.0, 0.0, 0.0)
        for kind in NormKind:
            assert report.fit("split_step", kind) is None

    def test_deviations_note_shared_times(self) -> None:
        """Test the report states H1max is taken over the coarse-grid times."""
        report = run_convergence_study(small_config(["crank_nicolson"]))
        assert report.deviations == small_config().deviations()
        assert any(note.startswith("err_H1max: max over the 4 times") for note in report.deviations)

    def test_level_result_error(self) -> None:
        """Test errors are looked up by norm kind."""
        row = LevelResult("split_step", 1, 0, 4, 0.25, 1.0, 2.0, 3.0, "completed")
        assert row.error(NormKind.L2REL) == 1.0
        assert row.error(NormKind.LINFREL) == 2.0
        assert row.error(NormKind.H1) == 3.0


class TestSchemeComparison:
    """Tests for run_scheme_comparison."""

    def test_rows(self) -> None:
        """Test each scheme is compared at the default comparison step."""
        table = run_scheme_comparison(small_config(["crank_nicolson", "relaxation", "split_step"]))
        assert table.n_steps == 8
        assert table.dt == pytest.approx(0.25 / 8)
        assert table.seed == 1
        assert table.reference_completed
        assert table.reference_steps == 16
        assert [row.scheme for row in table.rows] == ["crank_nicolson", "relaxation", "split_step"]
        assert table.row("split_step").mass_drift <= 1e-12
        assert table.row("relaxation").mass_drift <= 1e-10
        assert table.row("crank_nicolson").mass_drift <= 1e-9
        for row in table.rows:
            assert row.err2 > 0
            assert row.wall_seconds > 0

    def test_reference_against_itself(self) -> None:
        """Test the reference scheme at the reference step has zero error."""
        config = small_config(["crank_nicolson"], comparison_steps=16)
        table = run_scheme_comparison(config, seed=5)
        row = table.row("crank_nicolson")
        assert table.seed == 5
        assert row.err2 == 0.0
        assert row.err_inf == 0.0
        for _, record in table.records:
            assert record.final_errors == {"L2rel": 0.0, "LInfRel": 0.0, "H1": 0.0}

    def test_records_carry_final_errors(self) -> None:
        """Test compared records hold err2, errInf and the final H1 distance."""
        table = run_scheme_comparison(small_config(["crank_nicolson", "split_step"]))
        reference, *compared = table.records
        assert reference[0] == 2
        assert reference[1].final_errors["L2rel"] == 0.0
        for (level, record), row in zip(compared, table.rows):
            assert level == 1
            assert record.scheme == row.scheme
            assert record.final_errors["L2rel"] == row.err2
            assert record.final_errors["LInfRel"] == row.err_inf
            assert record.final_errors["H1"] > 0

    def test_emit(self, tmp_path) -> None:
        """Test comparison outputs, snapshots included."""
        config = small_config(["crank_nicolson", "split_step"], snapshot_every=4)
        table = run_scheme_comparison(config)
        runner_paths = table.emit(tmp_path)
        names = {p.name for p in runner_paths}
        assert {"comparison.csv", "comparison_report.json"} <= names
        assert "snapshot_split_step_n4.csv" in names
        assert "snapshot_crank_nicolson_n8.csv" in names
        assert "timeseries_crank_nicolson_seed1_level2.csv" in names

        lines = (tmp_path / "comparison.csv").read_text().splitlines()
        assert lines[0] == "scheme,err2,errInf,massDrift,wallSeconds"
        assert [line.split(",")[0] for line in lines[1:]] == ["crank_nicolson", "split_step"]

        data = json.loads((tmp_path / "comparison_report.json").read_text())
        assert data["reference_status"] == "completed"
        assert "wallSeconds" not in data["rows"][0]

    def test_overflowing_scheme(self) -> None:
        """Test a failing scheme is reported without stopping the comparison."""
        config = apply_overrides(
            small_config(["crank_nicolson", "euler_ito"]), ["solver.overflow_cap=1e-3"]
        )
        table = run_scheme_comparison(config)
        row = table.row("euler_ito")
        assert row.status == "overflow"
        assert row.failed_step == 1
        assert math.isnan(row.err2)
        assert table.row("crank_nicolson").status == "completed"
        assert table.to_dict()["rows"][1]["err2"] is None


class TestSolitonCheck:
    """Tests for run_soliton_check."""

    def test_check(self, tmp_path) -> None:
        """Test the deterministic check runs every scheme and writes its files."""
        check = run_soliton_check(small_config(["crank_nicolson", "relaxation"]), [8, 4])
        assert check.completed
        assert [r.scheme for r in check.reports] == ["crank_nicolson", "relaxation"]
        assert check.report("relaxation").dts == [0.25 / 4, 0.25 / 8]

        names = {p.name for p in check.emit(tmp_path)}
        assert names == {
            "soliton_crank_nicolson.csv",
            "soliton_relaxation.csv",
            "soliton_report.json",
        }
        header = (tmp_path / "soliton_relaxation.csv").read_text().splitlines()[0]
        assert header == "dt,err_L2,err_Linf,peak_drift,status"

    def test_defaults_to_ladder(self) -> None:
        """Test the ladder step counts are used by default."""
        check = run_soliton_check(small_config(["split_step"]))
        assert check.report("split_step").dts == [0.25 / 4, 0.25 / 8, 0.25 / 16]


class TestExperimentRunner:
    """Tests for the experiment runner."""

    def test_runner_writes_everything(self, tmp_path) -> None:
        """Test the runner saves the config and every report."""
        config = small_config(["relaxation"])
        runner = ExperimentRunner(config=config, output_directory=tmp_path)
        saved = runner.save_config()
        assert ExperimentConfig.load(saved) == config
        runner.converge()
        runner.compare()
        runner.soliton_check([4, 8])
        for name in ("report.json", "comparison.csv", "soliton_report.json"):
            assert (tmp_path / name).exists()
