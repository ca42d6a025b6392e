import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from qamp.cli import main
from qamp.errors import ConfigError
from qamp.experiments import (
    ExperimentConfig,
    experiment_accuracy,
    experiment_corollaries,
    experiment_steps,
)
from qamp.optimize import ObjectiveTable, Sense, save_objective
from qamp.static_search import optimal_iterations


def read_lines(path):
    return Path(path).read_text(encoding="utf-8").splitlines()


def drop_wall_time(path):
    lines = read_lines(path)
    header = lines[0].split(",")
    assert header[-1] == "wall_time_ms"
    return [",".join(line.split(",")[:-1]) for line in lines]


class TestConfig:
    def test_validation_errors(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("nonsense").validate()
        with pytest.raises(ConfigError):
            ExperimentConfig("steps", seeds=0).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig("steps", n_range=(5, 25)).validate()
        with pytest.raises(ConfigError):
            ExperimentConfig("steps", fmt="pdf").validate()


class TestStepsExperiment:
    def test_small_sweep(self, tmp_path):
        config = ExperimentConfig(
            "steps", n_range=(6, 8), seeds=5, seed_base=3, output_dir=tmp_path
        )
        outcome = experiment_steps(config)
        assert [r.n for r in outcome.rows] == [6, 7, 8]
        for row in outcome.rows:
            # ball S >= n-1 has n+1 states
            assert row.static_steps == optimal_iterations(1 << row.n, row.n + 1)
            assert row.dynamic_inner_iterations == 2 * row.dynamic_rounds
        assert (tmp_path / "steps.csv").exists()
        assert (tmp_path / "steps_runs.csv").exists()
        assert (tmp_path / "steps.svg").exists()
        runs = read_lines(tmp_path / "steps_runs.csv")
        assert runs[0].split(",")[:3] == ["experiment", "n", "seed"]
        assert len(runs) == 1 + 3 * 5  # header + n values x seeds

    def test_single_target_small_case(self, tmp_path):
        # threshold n marks only the reference: one step at n=2
        config = ExperimentConfig(
            "steps", n_range=(2, 2), seeds=3, threshold=2, output_dir=tmp_path, fmt="csv"
        )
        outcome = experiment_steps(config)
        assert outcome.rows[0].static_steps == 1

    def test_seed_doubling_stability(self, tmp_path):
        base = dict(n_range=(10, 11), seed_base=0, output_dir=tmp_path, fmt="csv")
        few = experiment_steps(ExperimentConfig("steps", seeds=10, **base))
        many = experiment_steps(ExperimentConfig("steps", seeds=20, **base))
        for a, b in zip(few.rows, many.rows):
            assert abs(a.dynamic_rounds - b.dynamic_rounds) <= 1.0


class TestAccuracyExperiment:
    def test_small_run(self, tmp_path):
        config = ExperimentConfig(
            "accuracy", n=9, seeds=5, seed_base=1, output_dir=tmp_path
        )
        outcome = experiment_accuracy(config)
        assert outcome.p_static.shape == (10,)
        assert outcome.p_static.sum() == pytest.approx(1.0, abs=1e-6)
        assert outcome.p_dynamic.sum() == pytest.approx(1.0, abs=1e-6)
        assert (tmp_path / "accuracy.csv").exists()
        assert (tmp_path / "accuracy.svg").exists()
        lines = read_lines(tmp_path / "accuracy.csv")
        assert lines[0] == "S,p_static,p_dynamic"
        assert len(lines) == 11

    def test_static_arm_concentrates_on_ball(self, tmp_path):
        config = ExperimentConfig(
            "accuracy", n=9, seeds=2, output_dir=tmp_path, fmt="csv"
        )
        outcome = experiment_accuracy(config)
        assert outcome.p_static[8] + outcome.p_static[9] > 0.9


class TestCorollariesExperiment:
    def test_default_passes(self, tmp_path):
        config = ExperimentConfig(
            "corollaries", n_range=(2, 6), seeds=6, output_dir=tmp_path, fmt="csv"
        )
        report = experiment_corollaries(config)
        assert report.passed
        names = {r.check for r in report.results}
        assert "doubled-identity-none-selected" in names
        assert "reselection-ordering" in names
        assert "gain-ceiling" in names
        lines = read_lines(tmp_path / "corollaries.csv")
        assert lines[0] == "check,n,trials,max_deviation,tolerance,passed"

    def test_fault_injection_fails_ordering(self, tmp_path):
        config = ExperimentConfig(
            "corollaries",
            n_range=(3, 5),
            seeds=6,
            output_dir=tmp_path,
            fmt="csv",
            inject_fault=True,
        )
        report = experiment_corollaries(config)
        assert not report.passed
        failing = {r.check for r in report.results if not r.passed}
        assert failing == {"reselection-ordering"}


class TestReproducibility:
    def test_steps_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            config = ExperimentConfig(
                "steps", n_range=(5, 7), seeds=4, seed_base=9,
                output_dir=tmp_path / sub, fmt="csv",
            )
            experiment_steps(config)
        assert (tmp_path / "a/steps.csv").read_bytes() == (tmp_path / "b/steps.csv").read_bytes()
        assert drop_wall_time(tmp_path / "a/steps_runs.csv") == drop_wall_time(
            tmp_path / "b/steps_runs.csv"
        )

    def test_accuracy_byte_identical(self, tmp_path):
        for sub in ("a", "b"):
            config = ExperimentConfig(
                "accuracy", n=8, seeds=4, seed_base=2,
                output_dir=tmp_path / sub, fmt="csv",
            )
            experiment_accuracy(config)
        assert (tmp_path / "a/accuracy.csv").read_bytes() == (
            tmp_path / "b/accuracy.csv"
        ).read_bytes()


class TestSvgStructure:
    def test_valid_xml_one_polyline_per_series(self, tmp_path):
        config = ExperimentConfig(
            "steps", n_range=(4, 6), seeds=3, output_dir=tmp_path, fmt="svg"
        )
        experiment_steps(config)
        tree = ET.parse(tmp_path / "steps.svg")
        polylines = tree.getroot().findall(".//{http://www.w3.org/2000/svg}polyline")
        assert len(polylines) == 2  # static and dynamic series


class TestCli:
    def test_grover_deterministic(self, capsys):
        assert main(["grover", "--n", "6", "--marked", "9", "--seed", "5"]) == 0
        first = capsys.readouterr().out
        assert main(["grover", "--n", "6", "--marked", "9", "--seed", "5"]) == 0
        assert capsys.readouterr().out == first
        assert "outcome=9" in first

    def test_grover_unknown_m_not_found(self, tmp_path, capsys):
        # unknown-count schedule over an empty marked set: exit code 4
        rc = main(["grover", "--n", "5", "--marked", "", "--unknown-m", "--seed", "1"])
        assert rc == 4

    def test_dynamic_run_table(self, tmp_path, capsys):
        rc = main([
            "dynamic", "--n", "8", "--reference", "0", "--seed", "3",
            "--rounds", "6", "--out", str(tmp_path),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "p_selected" in out
        assert (tmp_path / "dynamic_rounds.csv").exists()
        assert (tmp_path / "dynamic_summary.csv").exists()
        assert (tmp_path / "dynamic_gain.svg").exists()

    def test_recommend_deterministic(self, tmp_path, capsys):
        args = [
            "recommend", "--n", "10", "--reference", "0", "--m", "5",
            "--seed", "7", "--out", str(tmp_path), "--format", "csv",
        ]
        assert main(args) == 0
        first = capsys.readouterr().out
        items = read_lines(tmp_path / "recommend_items.csv")
        assert main(args) == 0
        assert capsys.readouterr().out == first
        assert read_lines(tmp_path / "recommend_items.csv") == items
        assert len(items) == 6  # header + 5 items

    def test_recommend_under_amplified_exit(self, tmp_path):
        catalog = tmp_path / "catalog.txt"
        catalog.write_text("0\n1\n", encoding="utf-8")
        rc = main([
            "recommend", "--n", "8", "--reference", "0", "--m", "4",
            "--seed", "1", "--catalog", str(catalog),
        ])
        assert rc == 4

    def test_optimize_identity_table(self, tmp_path, capsys):
        path = tmp_path / "identity.obj"
        save_objective(path, ObjectiveTable(8, np.arange(256, dtype=float), Sense.MIN))
        rc = main([
            "optimize", "--objective", str(path), "--method", "durr-hoyer",
            "--seed", "1", "--out", str(tmp_path),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "best_index=0" in out
        assert (tmp_path / "optimize_summary.csv").exists()

    def test_optimize_flat_dynamic_notice(self, tmp_path, capsys):
        path = tmp_path / "flat.obj"
        save_objective(path, ObjectiveTable(5, np.full(32, 1.5), Sense.MIN))
        rc = main(["optimize", "--objective", str(path), "--method", "dynamic", "--seed", "2"])
        assert rc == 0
        assert "flat objective" in capsys.readouterr().out

    def test_optimize_requires_objective(self, capsys):
        assert main(["optimize", "--method", "dynamic"]) == 2

    def test_experiment_corollaries_exit_codes(self, tmp_path):
        ok = main([
            "experiment", "corollaries", "--n-range", "3:4", "--seeds", "4",
            "--out", str(tmp_path / "ok"), "--format", "csv",
        ])
        assert ok == 0
        bad = main([
            "experiment", "corollaries", "--n-range", "3:4", "--seeds", "4",
            "--inject-fault", "--out", str(tmp_path / "bad"), "--format", "csv",
        ])
        assert bad == 3

    def test_experiment_bad_range_exit(self, capsys):
        assert main(["experiment", "steps", "--n-range", "5:40"]) == 2

    def test_config_file_and_flag_override(self, tmp_path, capsys):
        config = tmp_path / "run.conf"
        config.write_text(
            "n_range=4:5\nseeds=3\nseed_base=11\nformat=csv\n"
            f"out={tmp_path / 'from_file'}\n",
            encoding="utf-8",
        )
        rc = main(["experiment", "steps", "--config", str(config)])
        assert rc == 0
        assert (tmp_path / "from_file" / "steps.csv").exists()
        rc = main([
            "experiment", "steps", "--config", str(config),
            "--out", str(tmp_path / "flag_wins"),
        ])
        assert rc == 0
        assert (tmp_path / "flag_wins" / "steps.csv").exists()

    def test_env_seed_base_fallback(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("QAMP_SEED", "123")
        args = [
            "recommend", "--n", "8", "--reference", "0", "--m", "2",
            "--out", str(tmp_path / "env"), "--format", "csv",
        ]
        assert main(args) == 0
        capsys.readouterr()
        monkeypatch.setenv("QAMP_SEED", "123")
        assert main([
            "recommend", "--n", "8", "--reference", "0", "--m", "2",
            "--seed", "123", "--out", str(tmp_path / "explicit"), "--format", "csv",
        ]) == 0
        assert (tmp_path / "env" / "recommend_items.csv").read_bytes() == (
            tmp_path / "explicit" / "recommend_items.csv"
        ).read_bytes()

    def test_run_rows_carry_seed(self, tmp_path):
        config = ExperimentConfig(
            "steps", n_range=(4, 4), seeds=3, seed_base=5, output_dir=tmp_path, fmt="csv"
        )
        experiment_steps(config)
        rows = read_lines(tmp_path / "steps_runs.csv")[1:]
        seeds = [int(row.split(",")[2]) for row in rows]
        assert seeds == [5, 6, 7]
