import math

import numpy as np
import pytest

from qamp import (
    ObjectiveTable,
    Sense,
    ShapeMismatchError,
    build_optimization_policy,
    durr_hoyer,
    dynamic_optimize,
    load_objective,
    nominal_rounds,
    save_objective,
)
from qamp.optimize import policy_from_estimates


def random_table(n, seed, sense=Sense.MIN):
    rng = np.random.default_rng(seed)
    return ObjectiveTable(n, rng.standard_normal(1 << n), sense)


class TestObjectiveTable:
    def test_length_checked(self):
        with pytest.raises(ShapeMismatchError):
            ObjectiveTable(3, np.zeros(7))

    def test_finite_checked(self):
        values = np.zeros(8)
        values[3] = np.inf
        with pytest.raises(ValueError):
            ObjectiveTable(3, values)

    def test_better_orientation(self):
        table_min = ObjectiveTable(2, [3.0, 1.0, 2.0, 0.5], Sense.MIN)
        table_max = ObjectiveTable(2, [3.0, 1.0, 2.0, 0.5], Sense.MAX)
        assert table_min.better(1.0, 2.0) and not table_min.better(2.0, 2.0)
        assert table_max.better(2.0, 1.0) and not table_max.better(2.0, 2.0)
        assert table_min.optimum_value() == 0.5
        assert table_max.optimum_value() == 3.0


class TestDurrHoyer:
    def test_identity_table_starts_solved(self):
        # the loop starts at state 0, which is already the minimum here
        table = ObjectiveTable(8, np.arange(256, dtype=float), Sense.MIN)
        result = durr_hoyer(table, np.random.default_rng(1))
        assert result.best_index == 0
        assert result.best_value == 0.0
        assert result.optimal

    def test_constant_table(self):
        table = ObjectiveTable(6, np.full(64, 2.5), Sense.MIN)
        result = durr_hoyer(table, np.random.default_rng(0))
        assert result.best_index == 0
        assert result.optimal

    def test_exact_optimum_rate_and_budget(self):
        exact = 0
        totals = []
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            table = ObjectiveTable(8, rng.standard_normal(256), Sense.MIN)
            result = durr_hoyer(table, rng)
            exact += result.optimal
            totals.append(result.grover_iterations_total)
        assert exact >= 45
        assert np.mean(totals) <= 4 * math.log2(256) * math.sqrt(256)

    def test_maximize_sense(self):
        hits = 0
        for seed in range(20):
            table = random_table(6, seed, Sense.MAX)
            result = durr_hoyer(table, np.random.default_rng(seed))
            hits += result.optimal
        assert hits >= 17

    def test_incumbent_strictly_improves(self):
        table = random_table(6, seed=5)
        result, rounds = durr_hoyer(table, np.random.default_rng(5), record_rounds=True)
        values = [float(table.values[r.incumbent_before]) for r in rounds]
        for a, b in zip(values, values[1:]):
            assert b < a
        assert rounds[-1].found is None  # loop ends on a give-up round
        assert result.outer_rounds == len(rounds)

    def test_marked_sets_match_bruteforce(self):
        # mask built per round equals the exhaustive strictly-better set
        table = random_table(6, seed=9)
        _, rounds = durr_hoyer(table, np.random.default_rng(9), record_rounds=True)
        for r in rounds:
            threshold = float(table.values[r.incumbent_before])
            by_hand = sum(
                1 for x in range(64) if float(table.values[x]) < threshold
            )
            assert r.marked_count == by_hand


class TestOptimizationPolicy:
    def test_limit_boundaries(self):
        table = ObjectiveTable(10, np.linspace(0.0, 1.0, 1024), Sense.MAX)
        policy = policy_from_estimates(table, 0.0, 1.0)
        assert policy.probabilities[-1] == pytest.approx(1.0)  # r = 1
        assert policy.probabilities[0] == pytest.approx(1.0 / 1024)  # r = 0

    def test_sense_orientation(self):
        table = ObjectiveTable(4, np.linspace(0.0, 1.0, 16), Sense.MIN)
        policy = policy_from_estimates(table, 0.0, 1.0)
        assert policy.probabilities[0] == pytest.approx(1.0)
        assert policy.probabilities[-1] == pytest.approx(1.0 / 16)

    def test_clamped_outside_estimates(self):
        table = ObjectiveTable(4, np.linspace(-2.0, 2.0, 16), Sense.MAX)
        policy = policy_from_estimates(table, -1.0, 1.0)
        assert policy.probabilities[-1] == pytest.approx(1.0)
        assert policy.probabilities[0] == pytest.approx(1.0 / 16)

    def test_expected_count_direct_summation(self):
        # oracle: plain-python sum of 2**(n*(r-1)) over the table
        table = ObjectiveTable(8, np.linspace(0.0, 1.0, 256), Sense.MAX)
        policy = policy_from_estimates(table, 0.0, 1.0)
        by_hand = sum(2.0 ** (8 * (x / 255.0 - 1.0)) for x in range(256))
        assert policy.expected_selected() == pytest.approx(by_hand, rel=1e-12)

    def test_probe_budget_validation(self):
        table = random_table(4, seed=0)
        with pytest.raises(ValueError):
            build_optimization_policy(table, np.random.default_rng(0), sample_budget=1)

    def test_flat_signal_policy(self):
        table = ObjectiveTable(5, np.full(32, 1.0), Sense.MIN)
        policy = build_optimization_policy(table, np.random.default_rng(0))
        assert np.all(policy.probabilities == 1.0)


class TestDynamicOptimize:
    def test_budget_identity_and_cap(self):
        cap = math.ceil(math.pi / 4 * math.sqrt(1024))
        for seed in range(20):
            table = random_table(10, seed, Sense.MAX)
            result = dynamic_optimize(table, np.random.default_rng(seed))
            assert result.grover_iterations_total == 2 * result.outer_rounds
            assert result.outer_rounds <= cap

    def test_budget_deterministic_in_n(self):
        # value-independent round count
        results = [
            dynamic_optimize(random_table(10, seed, Sense.MIN), np.random.default_rng(seed))
            for seed in range(6)
        ]
        assert len({r.outer_rounds for r in results}) == 1
        assert results[0].outer_rounds == nominal_rounds(10)

    def test_top_percentile_rate(self):
        hits = 0
        for seed in range(60):
            rng = np.random.default_rng(7000 + seed)
            values = rng.standard_normal(1024)
            table = ObjectiveTable(10, values, Sense.MAX)
            result = dynamic_optimize(table, rng)
            hits += int(np.sum(values > result.best_value)) < 1024 * 0.01
        assert hits / 60 >= 0.4

    def test_flat_objective_returns_valid_index(self):
        table = ObjectiveTable(6, np.full(64, 3.25), Sense.MIN)
        result = dynamic_optimize(table, np.random.default_rng(2))
        assert 0 <= result.best_index < 64
        assert result.grover_iterations_total == 0
        assert result.optimal

    def test_fewer_iterations_than_threshold_loop(self):
        dyn, thresh = [], []
        for seed in range(50):
            table = random_table(10, 2000 + seed)
            thresh.append(
                durr_hoyer(table, np.random.default_rng(3000 + seed)).grover_iterations_total
            )
            dyn.append(
                dynamic_optimize(table, np.random.default_rng(4000 + seed)).grover_iterations_total
            )
        assert np.median(dyn) < np.median(thresh)


class TestObjectiveFiles:
    def test_round_trip(self, tmp_path):
        table = random_table(5, seed=3, sense=Sense.MAX)
        path = tmp_path / "table.obj"
        save_objective(path, table)
        loaded = load_objective(path)
        assert loaded.n == 5
        assert loaded.sense is Sense.MAX
        np.testing.assert_array_equal(loaded.values, table.values)

    def test_header_format(self, tmp_path):
        path = tmp_path / "table.obj"
        path.write_text("n=2 sense=min\n0.0 1.0 2.0 3.0\n", encoding="utf-8")
        table = load_objective(path)
        assert table.n == 2 and table.sense is Sense.MIN

    def test_bad_header(self, tmp_path):
        path = tmp_path / "table.obj"
        path.write_text("qubits=2\n0 1 2 3\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_objective(path)

    def test_bad_sense(self, tmp_path):
        path = tmp_path / "table.obj"
        path.write_text("n=2 sense=upward\n0 1 2 3\n", encoding="utf-8")
        with pytest.raises(ValueError):
            load_objective(path)

    def test_wrong_value_count(self, tmp_path):
        path = tmp_path / "table.obj"
        path.write_text("n=2 sense=min\n0 1 2\n", encoding="utf-8")
        with pytest.raises(ShapeMismatchError):
            load_objective(path)
