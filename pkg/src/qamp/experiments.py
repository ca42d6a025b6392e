"""Seeded experiments: step-count sweep, sampling-accuracy curves, invariant suite.

Trial seeds are derived as ``seed_base + trial_index``; identical configs
reproduce identical numeric output (wall-time columns aside).  The static
baseline marks the similarity ball S >= threshold around the reference
(threshold defaults to n-1, a ball of n+1 states) and its step count is
the full schedule length floor((pi/4) * sqrt(N/M)).  The dynamic arm runs
a policy calibrated to the same expected selected count and reports the
first round at which the ball's probability mass exceeds 1/2.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import SelectionMask, StateVector, uniform_init
from .dynamic_search import (
    VALIDITY_ATOL,
    SelectionPolicy,
    default_rounds,
    dynamic_iteration,
    gain_bound,
    ordering_witness,
    progress_conditions,
    replay_round_states,
    run_dynamic,
)
from .errors import ConfigError, ValidityError
from .recommend import (
    SelectionProbabilityParams,
    SimilaritySpec,
    calibrate_beta,
    similarity_policy,
    similarity_table,
)
from .report import write_csv, write_svg
from .static_search import grover_iteration, optimal_iterations

EXPERIMENTS = ("steps", "accuracy", "corollaries")
MAX_EXPERIMENT_QUBITS = 20
IDENTITY_TOL = 1e-10
ORDERING_TOL = 1e-12


@dataclass
class ExperimentConfig:
    experiment: str
    n: int | None = None
    n_range: tuple[int, int] | None = None  # default depends on the experiment
    seeds: int = 20
    seed_base: int = 0
    beta: float | None = None
    m_target: float | None = None
    threshold: int | None = None
    reference: int = 0
    output_dir: Path = Path("out")
    fmt: str = "both"
    inject_fault: bool = False

    def resolved_range(self) -> tuple[int, int]:
        if self.n_range is not None:
            return self.n_range
        return (2, 10) if self.experiment == "corollaries" else (10, 14)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; use one of {EXPERIMENTS}")
        if self.seeds < 1:
            raise ConfigError(f"seed count must be >= 1, got {self.seeds}")
        lo, hi = self.resolved_range()
        if not (1 <= lo <= hi <= MAX_EXPERIMENT_QUBITS):
            raise ConfigError(
                f"n range must satisfy 1 <= lo <= hi <= {MAX_EXPERIMENT_QUBITS}, got {lo}:{hi}"
            )
        if self.n is not None and not 1 <= self.n <= MAX_EXPERIMENT_QUBITS:
            raise ConfigError(f"n must be in [1, {MAX_EXPERIMENT_QUBITS}], got {self.n}")
        if self.fmt not in ("csv", "svg", "both"):
            raise ConfigError(f"format must be csv, svg or both, got {self.fmt!r}")

    @property
    def want_csv(self) -> bool:
        return self.fmt in ("csv", "both")

    @property
    def want_svg(self) -> bool:
        return self.fmt in ("svg", "both")


def _ball_threshold(config: ExperimentConfig, n: int) -> int:
    tau = config.threshold if config.threshold is not None else n - 1
    if not 0 <= tau <= n:
        raise ConfigError(f"similarity threshold must be in [0, {n}], got {tau}")
    return tau


def _experiment_params(config: ExperimentConfig, n: int, ball_size: int) -> SelectionProbabilityParams:
    """Policy parameters: explicit beta wins, else calibrate to the target count."""
    if config.beta is not None:
        return SelectionProbabilityParams(
            n=n, beta=config.beta, norm_c=min(2.0**-n, math.exp(-config.beta * n))
        )
    m_target = config.m_target if config.m_target is not None else float(ball_size)
    return calibrate_beta(n, m_target)


@dataclass(frozen=True)
class StepsRow:
    n: int
    static_steps: float
    dynamic_rounds: float
    dynamic_inner_iterations: float


@dataclass(frozen=True)
class StepsOutcome:
    rows: tuple[StepsRow, ...]
    run_rows: tuple[tuple, ...]
    files: tuple[Path, ...]


def experiment_steps(config: ExperimentConfig) -> StepsOutcome:
    """Static schedule length vs rounds for the ball mass to reach 1/2."""
    config.validate()
    lo, hi = config.resolved_range()
    rows: list[StepsRow] = []
    run_rows: list[tuple] = []
    for n in range(lo, hi + 1):
        n_states = 1 << n
        reference = config.reference if config.reference < n_states else 0
        tau = _ball_threshold(config, n)
        spec = SimilaritySpec(n, reference)
        sims = similarity_table(spec)
        ball = SelectionMask(n, sims >= tau)
        if ball.count_selected == 0:
            raise ConfigError(f"threshold {tau} leaves no target states at n={n}")
        static_steps = optimal_iterations(n_states, ball.count_selected)
        params = _experiment_params(config, n, ball.count_selected)
        policy = similarity_policy(spec, params)
        cap = 4 * max(static_steps, 1) + 8

        dyn_rounds = np.empty(config.seeds)
        for trial in range(config.seeds):
            seed = config.seed_base + trial
            rng = np.random.default_rng(seed)
            t0 = time.perf_counter()
            _, log = run_dynamic(
                n,
                policy,
                rng,
                rounds=cap,
                stop_above=0.5,
                watch_mask=ball,
                on_violation="restart",
            )
            wall_ms = (time.perf_counter() - t0) * 1e3
            crossed = (
                log.rounds
                if log.watched_mass_by_round and log.watched_mass_by_round[-1] > 0.5
                else cap
            )
            dyn_rounds[trial] = crossed
            run_rows.append(
                ("steps", n, seed, static_steps, crossed, 2 * crossed, wall_ms)
            )
        med = float(np.median(dyn_rounds))
        rows.append(StepsRow(n, float(static_steps), med, 2.0 * med))

    files: list[Path] = []
    out = Path(config.output_dir)
    if config.want_csv:
        agg = out / "steps.csv"
        write_csv(
            agg,
            ["n", "static_steps", "dynamic_rounds", "dynamic_inner_iterations"],
            [(r.n, r.static_steps, r.dynamic_rounds, r.dynamic_inner_iterations) for r in rows],
        )
        runs = out / "steps_runs.csv"
        write_csv(
            runs,
            ["experiment", "n", "seed", "static_steps", "dynamic_rounds",
             "dynamic_inner_iterations", "wall_time_ms"],
            run_rows,
        )
        files += [agg, runs]
    if config.want_svg:
        svg = out / "steps.svg"
        ns = [r.n for r in rows]
        write_svg(
            svg,
            "Steps to majority mass on the target set",
            "bit width n",
            "steps (median over seeds)",
            [
                ("static schedule", ns, [r.static_steps for r in rows]),
                ("dynamic rounds", ns, [r.dynamic_rounds for r in rows]),
            ],
        )
        files.append(svg)
    return StepsOutcome(tuple(rows), tuple(run_rows), tuple(files))


@dataclass(frozen=True)
class AccuracyOutcome:
    n: int
    p_static: np.ndarray
    p_dynamic: np.ndarray
    run_rows: tuple[tuple, ...]
    files: tuple[Path, ...]


def _class_masses(state: StateVector, sims: np.ndarray, n: int) -> np.ndarray:
    return np.bincount(sims, weights=state.probabilities(), minlength=n + 1)


def experiment_accuracy(config: ExperimentConfig) -> AccuracyOutcome:
    """Final-state sampling probability per similarity class, static vs dynamic."""
    config.validate()
    n = config.n if config.n is not None else 13
    n_states = 1 << n
    reference = config.reference if config.reference < n_states else 0
    tau = _ball_threshold(config, n)
    spec = SimilaritySpec(n, reference)
    sims = similarity_table(spec)
    ball = SelectionMask(n, sims >= tau)
    if ball.count_selected == 0:
        raise ConfigError(f"threshold {tau} leaves no target states at n={n}")

    static_state = uniform_init(n)
    for _ in range(optimal_iterations(n_states, ball.count_selected)):
        static_state = grover_iteration(static_state, ball)
    p_static = _class_masses(static_state, sims, n)

    params = _experiment_params(config, n, ball.count_selected)
    policy = similarity_policy(spec, params)
    cap = 2 * default_rounds(n, policy) + 8
    run_rows: list[tuple] = []
    for s in range(n + 1):
        run_rows.append(("accuracy", n, -1, "static", s, float(p_static[s]), 0.0))
    curves = np.empty((config.seeds, n + 1))
    for trial in range(config.seeds):
        seed = config.seed_base + trial
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        state, _ = run_dynamic(
            n, policy, rng, rounds=cap, keep_best=True, on_violation="restart"
        )
        wall_ms = (time.perf_counter() - t0) * 1e3
        curves[trial] = _class_masses(state, sims, n)
        for s in range(n + 1):
            run_rows.append(("accuracy", n, seed, "dynamic", s, float(curves[trial, s]), wall_ms))
    med = np.median(curves, axis=0)
    p_dynamic = med / med.sum()

    files: list[Path] = []
    out = Path(config.output_dir)
    if config.want_csv:
        agg = out / "accuracy.csv"
        write_csv(
            agg,
            ["S", "p_static", "p_dynamic"],
            [(s, float(p_static[s]), float(p_dynamic[s])) for s in range(n + 1)],
        )
        runs = out / "accuracy_runs.csv"
        write_csv(
            runs,
            ["experiment", "n", "seed", "variant", "S", "p", "wall_time_ms"],
            run_rows,
        )
        files += [agg, runs]
    if config.want_svg:
        svg = out / "accuracy.svg"
        ss = list(range(n + 1))
        write_svg(
            svg,
            "Sampling probability by similarity class",
            "similarity S",
            "class probability",
            [
                ("static", ss, [float(v) for v in p_static]),
                ("dynamic", ss, [float(v) for v in p_dynamic]),
            ],
        )
        files.append(svg)
    return AccuracyOutcome(n, p_static, p_dynamic, tuple(run_rows), tuple(files))


@dataclass(frozen=True)
class CheckResult:
    check: str
    n: int
    trials: int
    max_deviation: float
    tolerance: float
    passed: bool


@dataclass(frozen=True)
class CorollariesReport:
    results: tuple[CheckResult, ...]
    files: tuple[Path, ...] = field(default=())

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)


def _random_state(n: int, rng: np.random.Generator) -> StateVector:
    amps = rng.standard_normal(1 << n)
    amps /= math.sqrt(float(amps @ amps))
    return StateVector(n, amps)


def _identity_check(n: int, trials: int, rng, full: bool) -> CheckResult:
    name = "doubled-identity-all-selected" if full else "doubled-identity-none-selected"
    mask = SelectionMask.full(n) if full else SelectionMask.empty(n)
    worst = 0.0
    for _ in range(trials):
        state = _random_state(n, rng)
        after = dynamic_iteration(state, mask)
        dev = float(np.linalg.norm(after.amps - state.amps))
        worst = max(worst, dev)
    return CheckResult(name, n, trials, worst, IDENTITY_TOL, worst <= IDENTITY_TOL)


def _ordering_check(n: int, trials: int, rng, doubled: bool) -> CheckResult:
    """Selected-then-skipped states must stay at or above never-selected ones."""
    n_states = 1 << n
    worst = -math.inf
    for _ in range(trials):
        count = int(rng.integers(1, max(2, n_states // 2 + 1)))
        indices = rng.choice(n_states, size=count, replace=False)
        witness = ordering_witness(n, SelectionMask.from_indices(n, indices), doubled=doubled)
        worst = max(worst, witness.unselected_amp - witness.selected_amp)
    return CheckResult(
        "reselection-ordering", n, trials, worst, ORDERING_TOL, worst <= ORDERING_TOL
    )


def _undoubled_witness_check(n: int, trials: int, rng) -> CheckResult:
    """Single steps must show the inversion: once-selected ends strictly below."""
    n_states = 1 << n
    worst = -math.inf
    for _ in range(trials):
        count = int(rng.integers(1, n_states))
        indices = rng.choice(n_states, size=count, replace=False)
        witness = ordering_witness(n, SelectionMask.from_indices(n, indices), doubled=False)
        worst = max(worst, witness.selected_amp - witness.unselected_amp)
    return CheckResult(
        "undoubled-inversion-witness", n, trials, worst, 0.0, worst < 0.0
    )


def _gain_bound_check(n: int, trials: int, rng) -> CheckResult:
    """Measured gain stays under the ceiling while the next step keeps
    unselected amplitudes positive."""
    n_states = 1 << n
    worst = 0.0
    ok = True
    for _ in range(trials):
        count = int(rng.integers(1, n_states))
        mask = SelectionMask.from_indices(n, rng.choice(n_states, size=count, replace=False))
        bound = gain_bound(n_states, mask.count_selected)
        state = uniform_init(n)
        for _step in range(2 * optimal_iterations(n_states, mask.count_selected) + 2):
            nxt = grover_iteration(state, mask)
            unsel_next = nxt.amps[~mask.selected]
            # strictly positive beyond float noise: N/4-sized masks land on 0
            next_positive = bool(unsel_next.size) and float(unsel_next.min()) > 1e-9
            if next_positive:
                sel = state.amps[mask.selected]
                unsel = state.amps[~mask.selected]
                p_unsel = float(unsel @ unsel)
                if p_unsel > 0.0:
                    ratio = (float(sel @ sel) / p_unsel) / bound
                    worst = max(worst, ratio)
                    ok = ok and ratio < 1.0
            state = nxt
            if not next_positive:
                break
    return CheckResult("gain-ceiling", n, trials, worst, 1.0, ok)


def _guarded_run_check(n: int, trials: int, rng) -> CheckResult:
    """Aborting runs never log a round that started from a violating state."""
    n_states = 1 << n
    worst = math.inf
    for _ in range(trials):
        probs = rng.uniform(0.0, 0.8) * rng.random(n_states)
        policy = SelectionPolicy.probabilistic(n, probs)
        replay_rng = np.random.default_rng(rng.integers(0, 2**63 - 1))
        try:
            _, log = run_dynamic(n, policy, replay_rng, rounds=6)
        except ValidityError as err:
            log = err.log
        states = replay_round_states(log)
        for round_index in range(log.rounds):
            cond = progress_conditions(states[round_index], log.mask(round_index))
            worst = min(worst, cond.mean_amplitude, cond.min_unselected_amp)
    if math.isinf(worst):
        worst = 0.0
    return CheckResult(
        "guarded-run-validity", n, trials, worst, -VALIDITY_ATOL, worst >= -VALIDITY_ATOL
    )


def experiment_corollaries(config: ExperimentConfig) -> CorollariesReport:
    """Invariant suite: doubled-step identities, ordering witnesses, gain
    ceiling, and abort correctness, swept over small n.

    ``inject_fault`` replaces the doubled step with a single one in the
    reselection-ordering check; the check must then fail (that is the
    point of the witness).
    """
    config.validate()
    lo, hi = config.resolved_range()
    trials = max(4, config.seeds)
    rng = np.random.default_rng(config.seed_base)
    results: list[CheckResult] = []
    for n in range(lo, hi + 1):
        results.append(_identity_check(n, trials, rng, full=False))
        results.append(_identity_check(n, trials, rng, full=True))
        results.append(_ordering_check(n, trials, rng, doubled=not config.inject_fault))
        results.append(_undoubled_witness_check(n, trials, rng))
        results.append(_gain_bound_check(n, max(2, trials // 2), rng))
        if n <= 8:
            results.append(_guarded_run_check(n, max(2, trials // 2), rng))

    files: list[Path] = []
    if config.want_csv:
        path = Path(config.output_dir) / "corollaries.csv"
        write_csv(
            path,
            ["check", "n", "trials", "max_deviation", "tolerance", "passed"],
            [(r.check, r.n, r.trials, r.max_deviation, r.tolerance, r.passed) for r in results],
        )
        files.append(path)
    return CorollariesReport(tuple(results), tuple(files))
