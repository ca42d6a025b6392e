"""Amplification with a probabilistic selection function.

Each round samples a fresh selection mask from the policy, stores it, and
applies the amplification step twice with that stored mask.  The doubling
cancels the ordering artifact of single steps: a state selected in one
round and skipped in the next would otherwise end up *below* states never
selected at all (see :func:`ordering_witness`).  Degenerate masks are
harmless under doubling: two steps with an empty or full mask are the
identity.

Progress diagnostics follow the two-component analysis: a round is
productive only while the post-flip mean amplitude and all unselected
amplitudes stay positive, and the selected count stays under N / (2G) for
a target gain G.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import backend
from .core import SelectionMask, StateVector, check_dims, uniform_init
from .errors import ValidityError

VALIDITY_ATOL = 1e-9  # "positive" is tested as > -VALIDITY_ATOL to absorb float noise


@dataclass(frozen=True)
class SelectionPolicy:
    """Either a fixed mask or a per-state selection probability table."""

    n: int
    mask: SelectionMask | None = None
    probabilities: np.ndarray | None = None

    def __post_init__(self):
        if (self.mask is None) == (self.probabilities is None):
            raise ValueError("exactly one of mask / probabilities must be given")
        if self.mask is not None and self.mask.n != self.n:
            raise ValueError(f"mask has n={self.mask.n}, policy has n={self.n}")
        if self.probabilities is not None:
            probs = np.clip(np.asarray(self.probabilities, dtype=np.float64), 0.0, 1.0)
            if probs.shape != (1 << self.n,):
                raise ValueError(
                    f"expected {1 << self.n} selection probabilities, got shape {probs.shape}"
                )
            object.__setattr__(self, "probabilities", probs)

    @classmethod
    def static(cls, mask: SelectionMask) -> "SelectionPolicy":
        return cls(mask.n, mask=mask)

    @classmethod
    def probabilistic(cls, n: int, probabilities) -> "SelectionPolicy":
        return cls(n, probabilities=probabilities)

    @classmethod
    def from_rule(cls, n: int, rule: Callable[[int], float]) -> "SelectionPolicy":
        probs = np.array([rule(x) for x in range(1 << n)], dtype=np.float64)
        return cls.probabilistic(n, probs)

    @property
    def is_static(self) -> bool:
        return self.mask is not None

    def expected_selected(self) -> float:
        """Expected number of selected states per round."""
        if self.mask is not None:
            return float(self.mask.count_selected)
        return float(self.probabilities.sum())


@dataclass(frozen=True)
class GainReport:
    """Progress diagnostics for one state/mask pair.

    ``gain`` is the ratio of selected to unselected probability mass;
    ``mean_amplitude`` is the mean the reflection step would use after the
    sign flip; ``ns_bound`` is the selected-count ceiling N / (2 * gain)
    implied by the measured gain (0 when the gain is infinite, inf when
    it is zero).
    """

    p_selected: float
    p_unselected: float
    gain: float
    mean_amplitude: float
    min_unselected_amp: float
    ns_bound: float
    ns_actual: int

    @property
    def complete(self) -> bool:
        """True when no probability mass remains outside the selected set."""
        return math.isinf(self.gain)


@dataclass(frozen=True)
class ProgressConditions:
    """The three prerequisites for a productive round."""

    mean_amplitude: float
    min_unselected_amp: float
    ns_actual: int
    n_states: int

    @property
    def mean_positive(self) -> bool:
        return self.mean_amplitude > -VALIDITY_ATOL

    @property
    def unselected_positive(self) -> bool:
        return self.min_unselected_amp > -VALIDITY_ATOL

    def ns_bound_ok(self, gain_target: float) -> bool:
        """Selected count within the ceiling N / (2 * gain_target)."""
        return 2.0 * gain_target * self.ns_actual <= self.n_states

    def all_ok(self, gain_target: float) -> bool:
        return self.mean_positive and self.unselected_positive and self.ns_bound_ok(gain_target)


@dataclass(frozen=True)
class DynamicRunLog:
    """Per-round record of a dynamic run.

    Masks are stored as selected-index arrays to keep large-n runs light;
    :meth:`mask` rebuilds the boolean form for any round.
    ``policy_mass_by_round`` is the expected mass a fresh selection round
    would mark (for a static policy this equals the logged p_selected);
    ``best_round`` is the 1-based round maximizing it when the run tracked
    a best state, and ``restart_rounds`` lists rounds that reset to the
    uniform state after a progress-condition violation.
    """

    n: int
    rounds: int
    selected_indices: tuple[np.ndarray, ...]
    gain_trajectory: tuple[GainReport, ...]
    policy_mass_by_round: tuple[float, ...] = ()
    watched_mass_by_round: tuple[float, ...] | None = None
    best_round: int | None = None
    restart_rounds: tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.selected_indices) != self.rounds or len(self.gain_trajectory) != self.rounds:
            raise ValueError("log length disagrees with round count")
        if self.policy_mass_by_round and len(self.policy_mass_by_round) != self.rounds:
            raise ValueError("policy-mass trace length disagrees with round count")

    def mask(self, round_index: int) -> SelectionMask:
        return SelectionMask.from_indices(self.n, self.selected_indices[round_index])

    def p_selected_by_round(self) -> np.ndarray:
        return np.array([report.p_selected for report in self.gain_trajectory])


@dataclass(frozen=True)
class OrderingWitness:
    """Group amplitudes after a selection round followed by an empty round."""

    selected_amp: float
    unselected_amp: float


def sample_mask(policy: SelectionPolicy, rng: np.random.Generator) -> SelectionMask:
    """Draw one selection mask: each state enters independently with its probability."""
    if policy.mask is not None:
        return policy.mask
    u = rng.random(1 << policy.n)
    return SelectionMask(policy.n, u < policy.probabilities)


def dynamic_iteration(state: StateVector, mask: SelectionMask) -> StateVector:
    """Apply the amplification step twice with the same stored mask."""
    check_dims(state, mask)
    amps = state.amps.copy()
    backend.doubled_step(amps, mask.selected)
    return StateVector(state.n, amps)


def _stats(amps: np.ndarray, selected: np.ndarray, n_states: int):
    sum_sel, sum_unsel, sumsq_sel, sumsq_unsel, min_unsel = backend.selection_stats(
        amps, selected
    )
    post_flip_mean = (sum_unsel - sum_sel) / n_states
    return sumsq_sel, sumsq_unsel, post_flip_mean, min_unsel


def _report(amps: np.ndarray, mask: SelectionMask, n_states: int) -> GainReport:
    p_sel, p_unsel, post_flip_mean, min_unsel = _stats(amps, mask.selected, n_states)
    if p_unsel > 0.0:
        gain = p_sel / p_unsel
    else:
        gain = math.inf
    if gain == 0.0:
        ns_bound = math.inf
    elif math.isinf(gain):
        ns_bound = 0.0
    else:
        ns_bound = n_states / (2.0 * gain)
    return GainReport(
        p_selected=p_sel,
        p_unselected=p_unsel,
        gain=gain,
        mean_amplitude=post_flip_mean,
        min_unselected_amp=min_unsel,
        ns_bound=ns_bound,
        ns_actual=mask.count_selected,
    )


def gain_report(state: StateVector, mask: SelectionMask) -> GainReport:
    """Gain and progress diagnostics of a state with respect to a mask.

    An infinite gain (no unselected mass left) signals that the search is
    complete.
    """
    check_dims(state, mask)
    return _report(state.amps, mask, state.size)


def progress_conditions(state: StateVector, mask: SelectionMask) -> ProgressConditions:
    """Evaluate the productive-round prerequisites for a state/mask pair."""
    check_dims(state, mask)
    _, _, post_flip_mean, min_unsel = _stats(state.amps, mask.selected, state.size)
    return ProgressConditions(
        mean_amplitude=post_flip_mean,
        min_unselected_amp=min_unsel,
        ns_actual=mask.count_selected,
        n_states=state.size,
    )


def gain_bound(n_states: int, n_selected: int) -> float:
    """Gain ceiling (Ns/(N-Ns)) * (N/(2Ns) - 1)**2 for group-uniform amplitudes.

    The measured gain stays below this bound exactly on states whose next
    step keeps the unselected amplitudes positive.
    """
    if not 1 <= n_selected < n_states:
        raise ValueError("bound defined for 1 <= n_selected < n_states")
    ratio = n_states / (2.0 * n_selected) - 1.0
    return (n_selected / (n_states - n_selected)) * ratio * ratio


def selected_count_limit(n_states: int, gain_target: float) -> float:
    """Largest selected count compatible with a target gain: N / (2G)."""
    return n_states / (2.0 * gain_target)


def default_rounds(n: int, policy: SelectionPolicy) -> int:
    """floor((pi/4) * sqrt(N / max(1, E[selected count]))).

    Matches the static schedule length when the policy degenerates to a
    fixed mask.
    """
    n_states = 1 << n
    expected = max(1.0, policy.expected_selected())
    return int(math.floor((math.pi / 4.0) * math.sqrt(n_states / expected)))


def run_dynamic(
    n: int,
    policy: SelectionPolicy,
    rng: np.random.Generator,
    rounds: int | None = None,
    *,
    stop_above: float | None = None,
    watch_mask: SelectionMask | None = None,
    keep_best: bool = False,
    on_violation: str = "abort",
) -> tuple[StateVector, DynamicRunLog]:
    """Run doubled amplification rounds with freshly sampled masks.

    Starts from the uniform state.  Before each round the progress
    conditions are checked against the fresh mask; on a violation the
    default is to abort with :class:`~qamp.errors.ValidityError` carrying
    the state and the log so far, while ``on_violation="restart"`` resets
    to the uniform state and keeps going (drivers that must finish use
    this: live runs routinely show small transient negative excursions).

    ``stop_above`` ends the run right after the first round whose watched
    mass exceeds it -- the mass on ``watch_mask`` when given, else the
    round's own selected mass.  ``keep_best`` returns the state of the
    round with the highest expected fresh-selection mass instead of the
    final state (doubled rounds can overshoot the rotation optimum, so the
    best round is the one worth sampling).
    """
    if rounds is None:
        rounds = default_rounds(n, policy)
    if rounds < 0:
        raise ValueError(f"round count must be >= 0, got {rounds}")
    if on_violation not in ("abort", "restart"):
        raise ValueError(f"on_violation must be 'abort' or 'restart', got {on_violation!r}")
    if watch_mask is not None and watch_mask.n != n:
        raise ValueError(f"watch mask has n={watch_mask.n}, run has n={n}")
    n_states = 1 << n
    amps = uniform_init(n).amps
    probs = policy.probabilities
    indices: list[np.ndarray] = []
    reports: list[GainReport] = []
    policy_mass: list[float] = []
    watched_mass: list[float] | None = None if watch_mask is None else []
    restarts: list[int] = []

    def current_policy_mass() -> float:
        if probs is None:
            sel = amps[policy.mask.selected]
            return float(sel @ sel)
        return float(probs @ (amps * amps))

    best_amps = amps.copy() if keep_best else None
    best_score = current_policy_mass() if keep_best else 0.0
    best_round = 0

    for round_index in range(rounds):
        mask = sample_mask(policy, rng)
        _, _, post_flip_mean, min_unsel = _stats(amps, mask.selected, n_states)
        if post_flip_mean < -VALIDITY_ATOL or min_unsel < -VALIDITY_ATOL:
            if on_violation == "abort":
                log = DynamicRunLog(
                    n,
                    round_index,
                    tuple(indices),
                    tuple(reports),
                    tuple(policy_mass),
                    None if watched_mass is None else tuple(watched_mass),
                    best_round if keep_best else None,
                    tuple(restarts),
                )
                raise ValidityError(
                    f"round {round_index} would start from an unproductive state "
                    f"(post-flip mean {post_flip_mean:.3e}, min unselected {min_unsel:.3e})",
                    state=StateVector(n, amps.copy()),
                    log=log,
                    round_index=round_index,
                )
            amps = uniform_init(n).amps
            restarts.append(round_index)
        backend.doubled_step(amps, mask.selected)
        indices.append(mask.indices.astype(np.int64))
        report = _report(amps, mask, n_states)
        reports.append(report)
        mass = current_policy_mass()
        policy_mass.append(mass)
        if keep_best and mass > best_score:
            best_score = mass
            best_amps = amps.copy()
            best_round = round_index + 1
        if watched_mass is not None:
            sel = amps[watch_mask.selected]
            watched_mass.append(float(sel @ sel))
        if stop_above is not None:
            observed = watched_mass[-1] if watched_mass is not None else report.p_selected
            if observed > stop_above:
                break

    log = DynamicRunLog(
        n,
        len(reports),
        tuple(indices),
        tuple(reports),
        tuple(policy_mass),
        None if watched_mass is None else tuple(watched_mass),
        best_round if keep_best else None,
        tuple(restarts),
    )
    final = best_amps if keep_best else amps
    return StateVector(n, final), log


def _group_means(amps: np.ndarray, selected: np.ndarray) -> OrderingWitness:
    sel = amps[selected]
    unsel = amps[~selected]
    if sel.size == 0:
        value = float(unsel.mean())
        return OrderingWitness(value, value)
    if unsel.size == 0:
        value = float(sel.mean())
        return OrderingWitness(value, value)
    return OrderingWitness(float(sel.mean()), float(unsel.mean()))


def ordering_witness(n: int, first_mask: SelectionMask, doubled: bool = False) -> OrderingWitness:
    """Amplitudes after a round with ``first_mask`` then a round with no selection.

    With single (undoubled) steps the once-selected group provably ends
    below the never-selected group; with doubled steps it stays at or above
    it whenever at most half the space was selected.  This is the
    executable witness of why each round applies the step twice.
    """
    if first_mask.n != n:
        raise ValueError(f"mask has n={first_mask.n}, expected {n}")
    amps = uniform_init(n).amps
    step = backend.doubled_step if doubled else backend.grover_step
    step(amps, first_mask.selected)
    step(amps, np.zeros(1 << n, dtype=bool))
    return _group_means(amps, first_mask.selected)


def replay_round_states(log: DynamicRunLog) -> Sequence[StateVector]:
    """States at every round boundary of a completed run (index 0 = initial)."""
    amps = uniform_init(log.n).amps
    states = [StateVector(log.n, amps.copy())]
    for round_index in range(log.rounds):
        backend.doubled_step(amps, log.mask(round_index).selected)
        states.append(StateVector(log.n, amps.copy()))
    return states
