"""Classic amplitude-amplification search over a fixed marked set.

Covers the known-count schedule (floor((pi/4) * sqrt(N/M)) iterations) and
an exponential schedule for an unknown number of solutions, which the
optimization drivers rely on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .core import SelectionMask, StateVector, check_dims, probability_of, sample, uniform_init
from .errors import NoSolutionError, ShapeMismatchError

UNKNOWN_M_LAMBDA = 6.0 / 5.0
UNKNOWN_M_BUDGET_FACTOR = 3.0
_MAX_ATTEMPTS = 10_000


@dataclass(frozen=True)
class StaticSearchSpec:
    """A search problem: marked states within an n-qubit space."""

    n: int
    marked: SelectionMask
    m_known: bool = True

    def __post_init__(self):
        if self.marked.n != self.n:
            raise ShapeMismatchError(f"marked mask has n={self.marked.n}, spec has n={self.n}")


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one search run.

    ``outcome`` is None when the unknown-count schedule exhausted its budget
    without sampling a marked state (the "likely no solutions" signal).
    """

    outcome: int | None
    iterations_used: int
    success_probability: float
    trajectory: tuple[float, ...] | None = None

    @property
    def found(self) -> bool:
        return self.outcome is not None


def rotation_angle(n_states: int, n_marked: int) -> float:
    """Rotation per iteration in the two-component picture: 2*asin(sqrt(M/N))."""
    return 2.0 * math.asin(math.sqrt(n_marked / n_states))


def marked_probability(n_states: int, n_marked: int, iterations: int) -> float:
    """Closed-form marked-set probability after k iterations from uniform."""
    half_theta = math.asin(math.sqrt(n_marked / n_states))
    return math.sin((2 * iterations + 1) * half_theta) ** 2


def optimal_iterations(n_states: int, n_marked: int) -> int:
    """Iteration count floor((pi/4) * sqrt(N/M)) for M known solutions."""
    if n_marked == 0:
        raise NoSolutionError("no marked states: iteration schedule undefined")
    if not 1 <= n_marked <= n_states:
        raise ValueError(f"need 1 <= M <= N, got M={n_marked}, N={n_states}")
    return int(math.floor((math.pi / 4.0) * math.sqrt(n_states / n_marked)))


def grover_iteration(state: StateVector, mask: SelectionMask) -> StateVector:
    """One oracle flip followed by inversion about the mean."""
    check_dims(state, mask)
    amps = state.amps.copy()
    backend.grover_step(amps, mask.selected)
    return StateVector(state.n, amps)


def search(
    spec: StaticSearchSpec,
    rng: np.random.Generator,
    record_trajectory: bool = False,
) -> SearchResult:
    """Run the fixed-count schedule and sample the resulting state.

    When more than half the space is marked, uniform sampling already
    succeeds with probability > 1/2, so zero iterations are used (the
    schedule past that point can only hurt).  Specs with ``m_known=False``
    are dispatched to :func:`search_unknown_m`.
    """
    if not spec.m_known:
        return search_unknown_m(spec, rng)
    n_marked = spec.marked.count_selected
    if n_marked == 0:
        raise NoSolutionError("cannot search for solutions: marked set is empty")
    n_states = 1 << spec.n
    iterations = 0 if 2 * n_marked > n_states else optimal_iterations(n_states, n_marked)

    state = uniform_init(spec.n)
    amps = state.amps.copy()
    selected = spec.marked.selected
    trajectory = [] if record_trajectory else None
    for _ in range(iterations):
        backend.grover_step(amps, selected)
        if trajectory is not None:
            sel = amps[selected]
            trajectory.append(float(sel @ sel))
    final = StateVector(spec.n, amps)
    return SearchResult(
        outcome=sample(final, rng),
        iterations_used=iterations,
        success_probability=probability_of(final, spec.marked),
        trajectory=tuple(trajectory) if trajectory is not None else None,
    )


def search_unknown_m(spec: StaticSearchSpec, rng: np.random.Generator) -> SearchResult:
    """Exponential schedule for an unknown number of solutions.

    Attempt j draws an iteration count uniformly from [0, ceil(lambda**j)]
    with lambda = 6/5, runs it from a fresh uniform state, and samples.
    The first marked sample wins; once 3*sqrt(N) total iterations have been
    spent the search gives up, which distinguishes "likely no solutions".
    """
    n_states = 1 << spec.n
    marked = spec.marked.selected
    budget = math.ceil(UNKNOWN_M_BUDGET_FACTOR * math.sqrt(n_states))
    total = 0
    state = uniform_init(spec.n)
    for attempt in range(_MAX_ATTEMPTS):
        if total >= budget:
            break
        bound = math.ceil(UNKNOWN_M_LAMBDA**attempt)
        k = int(rng.integers(0, bound + 1))
        amps = uniform_init(spec.n).amps
        for _ in range(k):
            backend.grover_step(amps, marked)
        total += k
        state = StateVector(spec.n, amps)
        outcome = sample(state, rng)
        if marked[outcome]:
            return SearchResult(
                outcome=outcome,
                iterations_used=total,
                success_probability=probability_of(state, spec.marked),
            )
    return SearchResult(
        outcome=None,
        iterations_used=total,
        success_probability=probability_of(state, spec.marked),
    )
