"""Real-amplitude state-vector engine.

Every operator used here maps real vectors to real vectors, so amplitudes
are stored as plain float64 arrays over the N = 2**n basis states.  Public
operations are pure: they never mutate their inputs and return fresh
values.  All randomness flows through an explicitly seeded
``numpy.random.Generator`` passed by the caller; there is no global RNG.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import (
    DegenerateMaskError,
    NormalizationError,
    ShapeMismatchError,
    SizeError,
)

MAX_QUBITS = 30  # memory guard: dense float64 amplitudes up to 8 GiB
NORM_ATOL = 1e-9
SAMPLE_NORM_ATOL = 1e-6


@dataclass(frozen=True)
class StateVector:
    """Amplitudes over the computational basis of an n-qubit register."""

    n: int
    amps: np.ndarray

    def __post_init__(self):
        if not 1 <= self.n <= MAX_QUBITS:
            raise SizeError(f"qubit count must be in [1, {MAX_QUBITS}], got {self.n}")
        amps = np.asarray(self.amps, dtype=np.float64)
        if amps.shape != (1 << self.n,):
            raise ShapeMismatchError(
                f"expected {1 << self.n} amplitudes for n={self.n}, got shape {amps.shape}"
            )
        object.__setattr__(self, "amps", amps)

    @property
    def size(self) -> int:
        return self.amps.shape[0]

    def norm_sq(self) -> float:
        return float(self.amps @ self.amps)

    def probabilities(self) -> np.ndarray:
        return self.amps * self.amps


@dataclass(frozen=True)
class SelectionMask:
    """Boolean membership of each basis state in the selected set."""

    n: int
    selected: np.ndarray
    count_selected: int = field(init=False)

    def __post_init__(self):
        selected = np.asarray(self.selected, dtype=bool)
        if selected.shape != (1 << self.n,):
            raise ShapeMismatchError(
                f"expected {1 << self.n} mask entries for n={self.n}, got shape {selected.shape}"
            )
        object.__setattr__(self, "selected", selected)
        object.__setattr__(self, "count_selected", int(np.count_nonzero(selected)))

    @classmethod
    def from_indices(cls, n: int, indices) -> "SelectionMask":
        selected = np.zeros(1 << n, dtype=bool)
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= (1 << n)):
            raise ShapeMismatchError(f"mask index out of range for n={n}")
        selected[idx] = True
        return cls(n, selected)

    @classmethod
    def empty(cls, n: int) -> "SelectionMask":
        return cls(n, np.zeros(1 << n, dtype=bool))

    @classmethod
    def full(cls, n: int) -> "SelectionMask":
        return cls(n, np.ones(1 << n, dtype=bool))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.selected)

    @property
    def is_empty(self) -> bool:
        return self.count_selected == 0

    @property
    def is_full(self) -> bool:
        return self.count_selected == self.size

    @property
    def size(self) -> int:
        return self.selected.shape[0]


@dataclass(frozen=True)
class Decomposition:
    """Two-component split of a state along a selection mask.

    Coefficients are Euclidean lengths of the selected / unselected
    components, carrying the common sign of the group when all of its
    amplitudes agree; a group with mixed signs yields a magnitude-only
    coefficient and its ``*_signed`` flag is False.
    """

    selected_coeff: float
    unselected_coeff: float
    selected_signed: bool
    unselected_signed: bool


def check_dims(state: StateVector, mask: SelectionMask) -> None:
    if state.n != mask.n:
        raise ShapeMismatchError(f"state has n={state.n} but mask has n={mask.n}")


def uniform_init(n: int) -> StateVector:
    """Equal-amplitude superposition over all N = 2**n basis states."""
    if not 1 <= n <= MAX_QUBITS:
        raise SizeError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")
    size = 1 << n
    return StateVector(n, np.full(size, 1.0 / math.sqrt(size)))


def oracle_flip(state: StateVector, mask: SelectionMask) -> StateVector:
    """Negate the amplitude of every selected basis state (phase-flip oracle)."""
    check_dims(state, mask)
    amps = state.amps.copy()
    np.negative(amps, out=amps, where=mask.selected)
    return StateVector(state.n, amps)


def invert_about_mean(state: StateVector) -> StateVector:
    """Reflect every amplitude about the mean amplitude: a <- 2*mean - a."""
    mu = state.amps.mean()
    return StateVector(state.n, 2.0 * mu - state.amps)


def probability_of(state: StateVector, mask: SelectionMask) -> float:
    """Total sampling probability carried by the selected states."""
    check_dims(state, mask)
    sel = state.amps[mask.selected]
    return float(sel @ sel)


def sample(state: StateVector, rng: np.random.Generator, size: int | None = None):
    """Draw basis indices with probability equal to the squared amplitudes.

    Deterministic for a fixed generator state.  ``size=None`` returns one
    index as an int; an integer ``size`` returns that many draws as an array.
    """
    p = state.amps * state.amps
    total = p.sum()
    if abs(total - 1.0) > SAMPLE_NORM_ATOL:
        raise NormalizationError(f"state norm**2 deviates from 1 by {abs(total - 1.0):.3e}")
    cum = np.cumsum(p)
    u = rng.random() if size is None else rng.random(size)
    idx = np.searchsorted(cum, u * cum[-1], side="right")
    idx = np.minimum(idx, state.size - 1)
    return int(idx) if size is None else idx.astype(np.int64)


def _group_coeff(group: np.ndarray) -> tuple[float, bool]:
    coeff = math.sqrt(float(group @ group))
    has_pos = bool(np.any(group > 0.0))
    has_neg = bool(np.any(group < 0.0))
    if has_pos and has_neg:
        return coeff, False
    return (-coeff if has_neg else coeff), True


def decompose(state: StateVector, mask: SelectionMask) -> Decomposition:
    """Split the state into its selected and unselected components.

    Diagnostic for the two-dimensional rotation picture; requires a mask
    that is neither empty nor full so that both components exist.
    """
    check_dims(state, mask)
    if mask.is_empty or mask.is_full:
        raise DegenerateMaskError("decomposition needs a mask that is neither empty nor full")
    sel_coeff, sel_signed = _group_coeff(state.amps[mask.selected])
    unsel_coeff, unsel_signed = _group_coeff(state.amps[~mask.selected])
    return Decomposition(sel_coeff, unsel_coeff, sel_signed, unsel_signed)


def grover_step_inplace(amps: np.ndarray, selected: np.ndarray) -> None:
    """In-place amplification step for engine loops (kernel-backed)."""
    backend.grover_step(amps, selected)
