"""Similarity-driven recommendation over an n-bit catalog.

Similarity of two items is the bit width minus their Hamming distance
(identical to the Manhattan distance on bit vectors), so larger means more
alike and the number of items at similarity S follows the binomial curve
C(n, S).  Selection probabilities form the exponential family
min(1, c * exp(beta * S)) pinned at both ends: the most similar state must
be selected almost surely (P >= 1 - 1/N) and the least similar almost
never (P <= 1/N).  The defaults beta = ln 2, c = 2**-n meet both limits
with equality, giving P(S) = 2**(S - n).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import sample
from .dynamic_search import SelectionPolicy, default_rounds, run_dynamic
from .errors import CalibrationError, InvalidParamsError, ShapeMismatchError, UnderAmplifiedError

RESAMPLE_CAP_FACTOR = 50
_ROUND_CAP_FACTOR = 2
_ROUND_CAP_SLACK = 8


@dataclass(frozen=True)
class SimilaritySpec:
    """Reference item and bit width for the similarity metric."""

    n: int
    reference: int

    def __post_init__(self):
        if not 0 <= self.reference < (1 << self.n):
            raise ShapeMismatchError(
                f"reference {self.reference} out of range for n={self.n}"
            )


@dataclass(frozen=True)
class SelectionProbabilityParams:
    """Parameters of the exponential selection-probability family.

    ``beta`` is the decay rate in nats per similarity unit and ``norm_c``
    the prefactor; ``k_param`` optionally derives beta via
    beta = -ln(k_param**(1/n) - 1).  Construction validates the two
    boundary limits and rejects parameters that break them.
    """

    n: int
    beta: float | None = None
    norm_c: float | None = None
    k_param: float | None = None

    def __post_init__(self):
        beta = self.beta
        if beta is None:
            if self.k_param is not None:
                root = self.k_param ** (1.0 / self.n)
                if root <= 1.0:
                    raise InvalidParamsError(
                        f"k_param must satisfy k**(1/n) > 1, got {self.k_param}"
                    )
                beta = -math.log(root - 1.0)
            else:
                beta = math.log(2.0)
        norm_c = 2.0 ** (-self.n) if self.norm_c is None else self.norm_c
        object.__setattr__(self, "beta", float(beta))
        object.__setattr__(self, "norm_c", float(norm_c))

        n_states = 1 << self.n
        if self.norm_c < 0.0:
            raise InvalidParamsError("norm_c must be nonnegative")
        top = min(1.0, self.norm_c * math.exp(self.beta * self.n))
        bottom = min(1.0, self.norm_c)
        if top < 1.0 - 1.0 / n_states:
            raise InvalidParamsError(
                f"most similar state selected with {top:.3g} < 1 - 1/N"
            )
        if bottom > 1.0 / n_states:
            raise InvalidParamsError(
                f"least similar state selected with {bottom:.3g} > 1/N"
            )


@dataclass(frozen=True)
class RecommendedItem:
    index: int
    similarity: int


@dataclass(frozen=True)
class RecommendationResult:
    """Distinct recommended items plus run diagnostics.

    ``per_similarity_sampling[S]`` is the total sampling probability the
    final state puts on the similarity-S class; ``log`` carries the full
    per-round record of the amplification run.
    """

    items: tuple[RecommendedItem, ...]
    rounds_used: int
    per_similarity_sampling: np.ndarray
    log: object = field(default=None, repr=False, compare=False)


def similarity(x: int, spec: SimilaritySpec) -> int:
    """Bit width minus the Hamming distance to the reference item."""
    if not 0 <= x < (1 << spec.n):
        raise ShapeMismatchError(f"index {x} out of range for n={spec.n}")
    return spec.n - int(x ^ spec.reference).bit_count()


def similarity_table(spec: SimilaritySpec) -> np.ndarray:
    """Similarity of every basis state to the reference, as one array."""
    xor = np.bitwise_xor(np.arange(1 << spec.n, dtype=np.uint32), np.uint32(spec.reference))
    return (spec.n - np.bitwise_count(xor)).astype(np.int64)


def class_counts(n: int) -> np.ndarray:
    """Number of states at each similarity S = 0..n: the binomial curve C(n, S)."""
    return np.array([math.comb(n, s) for s in range(n + 1)], dtype=np.int64)


def selection_probability(s: int, params: SelectionProbabilityParams) -> float:
    """Probability min(1, c * exp(beta * S)) of selecting a similarity-S state."""
    if not 0 <= s <= params.n:
        raise ValueError(f"similarity must be in [0, {params.n}], got {s}")
    return min(1.0, params.norm_c * math.exp(params.beta * s))


def probability_by_class(params: SelectionProbabilityParams) -> np.ndarray:
    s = np.arange(params.n + 1, dtype=np.float64)
    return np.minimum(1.0, params.norm_c * np.exp(params.beta * s))


def expected_selected_count(params: SelectionProbabilityParams) -> float:
    """E[selected count] over the full space: sum_S C(n,S) * P(S)."""
    return float(class_counts(params.n) @ probability_by_class(params))


def calibrate_beta(
    n: int,
    m_target: float,
    gain_target: float | None = None,
) -> SelectionProbabilityParams:
    """Solve for the decay rate giving an expected selected count of ``m_target``.

    The family has a glue point at beta = ln 2 where both boundary limits
    bind at once and E = (3/2)**n.  Above it the prefactor stays pinned at
    1/N (least-similar limit met with equality) and bisection raises beta;
    below it the most-similar limit is pinned instead (P(n) = 1, prefactor
    exp(-beta*n) < 1/N), where E = (1 + exp(-beta))**n inverts in closed
    form.  Without the second branch no target under (3/2)**n would be
    reachable at all.
    """
    n_states = 1 << n
    if not 1.0 <= m_target < n_states / 2.0:
        raise CalibrationError(
            f"target expected count must be in [1, N/2), got {m_target}"
        )
    counts = class_counts(n).astype(np.float64)
    s = np.arange(n + 1, dtype=np.float64)
    glue = 1.5**n

    if m_target <= glue:
        root = max(m_target, 1.0 + 1e-12) ** (1.0 / n) - 1.0
        beta = -math.log(root)
        params = SelectionProbabilityParams(n=n, beta=beta, norm_c=math.exp(-beta * n))
        achieved = expected_selected_count(params)
    else:
        norm_c = 1.0 / n_states

        def expected(beta: float) -> float:
            return float(counts @ np.minimum(1.0, norm_c * np.exp(beta * s)))

        lo = math.log(2.0)
        hi = 2.0 * lo
        while expected(hi) < m_target and hi < 64.0:
            hi *= 2.0
        if expected(hi) < m_target:
            raise CalibrationError(f"target {m_target} unreachable")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if expected(mid) < m_target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-13:
                break
        beta = 0.5 * (lo + hi)
        params = SelectionProbabilityParams(n=n, beta=beta, norm_c=norm_c)
        achieved = expected(beta)

    if abs(achieved - m_target) > 0.5:
        raise CalibrationError(
            f"calibration landed at E={achieved:.3f}, target {m_target}"
        )
    if gain_target is not None and m_target >= n_states / (2.0 * gain_target):
        warnings.warn(
            f"target count {m_target} is at or above N/(2G) = "
            f"{n_states / (2.0 * gain_target):.1f} for gain target {gain_target}",
            stacklevel=2,
        )
    return params


def similarity_policy(
    spec: SimilaritySpec,
    params: SelectionProbabilityParams,
    catalog: np.ndarray | None = None,
) -> SelectionPolicy:
    """Per-state selection probabilities from similarity to the reference.

    With a catalog, states outside it are never selected.
    """
    if params.n != spec.n:
        raise ShapeMismatchError(f"params have n={params.n}, spec has n={spec.n}")
    probs = probability_by_class(params)[similarity_table(spec)]
    if catalog is not None:
        keep = np.zeros(1 << spec.n, dtype=bool)
        keep[catalog] = True
        probs = np.where(keep, probs, 0.0)
    return SelectionPolicy.probabilistic(spec.n, probs)


def recommend(
    spec: SimilaritySpec,
    m: int,
    params: SelectionProbabilityParams,
    rng: np.random.Generator,
    catalog: np.ndarray | None = None,
    rounds: int | None = None,
) -> RecommendationResult:
    """Amplify toward the reference and collect ``m`` distinct items.

    Runs a capped schedule of doubled rounds and samples the state of the
    best round (the one with the highest expected fresh-selection mass)
    since pushing past it only overshoots; rounds whose progress
    conditions fail restart from uniform.  Draws continue until ``m``
    distinct items are seen.  Duplicate draws are resampled; exceeding the
    50*m draw cap raises :class:`~qamp.errors.UnderAmplifiedError`.
    """
    if m < 1:
        raise ValueError(f"item count must be >= 1, got {m}")
    policy = similarity_policy(spec, params, catalog=catalog)
    if rounds is None:
        rounds = _ROUND_CAP_FACTOR * default_rounds(spec.n, policy) + _ROUND_CAP_SLACK
    state, log = run_dynamic(
        spec.n, policy, rng, rounds=rounds, keep_best=True, on_violation="restart"
    )

    catalog_set = None if catalog is None else set(int(x) for x in np.asarray(catalog))
    cap = RESAMPLE_CAP_FACTOR * m
    seen: set[int] = set()
    for _ in range(cap):
        if len(seen) >= m:
            break
        x = sample(state, rng)
        if catalog_set is not None and x not in catalog_set:
            continue
        seen.add(x)
    if len(seen) < m:
        raise UnderAmplifiedError(
            f"collected {len(seen)} of {m} distinct items within {cap} draws"
        )

    sims = similarity_table(spec)
    items = tuple(
        RecommendedItem(index=x, similarity=int(sims[x]))
        for x in sorted(seen, key=lambda x: (-int(sims[x]), x))
    )
    per_class = np.bincount(sims, weights=state.probabilities(), minlength=spec.n + 1)
    return RecommendationResult(
        items=items,
        rounds_used=log.best_round if log.best_round is not None else log.rounds,
        per_similarity_sampling=per_class,
        log=log,
    )


def load_catalog(path, n: int) -> np.ndarray:
    """Read catalog items, one per line: n-bit binary strings or unsigned ints."""
    indices: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_number, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if len(line) == n and set(line) <= {"0", "1"}:
                value = int(line, 2)
            else:
                try:
                    value = int(line, 10)
                except ValueError as exc:
                    raise ValueError(f"line {line_number}: cannot parse item {line!r}") from exc
            if not 0 <= value < (1 << n):
                raise ValueError(f"line {line_number}: item {value} out of range for n={n}")
            indices.append(value)
    return np.unique(np.array(sorted(indices), dtype=np.int64))
