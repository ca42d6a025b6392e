"""Amplitude-amplification simulation with probabilistic selection masks.

Desk-scale (n <= ~20 qubits) state-vector engine, static and dynamic
search drivers, a similarity recommender, optimization loops, and a
seeded experiment harness with CSV/SVG output.
"""

from .backend import kernel_backend
from .core import (
    Decomposition,
    SelectionMask,
    StateVector,
    decompose,
    invert_about_mean,
    oracle_flip,
    probability_of,
    sample,
    uniform_init,
)
from .dynamic_search import (
    DynamicRunLog,
    GainReport,
    OrderingWitness,
    ProgressConditions,
    SelectionPolicy,
    default_rounds,
    dynamic_iteration,
    gain_bound,
    gain_report,
    ordering_witness,
    progress_conditions,
    replay_round_states,
    run_dynamic,
    sample_mask,
    selected_count_limit,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DegenerateMaskError,
    InvalidParamsError,
    NoSolutionError,
    NormalizationError,
    QampError,
    ShapeMismatchError,
    SizeError,
    UnderAmplifiedError,
    ValidityError,
)
from .optimize import (
    ObjectiveTable,
    OptimizationResult,
    Sense,
    build_optimization_policy,
    durr_hoyer,
    dynamic_optimize,
    load_objective,
    nominal_rounds,
    save_objective,
)
from .recommend import (
    RecommendationResult,
    RecommendedItem,
    SelectionProbabilityParams,
    SimilaritySpec,
    calibrate_beta,
    class_counts,
    expected_selected_count,
    load_catalog,
    recommend,
    selection_probability,
    similarity,
    similarity_policy,
    similarity_table,
)
from .static_search import (
    SearchResult,
    StaticSearchSpec,
    grover_iteration,
    marked_probability,
    optimal_iterations,
    rotation_angle,
    search,
    search_unknown_m,
)

__version__ = "0.1.0"
