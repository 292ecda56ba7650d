"""Adaptive Gaussian mixture filtering.

Gaussian mixture state estimation for nonlinear systems: statistical
linearization over deterministic regression points, error-driven
moment-preserving component splitting, and greedy moment-preserving
mixture reduction, with classic baseline filters and benchmark scenarios.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateUpdateError,
    EvaluationError,
    FilterError,
    InvalidInputError,
    NumericalError,
)
from .mixture_core import (
    EigenDecomposition,
    GaussianComponent,
    GaussianMixture,
    eigendecompose,
    evaluate_density,
    gaussian_product_integral,
    mixture_moments,
    normalized_isd,
)
from .statlin import (
    Linearization,
    RegressionPointSet,
    SchemeConfig,
    SchemeKind,
    error_trace,
    linearize,
    regression_points,
    register_scheme,
    residual_at,
)

from .splitting import (
    DEFAULT_SPLIT_LIBRARY,
    SplitLibrary,
    SplitScore,
    direction_scores,
    select_and_split,
    selection_scores,
    split_component,
)
from .reduction import merge_cost, merge_pair, reduce
from .agmf import (
    POSTERIOR,
    PREDICTED,
    SPLITTING_ERROR_DRIVEN,
    SPLITTING_WEIGHT_EIGEN,
    FilterConfig,
    FilterDiagnostics,
    FilterState,
    StateSpaceModel,
    adapt,
    joint_components,
    predict,
    update,
)

from .baselines import (
    ParticleSet,
    initial_particles,
    mwe_adapt,
    pf_step,
    residual_resample,
    ukf_step,
)

from .scenarios import (
    MAX_EIGENVALUE,
    SHAPE_SCHEDULE,
    TRACK_FILTERS,
    FilterStats,
    ShapeResult,
    ShapeScenario,
    ShapeVariant,
    TrackScenario,
    bicycle_system,
    glint_mixture,
    growth_map,
    growth_mean,
    kld_on_grid,
    radar_measurement,
    run_shape,
    run_tracking,
    shape_grid,
    simulate_run,
    tracking_model,
    tracking_prior,
    true_density_growth,
)

__all__ = [
    "__version__",
    "DegenerateUpdateError",
    "EvaluationError",
    "FilterError",
    "InvalidInputError",
    "NumericalError",
    "EigenDecomposition",
    "GaussianComponent",
    "GaussianMixture",
    "eigendecompose",
    "evaluate_density",
    "gaussian_product_integral",
    "mixture_moments",
    "normalized_isd",
    "Linearization",
    "RegressionPointSet",
    "SchemeConfig",
    "SchemeKind",
    "error_trace",
    "linearize",
    "regression_points",
    "register_scheme",
    "residual_at",
    "DEFAULT_SPLIT_LIBRARY",
    "SplitLibrary",
    "SplitScore",
    "direction_scores",
    "select_and_split",
    "selection_scores",
    "split_component",
    "merge_cost",
    "merge_pair",
    "reduce",
    "POSTERIOR",
    "PREDICTED",
    "SPLITTING_ERROR_DRIVEN",
    "SPLITTING_WEIGHT_EIGEN",
    "FilterConfig",
    "FilterDiagnostics",
    "FilterState",
    "StateSpaceModel",
    "adapt",
    "joint_components",
    "predict",
    "update",
    "ParticleSet",
    "initial_particles",
    "mwe_adapt",
    "pf_step",
    "residual_resample",
    "ukf_step",
    "MAX_EIGENVALUE",
    "SHAPE_SCHEDULE",
    "TRACK_FILTERS",
    "FilterStats",
    "ShapeResult",
    "ShapeScenario",
    "ShapeVariant",
    "TrackScenario",
    "bicycle_system",
    "glint_mixture",
    "growth_map",
    "growth_mean",
    "kld_on_grid",
    "radar_measurement",
    "run_shape",
    "run_tracking",
    "shape_grid",
    "simulate_run",
    "tracking_model",
    "tracking_prior",
    "true_density_growth",
]
