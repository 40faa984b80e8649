"""Multi-scan GLMB trajectory smoothing and tracking.

Labeled multi-object state estimation with a posterior over whole
trajectories: a Gibbs-sampled multi-scan GLMB smoother, a single-scan
GLMB filter baseline, linear-Gaussian closed-form updates, scenario
simulation, and OSPA / OSPA(2) evaluation.
"""

from .association import (
    AssociationHistory,
    AssociationMap,
    enumerate_valid_histories,
    is_positive_one_to_one,
    is_valid_history,
    live_labels,
)
from .density import MultiScanGlmbComponent, MultiScanGlmbDensity
from .errors import (
    ConfigError,
    DegenerateDensityError,
    EnumerationLimitError,
    InvalidSequenceError,
    ModelError,
    MsglmbError,
    NumericalError,
)
from .gaussian import (
    Gaussian,
    GaussianTrajectoryDensity,
    condition_on_measurement,
    joint_extend,
    marginal_last_block,
    scan_update,
)
from .gibbs import (
    ConditionalTable,
    SamplerConfig,
    anneal_best_history,
    factor_conditional,
    full_conditional,
    history_log_weight,
    run_full_gibbs,
    sample_factor_chain,
)
from .labels import (
    Label,
    LabeledState,
    MultiObjectStateSequence,
    TrajectorySegment,
    end_time,
    from_trajectories,
    multiscan_exponential,
    start_time,
    to_trajectories,
)
from .metrics import ospa, ospa2
from .models import (
    BirthSite,
    DynamicModel,
    MeasurementModel,
    MultiObjectModel,
    Scenario,
    ScriptedTarget,
    UniformClutter,
    psi,
    transition_density,
)
from .simulate import (
    constant_velocity_model,
    desk_scenario,
    generate_measurements,
    generate_truth,
    position_observation,
    preset_scenario,
    survey_scenario,
)
from .trackers import (
    GlmbFilter,
    MultiScanGlmbSmoother,
    batch_smooth,
    empty_posterior,
    exhaustive_posterior,
    glmb_filter_update,
    smooth_update,
)

__version__ = "0.1.0"

__all__ = [
    "AssociationHistory",
    "AssociationMap",
    "BirthSite",
    "ConditionalTable",
    "ConfigError",
    "DegenerateDensityError",
    "DynamicModel",
    "EnumerationLimitError",
    "Gaussian",
    "GaussianTrajectoryDensity",
    "GlmbFilter",
    "InvalidSequenceError",
    "Label",
    "LabeledState",
    "MeasurementModel",
    "ModelError",
    "MsglmbError",
    "MultiObjectModel",
    "MultiObjectStateSequence",
    "MultiScanGlmbComponent",
    "MultiScanGlmbDensity",
    "MultiScanGlmbSmoother",
    "NumericalError",
    "SamplerConfig",
    "Scenario",
    "ScriptedTarget",
    "TrajectorySegment",
    "UniformClutter",
    "anneal_best_history",
    "batch_smooth",
    "condition_on_measurement",
    "constant_velocity_model",
    "desk_scenario",
    "empty_posterior",
    "end_time",
    "enumerate_valid_histories",
    "exhaustive_posterior",
    "factor_conditional",
    "from_trajectories",
    "full_conditional",
    "generate_measurements",
    "generate_truth",
    "glmb_filter_update",
    "history_log_weight",
    "is_positive_one_to_one",
    "is_valid_history",
    "joint_extend",
    "live_labels",
    "marginal_last_block",
    "multiscan_exponential",
    "ospa",
    "ospa2",
    "position_observation",
    "preset_scenario",
    "psi",
    "run_full_gibbs",
    "sample_factor_chain",
    "scan_update",
    "smooth_update",
    "start_time",
    "survey_scenario",
    "to_trajectories",
    "transition_density",
]
