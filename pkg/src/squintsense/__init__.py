"""Wideband user sensing with beam squint and beam split on a single RF chain."""

from .errors import (
    AmbiguousIntersectionError,
    ConfigError,
    DesignError,
    DomainError,
    NoIntersectionError,
    NotInRangeError,
    SensingError,
    ValidationUnavailableError,
)
from .experiments import RMSEStat, ScenarioConfig, TrialResult, emit_results, rmse, run_scenario, time_overhead
from .frontend import (
    FrontendDesign,
    SplitAliasSet,
    beam_direction,
    beam_trajectory,
    design_frontend,
    frontend_response,
    retune,
    split_angles,
)
from .sensing import (
    CandidateSet,
    FeedbackReport,
    NoiseModel,
    SensingRangeSet,
    SubcarrierGrid,
    ambiguity_condition,
    candidate_angles,
    intersection_validate,
    select_validation_angle,
    sense_squint,
    sense_squint_split,
    simulate_feedback,
    split_sensing_ranges,
)
from .wideband import (
    NormalizedAoD,
    SystemConfig,
    UserTruth,
    array_gain,
    channel_response,
    normalized_aod,
    received_symbol,
    squint_matched_aod,
    squint_range,
    steering_vector,
)

__version__ = "0.1.0"
