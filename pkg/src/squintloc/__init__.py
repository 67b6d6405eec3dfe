"""Near-field user localization with controllable beam squint.

A wideband ULA with phase shifters and true-time-delay lines spreads its
OFDM subcarriers over a trajectory of focal points; the subcarrier at which
a user sees peak power reveals where the user is.
"""

from .beamforming import (
    BeamformerState,
    OutOfTrajectory,
    SearchGrid,
    SquintPoint,
    array_gain,
    brute_force_squint_point,
    natural_squint_point,
    ps_state,
    ps_weights,
    trajectory,
    ttd_config,
    ttd_squint_point,
    weights_at,
    weights_matrix,
)
from .channel import ArrayConfig, ReceivedSpectrum, add_awgn, channel_matrix, channel_vector
from .experiments import ExperimentSpec, rmse, run_experiment, sweep_count, sweep_savings
from .geometry import (
    SPEED_OF_LIGHT,
    CartesianPoint,
    PolarPoint,
    cartesian_to_polar,
    element_distances,
    near_field_bounds,
    polar_to_cartesian,
)
from .localization import (
    AmbiguousDistance,
    DegenerateGeometry,
    Estimate,
    InvalidFeedback,
    NonPositiveDistance,
    Scheme,
    SensingRegion,
    angle_from_peak,
    cbs_2bs_localize,
    cbs_2bs_simulate,
    cbs_high_localize,
    cbs_low_localize,
    distance_from_peak,
    peak_subcarrier,
    tbt_localize,
    triangulate,
)

__all__ = [
    "SPEED_OF_LIGHT",
    "AmbiguousDistance",
    "ArrayConfig",
    "BeamformerState",
    "CartesianPoint",
    "DegenerateGeometry",
    "Estimate",
    "ExperimentSpec",
    "InvalidFeedback",
    "NonPositiveDistance",
    "OutOfTrajectory",
    "PolarPoint",
    "ReceivedSpectrum",
    "Scheme",
    "SearchGrid",
    "SensingRegion",
    "SquintPoint",
    "add_awgn",
    "angle_from_peak",
    "array_gain",
    "brute_force_squint_point",
    "cartesian_to_polar",
    "cbs_2bs_localize",
    "cbs_2bs_simulate",
    "cbs_high_localize",
    "cbs_low_localize",
    "channel_matrix",
    "channel_vector",
    "distance_from_peak",
    "element_distances",
    "natural_squint_point",
    "near_field_bounds",
    "peak_subcarrier",
    "polar_to_cartesian",
    "ps_state",
    "ps_weights",
    "rmse",
    "run_experiment",
    "sweep_count",
    "sweep_savings",
    "tbt_localize",
    "trajectory",
    "triangulate",
    "ttd_config",
    "ttd_squint_point",
    "weights_at",
    "weights_matrix",
]
