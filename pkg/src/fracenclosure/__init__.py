"""Enclosure method for locating a jump in the order of time-fractional diffusion.

From one boundary measurement driven by a specially designed probe, the
indicator ``I(tau)`` decays like ``exp(-2 tau**(alpha0/2) d)`` where ``d`` is
the distance between the probe support and the region where the order jumps;
its sign gives the direction of the jump.
"""

from .enclosure import (
    EnclosureRegressor,
    SweepFit,
    SweepResult,
    ThresholdResult,
    extract_distance,
    geometric_schedule,
    run_sweep,
    threshold_test,
)
from .exceptions import ConfigurationError, EnclosureError, FitError, NumericalError
from .geometry import (
    BallRegion,
    BoxDomain,
    JumpProfile,
    ProbeConfig,
    ProblemConfig,
    ScalarField3D,
    dist_point_to_set,
    probe_distance,
    radius_of_enclosure,
)
from .indicator import IndicatorSample, coarse_bound, indicator_boundary, volume_bounds, envelope_check
from .scaled import ScaledValue

__version__ = "0.1.0"

__all__ = [
    "BallRegion",
    "BoxDomain",
    "ConfigurationError",
    "EnclosureError",
    "EnclosureRegressor",
    "FitError",
    "IndicatorSample",
    "JumpProfile",
    "NumericalError",
    "ProbeConfig",
    "ProblemConfig",
    "ScalarField3D",
    "ScaledValue",
    "SweepFit",
    "SweepResult",
    "ThresholdResult",
    "coarse_bound",
    "dist_point_to_set",
    "extract_distance",
    "geometric_schedule",
    "indicator_boundary",
    "volume_bounds",
    "envelope_check",
    "probe_distance",
    "radius_of_enclosure",
    "run_sweep",
    "threshold_test",
]
