"""Drag-aware quadrotor state estimation from IMU data alone.

Multirotor rotor drag makes body-frame velocity show up directly in the
accelerometer, so attitude, gyro biases and horizontal velocity become
observable without GPS, cameras or magnetometers.  This package bundles:

* a rigid-body truth simulator driven by piecewise-constant body rates,
* an IMU synthesizer with Gauss-Markov gyro bias and white noise,
* the 6-state drag-aware EKF and a generic accelerometer-as-gravity
  baseline to compare it against,
* a drag-coefficient identifier, evaluation metrics, CSV/config I/O and a
  batch CLI (``dragekf``).

The per-sample inner loops run either on the compiled extension or on a
pure NumPy fallback; ``BACKEND`` names which one is active (the
``DRAGEKF_BACKEND`` environment variable forces a choice).
"""

from dragekf._backend import BACKEND_NAME as BACKEND
from dragekf.baseline import GenericConfig, accel_attitude, run_generic
from dragekf.ekf import (
    DEFAULT_W_VEL,
    STATE_LABELS,
    FilterConfig,
    FilterState,
    initial_state,
    predict,
    run_filter,
    update,
)
from dragekf.errors import (
    AttitudeSingularityError,
    ConfigValueError,
    CovarianceBlowupError,
    DataError,
    DragEkfError,
    InsufficientExcitationError,
    LowAccelMagnitudeError,
    MalformedRowError,
    MisalignedTimeError,
    MissingKeyError,
    MissingVarianceError,
    NoOverlapError,
    NonMonotonicTimeError,
    NotPositiveDefiniteError,
    NumericalError,
    ShapeError,
    UnknownKeyError,
)
from dragekf.estimates import EstimateTrajectory
from dragekf.evaluate import (
    MetricsReport,
    PairedSeries,
    align,
    error_metrics,
    nees,
)
from dragekf.geometry import (
    G_STD,
    BodyRates,
    EulerAttitude,
    body_velocity,
    euler_rate_map,
    euler_to_rotation,
    wrap_angle,
)
from dragekf.logio import (
    config_fingerprint,
    read_config,
    read_estimates_csv,
    read_imu_csv,
    read_truth_csv,
    write_config,
    write_estimates_csv,
    write_imu_csv,
    write_truth_csv,
)
from dragekf.scenarios import (
    build_script,
    figure_eight_script,
    hover_script,
    mixed_maneuver_script,
    reversal_script,
)
from dragekf.sensors import ImuLog, NoiseConfig, synthesize
from dragekf.sysid import FitResult, fit_k1
from dragekf.truthsim import (
    ManeuverScript,
    ManeuverSegment,
    TruthState,
    TruthTrajectory,
    VehicleParams,
    simulate,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "G_STD",
    "DEFAULT_W_VEL",
    "STATE_LABELS",
    "__version__",
    # geometry
    "BodyRates",
    "EulerAttitude",
    "body_velocity",
    "euler_rate_map",
    "euler_to_rotation",
    "wrap_angle",
    # truth and sensors
    "ManeuverScript",
    "ManeuverSegment",
    "TruthState",
    "TruthTrajectory",
    "VehicleParams",
    "simulate",
    "ImuLog",
    "NoiseConfig",
    "synthesize",
    # estimators
    "FilterConfig",
    "FilterState",
    "initial_state",
    "predict",
    "update",
    "run_filter",
    "GenericConfig",
    "accel_attitude",
    "run_generic",
    "EstimateTrajectory",
    # identification and evaluation
    "FitResult",
    "fit_k1",
    "MetricsReport",
    "PairedSeries",
    "align",
    "error_metrics",
    "nees",
    # scenarios
    "build_script",
    "figure_eight_script",
    "hover_script",
    "mixed_maneuver_script",
    "reversal_script",
    # I/O
    "config_fingerprint",
    "read_config",
    "read_estimates_csv",
    "read_imu_csv",
    "read_truth_csv",
    "write_config",
    "write_estimates_csv",
    "write_imu_csv",
    "write_truth_csv",
    # errors
    "DragEkfError",
    "DataError",
    "NumericalError",
    "ShapeError",
    "MalformedRowError",
    "NonMonotonicTimeError",
    "UnknownKeyError",
    "MissingKeyError",
    "ConfigValueError",
    "NoOverlapError",
    "MisalignedTimeError",
    "InsufficientExcitationError",
    "MissingVarianceError",
    "LowAccelMagnitudeError",
    "AttitudeSingularityError",
    "CovarianceBlowupError",
    "NotPositiveDefiniteError",
]
