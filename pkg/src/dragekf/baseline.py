"""Generic complementary estimator, the comparison baseline.

Community-standard structure for a small multirotor without extra sensors:
integrate the raw gyro through the Euler-rate kinematics, pull roll and
pitch toward the accelerometer gravity direction with a small gain, and
integrate gravity-compensated specific force for velocity.  No bias states
and no drag model -- so gyro bias leaks into attitude, leaked attitude
error leaks gravity into the velocity integral, and velocity error grows
without bound.  That failure mode is the point: it is what the drag-aware
filter removes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dragekf import _backend
from dragekf.errors import ConfigValueError, LowAccelMagnitudeError
from dragekf.estimates import EstimateTrajectory
from dragekf.geometry import G_STD, THETA_GUARD_RAD, body_velocity
from dragekf.linops import as_vector
from dragekf.sensors import ImuLog


@dataclass(frozen=True)
class GenericConfig:
    """Blend gain alpha (1/s, scaled by dt per step), gravity, nominal period."""

    alpha: float = 0.5
    g: float = G_STD
    ts_nominal: float = 0.005

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 < self.alpha < 1.0):
            raise ConfigValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not (math.isfinite(self.g) and self.g > 0.0):
            raise ConfigValueError(f"g must be positive, got {self.g!r}")
        if not (math.isfinite(self.ts_nominal) and self.ts_nominal > 0.0):
            raise ConfigValueError(f"ts_nominal must be positive, got {self.ts_nominal!r}")


def accel_attitude(accel: np.ndarray, g: float = G_STD) -> tuple[float, float]:
    """Roll and pitch of the measured gravity direction.

    Valid only when the accelerometer magnitude is at least half of
    gravity; below that the direction is dominated by noise or free fall
    and the caller should skip the correction.
    """
    a = as_vector(accel, 3, "accel")
    norm = float(np.sqrt((a[0] * a[0] + a[1] * a[1]) + a[2] * a[2]))
    if norm <= 0.5 * g:
        raise LowAccelMagnitudeError(
            f"|accel| = {norm:.4f} m/s^2 is below half of gravity"
        )
    phi = math.atan2(-a[1], -a[2])
    theta = math.atan2(a[0], math.sqrt(a[1] * a[1] + a[2] * a[2]))
    return phi, theta


def run_generic(log: ImuLog, cfg: GenericConfig) -> EstimateTrajectory:
    """Run the baseline over a log.

    Same stepping conventions as the filter: states start at zero,
    propagation over [t_{i-1}, t_i] uses the measurements at t_{i-1}, the
    accelerometer correction uses the sample at t_i.  Velocity is reported
    in body axes (rotated by the estimated attitude) for comparability;
    the sig3 and innovation channels are NaN and the bias columns zero,
    because this estimator has neither.
    """
    n = len(log)
    out_att = np.empty((n, 3))
    out_ve = np.empty((n, 3))
    _backend.generic_loop(
        np.ascontiguousarray(log.t),
        np.ascontiguousarray(log.gyro),
        np.ascontiguousarray(log.accel),
        cfg.alpha,
        cfg.g,
        cfg.ts_nominal,
        THETA_GUARD_RAD,
        out_att,
        out_ve,
    )
    v_b = body_velocity(out_att, out_ve)
    x = np.zeros((n, 6))
    x[:, 0] = out_att[:, 0]
    x[:, 1] = out_att[:, 1]
    x[:, 4] = v_b[:, 0]
    x[:, 5] = v_b[:, 1]
    return EstimateTrajectory(
        t=log.t.copy(),
        x=x,
        sig3=np.full((n, 6), np.nan),
        innov=np.full((n, 2), np.nan),
        source="generic",
        meta={"backend": _backend.BACKEND_NAME, "psi": out_att[:, 2]},
    )
