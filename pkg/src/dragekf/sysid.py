"""Drag coefficient identification from logged accelerometer data.

In near-hover flight the planar accelerometer channels read pure drag:
``a_x = -(k1/m) v_bx`` and ``a_y = -(k1/m) v_by``.  Given a truth
trajectory (motion capture, or the simulator), both axes are pooled into
one least-squares slope through the origin,

    k1/m = -(sum a.v) / (sum v.v),

which is the minimum-residual estimate when every sample carries the same
accelerometer noise.  Pooling the axes doubles the sample count and ties
the two channels to a single physical coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dragekf.errors import (
    ConfigValueError,
    InsufficientExcitationError,
    MisalignedTimeError,
)
from dragekf.evaluate import truth_body_series
from dragekf.sensors import ImuLog
from dragekf.truthsim import TruthTrajectory

#: minimum pooled squared-velocity signal (m^2 s^-2 * samples) for a usable fit
MIN_EXCITATION = 10.0
MIN_SAMPLES = 100


@dataclass(frozen=True)
class FitResult:
    """Identified drag coefficient and fit diagnostics."""

    k1_over_m: float
    k1: float
    residual_rms: float  # m/s^2, accelerometer units
    n_samples: int       # pooled count (2 per time sample)
    r_squared: float

    def summary(self) -> str:
        return (
            f"k1/m = {self.k1_over_m:.6f} 1/s  (k1 = {self.k1:.6f} kg/s), "
            f"residual rms {self.residual_rms:.4g} m/s^2, "
            f"R^2 = {self.r_squared:.4f}, n = {self.n_samples}"
        )


def fit_k1(
    log: ImuLog,
    truth: TruthTrajectory,
    mass: float,
    min_excitation: float = MIN_EXCITATION,
) -> FitResult:
    """Fit the drag coefficient from an IMU log and matching truth.

    Truth attitude/velocity is interpolated onto the log timestamps, so the
    two need not share a clock grid, only an overlapping span.  Raises
    InsufficientExcitationError when the data cannot support the fit
    (too few samples, vehicle barely moved, or a non-physical slope).
    """
    if mass <= 0.0 or not math.isfinite(mass):
        raise ConfigValueError(f"mass must be positive, got {mass}")
    t0 = max(log.t[0], truth.t[0])
    t1 = min(log.t[-1], truth.t[-1])
    if t1 <= t0:
        raise MisalignedTimeError(
            f"log spans [{log.t[0]:.3f}, {log.t[-1]:.3f}] s but truth spans "
            f"[{truth.t[0]:.3f}, {truth.t[-1]:.3f}] s; no overlap"
        )
    keep = (log.t >= t0) & (log.t <= t1)
    t = log.t[keep]
    accel = log.accel[keep]
    _, vb = truth_body_series(truth, t)

    a = np.concatenate([accel[:, 0], accel[:, 1]])
    v = np.concatenate([vb[:, 0], vb[:, 1]])
    n = a.shape[0]
    if n < 2 * MIN_SAMPLES:
        raise InsufficientExcitationError(
            f"only {n // 2} overlapping samples; need at least {MIN_SAMPLES}"
        )
    vv = float(v @ v)
    if vv < min_excitation:
        raise InsufficientExcitationError(
            f"pooled squared velocity {vv:.3g} below {min_excitation:.3g}; "
            "the vehicle barely moved, fly a maneuver and retry"
        )
    kappa = -float(a @ v) / vv
    if kappa <= 0.0:
        raise InsufficientExcitationError(
            f"fitted k1/m = {kappa:.3g} is not positive; "
            "data does not look like linear drag"
        )
    resid = a + kappa * v
    ss_res = float(resid @ resid)
    mean_a = float(a.mean())
    ss_tot = float((a - mean_a) @ (a - mean_a))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 0.0
    return FitResult(
        k1_over_m=kappa,
        k1=kappa * mass,
        residual_rms=math.sqrt(ss_res / n),
        n_samples=n,
        r_squared=r2,
    )
