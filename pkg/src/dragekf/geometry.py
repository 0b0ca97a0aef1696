"""Euler-angle geometry shared by the simulator and both estimators.

Conventions, used consistently across the whole package:

* Earth frame {E} is right-handed with z pointing down, so the gravity
  vector is (0, 0, +g).
* Body frame {B} has x forward, y right, z through the belly; the rotor
  plane is the body x-y plane.
* Attitude is ZYX Euler: yaw ``psi`` about z, then pitch ``theta`` about y,
  then roll ``phi`` about x.  ``euler_to_rotation`` returns the matrix that
  maps body vectors into earth vectors.
* Angles are radians everywhere in the library; degrees appear only in CLI
  display.

Euler kinematics degenerate at |theta| = 90 deg.  Rate mappings are guarded
at ``THETA_GUARD_RAD`` (85 deg) so a blow-up surfaces as a diagnosable error
rather than as NaNs downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dragekf.errors import AttitudeSingularityError, ShapeError

G_STD = 9.80665
"""Standard gravity (m/s^2)."""

THETA_GUARD_RAD = math.radians(85.0)
"""Pitch magnitude beyond which Euler rate kinematics are refused."""


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    wrapped = math.remainder(angle, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


@dataclass(frozen=True)
class EulerAttitude:
    """ZYX Euler attitude; phi and psi are wrapped to (-pi, pi] on construction.

    |theta| must stay strictly below pi/2: a pitch at or beyond the vertical
    has no ZYX representation with bounded rates.
    """

    phi: float
    theta: float
    psi: float = 0.0

    def __post_init__(self):
        for name in ("phi", "theta", "psi"):
            if not math.isfinite(getattr(self, name)):
                raise ShapeError(f"attitude component {name} is not finite")
        if abs(self.theta) >= math.pi / 2:
            raise AttitudeSingularityError(
                f"|theta| = {abs(self.theta):.6f} rad is at or beyond the vertical"
            )
        object.__setattr__(self, "phi", wrap_angle(self.phi))
        object.__setattr__(self, "psi", wrap_angle(self.psi))


@dataclass(frozen=True)
class BodyRates:
    """Angular rates about the body axes (rad/s)."""

    wx: float
    wy: float
    wz: float

    def __post_init__(self):
        for name in ("wx", "wy", "wz"):
            if not math.isfinite(getattr(self, name)):
                raise ShapeError(f"body rate {name} is not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.wx, self.wy, self.wz])


def euler_to_rotation(att: EulerAttitude) -> np.ndarray:
    """Rotation matrix mapping body vectors to earth vectors.

    Errors close to the vertical (|theta| >= pi/2 - 1e-6): the matrix itself
    is defined there, but every consumer in this package pairs it with rate
    kinematics that are not.
    """
    if abs(att.theta) >= math.pi / 2 - 1e-6:
        raise AttitudeSingularityError(
            f"|theta| = {abs(att.theta):.8f} rad too close to the vertical"
        )
    cphi, sphi = math.cos(att.phi), math.sin(att.phi)
    cth, sth = math.cos(att.theta), math.sin(att.theta)
    cpsi, spsi = math.cos(att.psi), math.sin(att.psi)
    return np.array(
        [
            [cpsi * cth, cpsi * sth * sphi - spsi * cphi, cpsi * sth * cphi + spsi * sphi],
            [spsi * cth, spsi * sth * sphi + cpsi * cphi, spsi * sth * cphi - cpsi * sphi],
            [-sth, cth * sphi, cth * cphi],
        ]
    )


def euler_rate_matrix(att: EulerAttitude) -> np.ndarray:
    """Matrix E such that (phi_dot, theta_dot, psi_dot) = E @ (wx, wy, wz)."""
    if abs(att.theta) > THETA_GUARD_RAD:
        raise AttitudeSingularityError(
            f"|theta| = {abs(att.theta):.6f} rad exceeds the {THETA_GUARD_RAD:.6f} rad guard"
        )
    cphi, sphi = math.cos(att.phi), math.sin(att.phi)
    tth = math.tan(att.theta)
    sec = 1.0 / math.cos(att.theta)
    return np.array(
        [
            [1.0, tth * sphi, tth * cphi],
            [0.0, cphi, -sphi],
            [0.0, sec * sphi, sec * cphi],
        ]
    )


def euler_rate_map(att: EulerAttitude, rates: BodyRates) -> np.ndarray:
    """Euler angle rates (phi_dot, theta_dot, psi_dot) for given body rates."""
    if abs(att.theta) > THETA_GUARD_RAD:
        raise AttitudeSingularityError(
            f"|theta| = {abs(att.theta):.6f} rad exceeds the {THETA_GUARD_RAD:.6f} rad guard"
        )
    cphi, sphi = math.cos(att.phi), math.sin(att.phi)
    tth = math.tan(att.theta)
    sec = 1.0 / math.cos(att.theta)
    return np.array(
        [
            rates.wx + tth * sphi * rates.wy + tth * cphi * rates.wz,
            cphi * rates.wy - sphi * rates.wz,
            sec * sphi * rates.wy + sec * cphi * rates.wz,
        ]
    )


def rotation_batch(att: np.ndarray) -> np.ndarray:
    """Rotation matrices for an (N, 3) array of (phi, theta, psi) rows.

    Vectorised counterpart of ``euler_to_rotation`` with the same guard.
    """
    att = np.asarray(att, dtype=float)
    if att.ndim != 2 or att.shape[1] != 3:
        raise ShapeError(f"attitude array must be (N, 3), got {att.shape}")
    if np.any(np.abs(att[:, 1]) >= math.pi / 2 - 1e-6):
        raise AttitudeSingularityError("a sample pitch is too close to the vertical")
    cphi, sphi = np.cos(att[:, 0]), np.sin(att[:, 0])
    cth, sth = np.cos(att[:, 1]), np.sin(att[:, 1])
    cpsi, spsi = np.cos(att[:, 2]), np.sin(att[:, 2])
    R = np.empty((att.shape[0], 3, 3))
    R[:, 0, 0] = cpsi * cth
    R[:, 0, 1] = cpsi * sth * sphi - spsi * cphi
    R[:, 0, 2] = cpsi * sth * cphi + spsi * sphi
    R[:, 1, 0] = spsi * cth
    R[:, 1, 1] = spsi * sth * sphi + cpsi * cphi
    R[:, 1, 2] = spsi * sth * cphi - cpsi * sphi
    R[:, 2, 0] = -sth
    R[:, 2, 1] = cth * sphi
    R[:, 2, 2] = cth * cphi
    return R


def body_velocity(att: np.ndarray, vel_e: np.ndarray) -> np.ndarray:
    """Earth-frame velocities rotated into the body frame, row-wise.

    The component sums are written out explicitly so that every caller
    (sensor synthesis, evaluation, identification) computes bit-identical
    values from the same inputs.
    """
    att = np.asarray(att, dtype=float)
    vel_e = np.asarray(vel_e, dtype=float)
    if vel_e.shape != att.shape:
        raise ShapeError(f"velocity array {vel_e.shape} does not match attitude {att.shape}")
    R = rotation_batch(att)
    out = np.empty_like(vel_e)
    for i in range(3):
        out[:, i] = (R[:, 0, i] * vel_e[:, 0] + R[:, 1, i] * vel_e[:, 1]) + R[:, 2, i] * vel_e[:, 2]
    return out
