"""Kinematically scripted quadrotor truth simulator.

A maneuver script commands piecewise-constant body rates; attitude follows
the Euler kinematics exactly, and translational dynamics integrate gravity,
total rotor thrust along -b3 and rotor drag:

    m * dV/dt = m*g*e3 - thrust * b3 - k1 * V_plane

where V_plane is the earth-frame velocity projected onto the rotor plane
and k1 is the lumped drag coefficient (N*s/m).  Thrust either holds the
trim value m*g/(cos(phi)*cos(theta)) -- an altitude-hold idealisation that
zeroes the earth-z force -- or stays at a fixed total.

Integration is midpoint RK2 at a constant step; scripts are sampled
zero-order-hold, so the rate vector attached to sample k is the one acting
over [t_k, t_k+dt).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from dragekf import _backend, _model
from dragekf.errors import (
    AttitudeSingularityError,
    ConfigValueError,
    NonMonotonicTimeError,
    ShapeError,
)
from dragekf.geometry import G_STD, THETA_GUARD_RAD, BodyRates, EulerAttitude
from dragekf.linops import as_vector

THRUST_MODES = ("trim", "fixed")


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the simulated vehicle.

    k1 lumps the rotor-drag proportionality (drag force = -k1 * V_plane);
    k1 = 0 turns drag off, which is occasionally useful as a degenerate
    check case.  thrust_total is only consulted in "fixed" mode and
    defaults to hover thrust m*g.
    """

    m: float = 0.42
    k1: float = 0.57
    g: float = G_STD
    thrust_total: float | None = None
    thrust_mode: str = "trim"

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.m > 0.0):
            raise ConfigValueError(f"mass must be positive, got {self.m!r}")
        if not (math.isfinite(self.g) and self.g > 0.0):
            raise ConfigValueError(f"gravity must be positive, got {self.g!r}")
        if not (math.isfinite(self.k1) and self.k1 >= 0.0):
            raise ConfigValueError(f"drag coefficient must be >= 0, got {self.k1!r}")
        if self.thrust_mode not in THRUST_MODES:
            raise ConfigValueError(
                f"thrust_mode must be one of {THRUST_MODES}, got {self.thrust_mode!r}"
            )
        if self.thrust_total is None:
            object.__setattr__(self, "thrust_total", self.m * self.g)
        if not (math.isfinite(self.thrust_total) and self.thrust_total >= 0.0):
            raise ConfigValueError(f"thrust_total must be >= 0, got {self.thrust_total!r}")


def thrust_for(p: VehicleParams, att: EulerAttitude) -> float:
    """Total thrust in effect at the given attitude."""
    if p.thrust_mode == "trim":
        return p.m * p.g / (math.cos(att.phi) * math.cos(att.theta))
    return p.thrust_total


@dataclass(frozen=True)
class TruthState:
    """Instantaneous truth: attitude, earth-frame velocity and position."""

    t: float
    att: EulerAttitude
    vel_e: np.ndarray
    pos_e: np.ndarray

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise ShapeError("time is not finite")
        vel = as_vector(self.vel_e, 3, "vel_e")
        pos = as_vector(self.pos_e, 3, "pos_e")
        if not (np.all(np.isfinite(vel)) and np.all(np.isfinite(pos))):
            raise ShapeError("velocity/position must be finite")
        if abs(self.att.theta) > THETA_GUARD_RAD:
            raise AttitudeSingularityError(
                f"|theta| = {abs(self.att.theta):.4f} rad exceeds the simulation guard"
            )
        vel.flags.writeable = False
        pos.flags.writeable = False
        object.__setattr__(self, "vel_e", vel)
        object.__setattr__(self, "pos_e", pos)

    def as_array(self) -> np.ndarray:
        return np.concatenate(
            ([self.att.phi, self.att.theta, self.att.psi], self.vel_e, self.pos_e)
        )

    @staticmethod
    def from_array(t: float, s: np.ndarray) -> "TruthState":
        return TruthState(t, EulerAttitude(s[0], s[1], s[2]), s[3:6], s[6:9])


@dataclass(frozen=True)
class ManeuverSegment:
    duration: float
    rates: BodyRates

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration > 0.0):
            raise ConfigValueError(f"segment duration must be positive, got {self.duration!r}")


@dataclass(frozen=True)
class ManeuverScript:
    """Piecewise-constant body-rate schedule."""

    segments: tuple[ManeuverSegment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    def total_duration(self) -> float:
        return float(sum(seg.duration for seg in self.segments))

    def rates_at(self, tau: float) -> BodyRates:
        """Rates in effect at time tau past the script start (ZOH)."""
        if tau < 0.0:
            raise ConfigValueError(f"tau must be >= 0, got {tau!r}")
        edge = 0.0
        for seg in self.segments:
            edge += seg.duration
            if tau < edge:
                return seg.rates
        return BodyRates(0.0, 0.0, 0.0)

    def step_rates(self, dt: float, n_steps: int) -> np.ndarray:
        """(n_steps, 3) rate rows; row k acts over [k*dt, (k+1)*dt).

        Each step takes the segment covering its midpoint, so segment
        edges that land exactly on the step grid resolve identically at
        every step size instead of depending on float rounding of k*dt.
        """
        if not self.segments:
            return np.zeros((n_steps, 3))
        edges = np.cumsum([seg.duration for seg in self.segments])
        table = np.array([[s.rates.wx, s.rates.wy, s.rates.wz] for s in self.segments])
        taus = dt * (np.arange(n_steps) + 0.5)
        idx = np.searchsorted(edges, taus, side="right")
        idx = np.minimum(idx, len(self.segments) - 1)
        return table[idx]


class TruthDerivative(NamedTuple):
    att_dot: np.ndarray
    vel_dot: np.ndarray
    pos_dot: np.ndarray


@dataclass
class TruthTrajectory:
    """Uniformly sampled truth.

    ``rates`` keeps the exact body rates acting at each sample (needed by
    sensor synthesis); it is an in-memory channel only and is dropped by
    the CSV writer.
    """

    t: np.ndarray
    att: np.ndarray
    vel_e: np.ndarray
    pos_e: np.ndarray
    rates: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        n = self.t.shape[0]
        if n == 0:
            raise ShapeError("trajectory must contain at least one sample")
        for name in ("att", "vel_e", "pos_e"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n, 3):
                raise ShapeError(f"{name} must have shape ({n}, 3), got {arr.shape}")
            setattr(self, name, arr)
        if self.rates is not None:
            self.rates = np.asarray(self.rates, dtype=float)
            if self.rates.shape != (n, 3):
                raise ShapeError(f"rates must have shape ({n}, 3), got {self.rates.shape}")
        if n > 1:
            dts = np.diff(self.t)
            if np.any(dts <= 0.0):
                bad = int(np.argmax(dts <= 0.0)) + 1
                raise NonMonotonicTimeError(
                    f"sample {bad}: timestamps must strictly increase", index=bad
                )
            if np.max(np.abs(dts - dts[0])) > 1e-9 * max(1.0, abs(dts[0])):
                raise ShapeError("trajectory sample spacing must be constant")

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self) > 1 else 0.0

    def state(self, i: int) -> TruthState:
        return TruthState(
            float(self.t[i]),
            EulerAttitude(*self.att[i]),
            self.vel_e[i],
            self.pos_e[i],
        )


def truth_derivative(s: TruthState, p: VehicleParams, rates: BodyRates) -> TruthDerivative:
    """Time derivative of a truth state under the given body rates."""
    d = _model.truth_rhs(
        s.as_array(),
        rates.wx,
        rates.wy,
        rates.wz,
        p.m,
        p.k1,
        p.g,
        p.thrust_mode == "trim",
        p.thrust_total,
    )
    return TruthDerivative(d[0:3], d[3:6], d[6:9])


def rk2_step(s: TruthState, p: VehicleParams, rates: BodyRates, dt: float) -> TruthState:
    """One midpoint step; dt must lie in (0, 0.1] s."""
    if not (0.0 < dt <= 0.1):
        raise ConfigValueError(f"dt must lie in (0, 0.1], got {dt!r}")
    out = _model.truth_rk2(
        s.as_array(),
        rates.wx,
        rates.wy,
        rates.wz,
        dt,
        p.m,
        p.k1,
        p.g,
        p.thrust_mode == "trim",
        p.thrust_total,
        THETA_GUARD_RAD,
    )
    return TruthState.from_array(s.t + dt, out)


def simulate(
    script: ManeuverScript,
    p: VehicleParams,
    dt: float = 0.005,
    x0: TruthState | None = None,
) -> TruthTrajectory:
    """Integrate a script into a trajectory sampled every dt seconds.

    An empty script yields the single-sample trajectory [x0].  On a pitch
    guard violation the error names the offending script segment.
    """
    if not (0.0 < dt <= 0.1):
        raise ConfigValueError(f"dt must lie in (0, 0.1], got {dt!r}")
    if x0 is None:
        x0 = TruthState(0.0, EulerAttitude(0.0, 0.0, 0.0), np.zeros(3), np.zeros(3))
    n_steps = max(0, math.ceil(script.total_duration() / dt - 1e-9))
    step_rates = script.step_rates(dt, n_steps)
    try:
        states = _backend.truth_loop(
            np.ascontiguousarray(step_rates),
            dt,
            x0.as_array(),
            p.m,
            p.k1,
            p.g,
            p.thrust_mode == "trim",
            p.thrust_total,
            THETA_GUARD_RAD,
        )
    except AttitudeSingularityError as err:
        seg = _segment_of(script, dt, err.index)
        raise AttitudeSingularityError(
            f"simulation aborted in script segment {seg}: {err}", index=seg
        ) from None
    t = x0.t + dt * np.arange(n_steps + 1)
    rates = np.zeros((n_steps + 1, 3))
    if n_steps:
        rates[:n_steps] = step_rates
        rates[n_steps] = step_rates[-1]
    return TruthTrajectory(
        t=t,
        att=states[:, 0:3],
        vel_e=states[:, 3:6],
        pos_e=states[:, 6:9],
        rates=rates,
        meta={"dt": dt, "thrust_mode": p.thrust_mode},
    )


def _segment_of(script: ManeuverScript, dt: float, step: int | None) -> int:
    if step is None or not script.segments:
        return 0
    edges = np.cumsum([seg.duration for seg in script.segments])
    idx = int(np.searchsorted(edges, dt * step, side="right"))
    return min(idx, len(script.segments) - 1)
