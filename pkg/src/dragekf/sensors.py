"""IMU synthesis: ideal readings from truth plus a parametric error model.

The accelerometer measures specific force in body axes.  With thrust along
-b3 and rotor drag -k1 * V_plane, the horizontal axes read exactly

    a_x = -(k1/m) * vbx,    a_y = -(k1/m) * vby

(gravity is invisible to an accelerometer), and a_z = -thrust/m.  The gyro
reads body rates plus a first-order Gauss-Markov bias plus white noise.

Determinism contract: one ``numpy.random.default_rng(seed)`` generator,
drawing in a fixed order -- (1) bias-step normals, shape (N-1, 3); (2) gyro
white noise, shape (N, 3); (3) accelerometer white noise, shape (N, 3).
Bias trajectories are produced by the same scalar ``step_bias`` arithmetic
the tests replay, so replays are bit-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from dragekf.errors import ConfigValueError, DataError, NonMonotonicTimeError, ShapeError
from dragekf.geometry import body_velocity
from dragekf.linops import as_vector
from dragekf.truthsim import TruthState, TruthTrajectory, VehicleParams, thrust_for

#: sigma_bg default: drive noise giving the Gauss-Markov bias a stationary
#: standard deviation of 0.01 rad/s at tau_g = 100 s (sigma_bg = std*sqrt(2/tau)).
DEFAULT_SIGMA_BG = 0.01 * math.sqrt(2.0 / 100.0)


@dataclass(frozen=True)
class NoiseConfig:
    """Sensor error model parameters; one value applies to every axis.

    sigma_g and sigma_a are per-sample white noise standard deviations
    (rad/s and m/s^2).  The gyro bias on each axis follows
    d(beta)/dt = -beta/tau_g + w with drive density sigma_bg; beta_g0 sets
    the initial biases.  The z entry defaults to zero on the assumption
    that the yaw gyro bias was calibrated out before flight, matching what
    the filter assumes.
    """

    sigma_g: float = 0.01
    sigma_bg: float = DEFAULT_SIGMA_BG
    tau_g: float = 100.0
    sigma_a: float = 0.05
    beta_g0: tuple[float, float, float] = (0.02, 0.02, 0.0)
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_g", "sigma_bg", "sigma_a"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0.0):
                raise ConfigValueError(f"{name} must be >= 0, got {v!r}")
        if not (math.isfinite(self.tau_g) and self.tau_g > 0.0):
            raise ConfigValueError(f"tau_g must be positive, got {self.tau_g!r}")
        beta = tuple(float(b) for b in self.beta_g0)
        if len(beta) != 3 or not all(math.isfinite(b) for b in beta):
            raise ConfigValueError(f"beta_g0 must be three finite values, got {self.beta_g0!r}")
        object.__setattr__(self, "beta_g0", beta)
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class ImuSample:
    t: float
    gyro: np.ndarray
    accel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gyro", as_vector(self.gyro, 3, "gyro"))
        object.__setattr__(self, "accel", as_vector(self.accel, 3, "accel"))


@dataclass
class ImuLog:
    """Array-of-samples IMU log.

    ``bias_truth`` and ``noise`` record synthesis provenance (the actual
    bias trajectory and the generating config); both are None for logs read
    back from CSV, whose schema does not carry them.
    """

    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray
    noise: NoiseConfig | None = None
    bias_truth: np.ndarray | None = None
    source: str = "sim"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        n = self.t.shape[0]
        if n == 0:
            raise ShapeError("IMU log must contain at least one sample")
        for name in ("gyro", "accel"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n, 3):
                raise ShapeError(f"{name} must have shape ({n}, 3), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} contains non-finite values")
            setattr(self, name, arr)
        if self.bias_truth is not None:
            self.bias_truth = np.asarray(self.bias_truth, dtype=float)
            if self.bias_truth.shape != (n, 3):
                raise ShapeError(f"bias_truth must have shape ({n}, 3)")
        if n > 1 and np.any(np.diff(self.t) <= 0.0):
            bad = int(np.argmax(np.diff(self.t) <= 0.0)) + 1
            raise NonMonotonicTimeError(
                f"sample {bad}: timestamps must strictly increase", index=bad
            )

    def __len__(self) -> int:
        return self.t.shape[0]

    def sample(self, i: int) -> ImuSample:
        return ImuSample(float(self.t[i]), self.gyro[i], self.accel[i])


def ideal_accel(s: TruthState, p: VehicleParams) -> np.ndarray:
    """Noise-free accelerometer reading for a truth state.

    Computed through the same batch kernels as ``synthesize`` so the two
    agree bit-for-bit; gravity never appears because an accelerometer
    senses specific force only.
    """
    att = np.array([[s.att.phi, s.att.theta, s.att.psi]])
    v_b = body_velocity(att, s.vel_e[np.newaxis, :])
    kappa = p.k1 / p.m
    if p.thrust_mode == "trim":
        thrust = p.m * p.g / (np.cos(att[0, 0]) * np.cos(att[0, 1]))
    else:
        thrust = p.thrust_total
    return np.array([-kappa * v_b[0, 0], -kappa * v_b[0, 1], -thrust / p.m])


def step_bias(beta: float, tau: float, sigma: float, dt: float, noise_draw: float) -> float:
    """Advance a Gauss-Markov bias by dt using an exact discretisation.

    beta' = exp(-dt/tau) * beta + w,  w ~ N(0, sigma^2 * tau/2 * (1 - exp(-2dt/tau)));
    ``noise_draw`` is the standard normal variate scaled inside.  Exact for
    any dt, stationary variance sigma^2 * tau / 2.
    """
    if not (dt > 0.0 and tau > 0.0):
        raise ConfigValueError(f"dt and tau must be positive, got dt={dt!r}, tau={tau!r}")
    decay = math.exp(-dt / tau)
    scale = sigma * math.sqrt(0.5 * tau * (1.0 - decay * decay))
    return decay * beta + scale * noise_draw


def synthesize(traj: TruthTrajectory, p: VehicleParams, nc: NoiseConfig) -> ImuLog:
    """Produce an IMU log from a truth trajectory.

    The trajectory must carry its body-rate channel (simulator output does;
    truth read back from CSV does not, since the file schema has no rate
    columns -- re-attach the script first).  The final sample repeats the
    final step's rates, consistent with the zero-order-hold convention.
    """
    if traj.rates is None:
        raise DataError(
            "trajectory carries no body-rate channel; synthesize needs simulator "
            "output or a trajectory with the maneuver script re-attached"
        )
    n = len(traj)
    t = traj.t
    rng = np.random.default_rng(nc.seed)
    z_bias = rng.standard_normal((max(n - 1, 0), 3))
    z_gyro = rng.standard_normal((n, 3))
    z_accel = rng.standard_normal((n, 3))

    bias = np.empty((n, 3))
    bias[0] = nc.beta_g0
    for k in range(1, n):
        dt = float(t[k] - t[k - 1])
        for axis in range(3):
            bias[k, axis] = step_bias(
                bias[k - 1, axis], nc.tau_g, nc.sigma_bg, dt, z_bias[k - 1, axis]
            )

    v_b = body_velocity(traj.att, traj.vel_e)
    kappa = p.k1 / p.m
    if p.thrust_mode == "trim":
        thrust = p.m * p.g / (np.cos(traj.att[:, 0]) * np.cos(traj.att[:, 1]))
    else:
        thrust = np.full(n, p.thrust_total)
    ideal = np.empty((n, 3))
    ideal[:, 0] = -kappa * v_b[:, 0]
    ideal[:, 1] = -kappa * v_b[:, 1]
    ideal[:, 2] = -thrust / p.m
    gyro = traj.rates + bias + nc.sigma_g * z_gyro
    accel = ideal + nc.sigma_a * z_accel
    return ImuLog(
        t=t.copy(),
        gyro=gyro,
        accel=accel,
        noise=nc,
        bias_truth=bias,
        source="sim",
        meta={"seed": nc.seed},
    )
