"""Drag-aware extended Kalman filter.

Six states -- roll, pitch, two gyro biases, body-frame horizontal velocity:

    x = [phi, theta, beta_gx, beta_gy, vbx, vby]

Gyro readings drive the process model through the Euler-rate kinematics
(z-axis gyro bias assumed calibrated out); biases decay as first-order
Gauss-Markov processes; velocities follow the near-hover force balance
vbx' = -g*sin(theta) - (k1/m)*vbx (and the roll analogue).  The horizontal
accelerometer axes measure -(k1/m) * (vbx, vby): rotor drag gives velocity
a direct, drift-free observation, which in turn makes roll, pitch and the
gyro biases observable without any attitude reference.

Mechanisation: midpoint RK2 for the state, A = I + F*Ts with F the
analytic Jacobian at the pre-step state, trapezoidal discretisation of the
process noise, Joseph-form updates.  Covariances are re-symmetrised and
checked for positive definiteness every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from dragekf import _backend, _model
from dragekf.errors import (
    AttitudeSingularityError,
    ConfigValueError,
    CovarianceBlowupError,
    NumericalError,
    ShapeError,
)
from dragekf.estimates import EstimateTrajectory
from dragekf.geometry import G_STD, THETA_GUARD_RAD, BodyRates
from dragekf.linops import (
    as_matrix,
    as_vector,
    require_positive_definite,
    require_symmetric,
)

if TYPE_CHECKING:
    from dragekf.sensors import ImuLog, NoiseConfig
    from dragekf.truthsim import VehicleParams

STATE_LABELS = ("phi", "theta", "beta_gx", "beta_gy", "vbx", "vby")

_DEG5_SQ = math.radians(5.0) ** 2

#: Default PSD absorbing the velocity-model error (the neglected rate/velocity
#: coupling terms), (m/s^2)^2 * s.  Chosen so that near-hover maneuvering
#: stays consistent; it is the one knob that is tuned rather than derived.
DEFAULT_W_VEL = 0.04


@dataclass(frozen=True)
class FilterConfig:
    """Model constants, noise levels and initial condition of the filter.

    w_* are continuous-time noise densities feeding the process model
    (rad^2/s for the attitude rows driven by gyro noise, rad^2/s^3 for the
    bias rows, m^2/s^3 for velocity); sigma_ax/ay are per-sample
    accelerometer noise standard deviations, squared into R.  ``matched``
    builds the config whose densities correspond exactly to a synthesis
    NoiseConfig at the nominal rate.
    """

    k1: float = 0.57
    m: float = 0.42
    g: float = G_STD
    tau_gx: float = 100.0
    tau_gy: float = 100.0
    w: tuple[float, ...] = (5e-7, 5e-7, 2e-6, 2e-6, DEFAULT_W_VEL, DEFAULT_W_VEL)
    sigma_ax: float = 0.05
    sigma_ay: float = 0.05
    x0: tuple[float, ...] = (0.0,) * 6
    p0: tuple[float, ...] = (_DEG5_SQ, _DEG5_SQ, 4e-4, 4e-4, 0.25, 0.25)
    ts_nominal: float = 0.005
    trace_ceiling: float = 1e6
    qk_mode: str = "trapezoid"

    def __post_init__(self):
        for name in ("k1", "m", "g", "tau_gx", "tau_gy", "sigma_ax", "sigma_ay",
                     "ts_nominal", "trace_ceiling"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise ConfigValueError(f"{name} must be positive, got {v!r}")
        w = tuple(float(v) for v in self.w)
        p0 = tuple(float(v) for v in self.p0)
        x0 = tuple(float(v) for v in self.x0)
        if len(w) != 6 or len(p0) != 6 or len(x0) != 6:
            raise ConfigValueError("w, x0 and p0 must each hold six values")
        if any(not (math.isfinite(v) and v > 0.0) for v in w + p0):
            raise ConfigValueError("process noise densities and p0 variances must be positive")
        if any(not math.isfinite(v) for v in x0):
            raise ConfigValueError("x0 must be finite")
        if self.qk_mode not in ("trapezoid", "euler"):
            raise ConfigValueError(f"qk_mode must be trapezoid or euler, got {self.qk_mode!r}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "x0", x0)

    @property
    def kappa(self) -> float:
        """Drag rate constant k1/m (1/s)."""
        return self.k1 / self.m

    @property
    def W(self) -> np.ndarray:
        return np.diag(self.w)

    @property
    def R(self) -> np.ndarray:
        return np.diag([self.sigma_ax**2, self.sigma_ay**2])

    @classmethod
    def matched(
        cls,
        noise: "NoiseConfig",
        vehicle: "VehicleParams",
        w_vel: float = DEFAULT_W_VEL,
        ts_nominal: float = 0.005,
        **overrides,
    ) -> "FilterConfig":
        """Config consistent with a synthesis noise model.

        Per-sample gyro noise of std sigma_g held over one nominal period
        has density sigma_g^2 * Ts; the bias drive density sigma_bg^2 is
        already continuous; accelerometer noise enters R per sample.
        """
        w_g = noise.sigma_g**2 * ts_nominal
        w_bg = noise.sigma_bg**2
        kwargs = dict(
            k1=vehicle.k1,
            m=vehicle.m,
            g=vehicle.g,
            tau_gx=noise.tau_g,
            tau_gy=noise.tau_g,
            w=(w_g, w_g, w_bg, w_bg, w_vel, w_vel),
            sigma_ax=noise.sigma_a,
            sigma_ay=noise.sigma_a,
            ts_nominal=ts_nominal,
        )
        kwargs.update(overrides)
        return cls(**kwargs)

    def scaled(self, factor: float) -> "FilterConfig":
        """All covariance-like quantities (p0, W, R) scaled by ``factor``."""
        if not (math.isfinite(factor) and factor > 0.0):
            raise ConfigValueError(f"scale factor must be positive, got {factor!r}")
        return replace(
            self,
            w=tuple(v * factor for v in self.w),
            p0=tuple(v * factor for v in self.p0),
            sigma_ax=self.sigma_ax * math.sqrt(factor),
            sigma_ay=self.sigma_ay * math.sqrt(factor),
        )


@dataclass(frozen=True)
class FilterState:
    """State estimate with covariance at a time instant.

    Construction enforces the running invariants: finite entries, P
    symmetric within 1e-10 and positive definite, pitch inside the guard.
    """

    x: np.ndarray
    P: np.ndarray
    t: float

    def __post_init__(self):
        x = as_vector(self.x, 6, "x")
        P = as_matrix(self.P, 6, 6, "P")
        if not (math.isfinite(self.t) and np.all(np.isfinite(x))):
            raise ShapeError("state must be finite")
        if abs(x[1]) > THETA_GUARD_RAD:
            from dragekf.errors import AttitudeSingularityError

            raise AttitudeSingularityError(
                f"pitch estimate {x[1]:.4f} rad exceeds the guard"
            )
        require_symmetric(P, 1e-10, "P")
        require_positive_definite(P, "P")
        x.flags.writeable = False
        P.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)

    def sigmas(self) -> np.ndarray:
        return np.sqrt(np.diag(self.P))


def initial_state(cfg: FilterConfig, t: float = 0.0) -> FilterState:
    return FilterState(np.array(cfg.x0), np.diag(cfg.p0), t)


def process_derivative(x: np.ndarray, gyro: BodyRates, cfg: FilterConfig) -> np.ndarray:
    """State derivative under gyro input; guards the pitch singularity."""
    x = as_vector(x, 6, "x")
    _guard_theta(x[1])
    return _model.process_rhs(
        x, gyro.wx, gyro.wy, gyro.wz, cfg.kappa, cfg.g, cfg.tau_gx, cfg.tau_gy
    )


def jacobian_F(x: np.ndarray, gyro: BodyRates, cfg: FilterConfig) -> np.ndarray:
    """Analytic d(process)/dx at the given state and gyro input."""
    x = as_vector(x, 6, "x")
    _guard_theta(x[1])
    return _model.process_jacobian(
        x, gyro.wx, gyro.wy, gyro.wz, cfg.kappa, cfg.g, cfg.tau_gx, cfg.tau_gy
    )


def build_G_W(x: np.ndarray, cfg: FilterConfig) -> tuple[np.ndarray, np.ndarray]:
    """Noise coupling G and diagonal density matrix W at the given state."""
    x = as_vector(x, 6, "x")
    _guard_theta(x[1])
    return _model.noise_gain(x), cfg.W


def discretize(
    F: np.ndarray, Qc: np.ndarray, ts: float, mode: str = "trapezoid"
) -> tuple[np.ndarray, np.ndarray]:
    """(A, Qk) for one step of length ts; see _model.discretize_cov."""
    F = as_matrix(F, 6, 6, "F")
    Qc = as_matrix(Qc, 6, 6, "Qc")
    if not (math.isfinite(ts) and ts > 0.0):
        raise ConfigValueError(f"ts must be positive, got {ts!r}")
    if mode not in ("trapezoid", "euler"):
        raise ConfigValueError(f"mode must be trapezoid or euler, got {mode!r}")
    return _model.discretize_cov(F, Qc, ts, mode == "trapezoid")


def predict(fs: FilterState, gyro: BodyRates, ts: float, cfg: FilterConfig) -> FilterState:
    """One RK2 propagation of state and covariance over ts seconds."""
    if not (math.isfinite(ts) and ts > 0.0):
        raise ConfigValueError(f"ts must be positive, got {ts!r}")
    x, P = fs.x, fs.P
    f1 = process_derivative(x, gyro, cfg)
    xm = x + (0.5 * ts) * f1
    _guard_theta(xm[1])
    f2 = _model.process_rhs(
        xm, gyro.wx, gyro.wy, gyro.wz, cfg.kappa, cfg.g, cfg.tau_gx, cfg.tau_gy
    )
    F = _model.process_jacobian(
        x, gyro.wx, gyro.wy, gyro.wz, cfg.kappa, cfg.g, cfg.tau_gx, cfg.tau_gy
    )
    G = _model.noise_gain(x)
    Qc = G @ cfg.W @ G.T
    A, Qk = _model.discretize_cov(F, Qc, ts, cfg.qk_mode == "trapezoid")
    x_new = x + ts * f2
    P_new = A @ P @ A.T + Qk
    P_new = 0.5 * (P_new + P_new.T)
    _guard_trace(P_new, cfg)
    return FilterState(x_new, P_new, fs.t + ts)


def update(fs: FilterState, ax: float, ay: float, cfg: FilterConfig) -> FilterState:
    """Joseph-form update with the horizontal accelerometer pair."""
    if not (math.isfinite(ax) and math.isfinite(ay)):
        raise ShapeError("accelerometer values must be finite")
    x, P, _innov, ok, _asym = _model.kalman_update(
        fs.x, fs.P, ax, ay, cfg.kappa, cfg.sigma_ax**2, cfg.sigma_ay**2
    )
    if not ok:
        raise NumericalError("innovation covariance not invertible")
    return FilterState(x, P, fs.t)


def run_filter(
    log: "ImuLog", cfg: FilterConfig, record_full_p: bool = False
) -> EstimateTrajectory:
    """Filter a whole log.

    Sample 0 is an update of the initial state; each later sample is a
    predict over the preceding interval followed by an update with that
    sample's horizontal accelerometer pair.  Propagation over the interval
    [t_{i-1}, t_i] uses the gyro sample at t_{i-1} (zero-order hold); gaps
    up to 10x the nominal period are covered by equal sub-steps of at most
    the nominal length, larger gaps are an error.  Returns per-sample
    state, 3-sigma bounds and innovations; ``record_full_p`` additionally
    keeps the full covariance history in ``meta["P_full"]``.
    """
    n = len(log)
    out_x = np.empty((n, 6))
    out_pdiag = np.empty((n, 6))
    out_innov = np.empty((n, 2))
    out_pfull = np.empty((n, 6, 6)) if record_full_p else None
    max_asym = _backend.ekf_loop(
        np.ascontiguousarray(log.t),
        np.ascontiguousarray(log.gyro),
        np.ascontiguousarray(log.accel[:, 0:2]),
        np.array(cfg.x0),
        np.diag(cfg.p0),
        cfg.kappa,
        cfg.g,
        cfg.tau_gx,
        cfg.tau_gy,
        np.array(cfg.w),
        cfg.sigma_ax**2,
        cfg.sigma_ay**2,
        cfg.ts_nominal,
        cfg.trace_ceiling,
        cfg.qk_mode == "trapezoid",
        THETA_GUARD_RAD,
        out_x,
        out_pdiag,
        out_innov,
        out_pfull,
    )
    meta = {"backend": _backend.BACKEND_NAME, "max_p_asym": float(max_asym)}
    if record_full_p:
        meta["P_full"] = out_pfull
    return EstimateTrajectory(
        t=log.t.copy(),
        x=out_x,
        sig3=3.0 * np.sqrt(out_pdiag),
        innov=out_innov,
        source="drag",
        meta=meta,
    )


def _guard_theta(theta: float) -> None:
    if abs(theta) > THETA_GUARD_RAD:
        raise AttitudeSingularityError(
            f"pitch {theta:.4f} rad exceeds the {THETA_GUARD_RAD:.4f} rad guard"
        )


def _guard_trace(P: np.ndarray, cfg: FilterConfig) -> None:
    tr = float(np.trace(P))
    if not math.isfinite(tr) or tr > cfg.trace_ceiling:
        raise CovarianceBlowupError(
            f"covariance trace {tr:.3e} exceeds ceiling {cfg.trace_ceiling:.3e}"
        )
