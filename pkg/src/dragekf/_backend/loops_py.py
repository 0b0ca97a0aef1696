"""Pure-Python / NumPy implementations of the three inner loops.

Reference semantics for the compiled extension: same signatures, same
formulas (via ``dragekf._model``), same error behaviour.  Raw arrays in,
raw arrays out; the typed wrappers live in ``truthsim``, ``ekf`` and
``baseline``.
"""

from __future__ import annotations

import math

import numpy as np

from dragekf import _model
from dragekf.errors import (
    AttitudeSingularityError,
    CovarianceBlowupError,
    DataError,
    NonMonotonicTimeError,
    NotPositiveDefiniteError,
    NumericalError,
)

BACKEND_NAME = "python"


def truth_loop(
    step_rates: np.ndarray,
    dt: float,
    state0: np.ndarray,
    m: float,
    k1: float,
    g: float,
    trim: bool,
    thrust_fixed: float,
    theta_guard: float,
) -> np.ndarray:
    """Integrate N steps of truth dynamics; returns an (N+1, 9) state array."""
    n = step_rates.shape[0]
    out = np.empty((n + 1, 9))
    out[0] = state0
    s = np.asarray(state0, dtype=float).copy()
    for k in range(n):
        try:
            s = _model.truth_rk2(
                s,
                step_rates[k, 0],
                step_rates[k, 1],
                step_rates[k, 2],
                dt,
                m,
                k1,
                g,
                trim,
                thrust_fixed,
                theta_guard,
            )
        except AttitudeSingularityError as err:
            raise AttitudeSingularityError(f"step {k}: {err}", index=k) from None
        out[k + 1] = s
    return out


def ekf_loop(
    t: np.ndarray,
    gyro: np.ndarray,
    accel_xy: np.ndarray,
    x0: np.ndarray,
    P0: np.ndarray,
    kappa: float,
    g: float,
    tau_gx: float,
    tau_gy: float,
    w_diag: np.ndarray,
    r_ax: float,
    r_ay: float,
    ts_nominal: float,
    trace_ceiling: float,
    trapezoid: bool,
    theta_guard: float,
    out_x: np.ndarray,
    out_pdiag: np.ndarray,
    out_innov: np.ndarray,
    out_pfull: np.ndarray | None = None,
) -> float:
    """Run the full predict/update cycle over a log.

    Sample 0 is a measurement update of (x0, P0); every later sample is a
    predict over the preceding interval (sub-stepped at the nominal period
    when the gap is longer) followed by an update.  Per-sample checks:
    strictly increasing t, gaps at most 10x nominal, pitch guard at every
    evaluation point, covariance positive definite with bounded trace.
    Returns the worst covariance asymmetry seen before re-symmetrisation.
    """
    n = t.shape[0]
    x = np.asarray(x0, dtype=float).copy()
    P = np.asarray(P0, dtype=float).copy()
    W = np.diag(w_diag)
    max_asym = 0.0

    def _store(i: int) -> None:
        out_x[i] = x
        out_pdiag[i] = np.diag(P)
        if out_pfull is not None:
            out_pfull[i] = P

    def _update(i: int) -> None:
        nonlocal x, P, max_asym
        x, P, innov, ok, asym = _model.kalman_update(
            x, P, accel_xy[i, 0], accel_xy[i, 1], kappa, r_ax, r_ay
        )
        if not ok:
            raise NumericalError(f"sample {i}: innovation covariance not invertible", index=i)
        if asym > max_asym:
            max_asym = asym
        out_innov[i] = innov
        _checks(i)

    def _checks(i: int) -> None:
        if abs(x[1]) > theta_guard:
            raise AttitudeSingularityError(
                f"sample {i}: pitch estimate {x[1]:.4f} rad exceeds the guard", index=i
            )
        tr = float(np.trace(P))
        if not math.isfinite(tr) or tr > trace_ceiling:
            raise CovarianceBlowupError(
                f"sample {i}: covariance trace {tr:.3e} exceeds ceiling {trace_ceiling:.3e}",
                index=i,
            )
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError(
                f"sample {i}: covariance lost positive definiteness", index=i
            ) from None

    _update(0)
    _store(0)
    for i in range(1, n):
        dt = t[i] - t[i - 1]
        if dt <= 0.0:
            raise NonMonotonicTimeError(
                f"sample {i}: timestamp {float(t[i])!r} does not increase past {float(t[i - 1])!r}", index=i
            )
        if dt > 10.0 * ts_nominal * (1.0 + 1e-9):
            raise DataError(
                f"sample {i}: gap {dt:.6g} s exceeds 10x the nominal period", index=i
            )
        n_sub = max(1, math.ceil(dt / ts_nominal - 1e-9))
        h = dt / n_sub
        gx, gy, gz = gyro[i - 1, 0], gyro[i - 1, 1], gyro[i - 1, 2]
        for _ in range(n_sub):
            f1 = _model.process_rhs(x, gx, gy, gz, kappa, g, tau_gx, tau_gy)
            xm = x + (0.5 * h) * f1
            if abs(xm[1]) > theta_guard:
                raise AttitudeSingularityError(
                    f"sample {i}: midpoint pitch exceeds the guard", index=i
                )
            f2 = _model.process_rhs(xm, gx, gy, gz, kappa, g, tau_gx, tau_gy)
            F = _model.process_jacobian(x, gx, gy, gz, kappa, g, tau_gx, tau_gy)
            G = _model.noise_gain(x)
            Qc = G @ W @ G.T
            A, Qk = _model.discretize_cov(F, Qc, h, trapezoid)
            x = x + h * f2
            P = A @ P @ A.T + Qk
            asym = float(np.abs(P - P.T).max())
            if asym > max_asym:
                max_asym = asym
            P = 0.5 * (P + P.T)
            if abs(x[1]) > theta_guard:
                raise AttitudeSingularityError(
                    f"sample {i}: pitch estimate exceeds the guard", index=i
                )
        _update(i)
        _store(i)
    return max_asym


def generic_loop(
    t: np.ndarray,
    gyro: np.ndarray,
    accel: np.ndarray,
    alpha: float,
    g: float,
    ts_nominal: float,
    theta_guard: float,
    out_att: np.ndarray,
    out_ve: np.ndarray,
) -> None:
    """Complementary attitude plus direct velocity integration.

    Attitude: Euler-integrate body rates through the Euler-rate map, then
    every step pull roll/pitch toward the accelerometer attitude by
    alpha*dt whenever the accelerometer magnitude is above half of gravity.
    Velocity: rotate specific force to earth axes, add gravity, integrate.
    States start at zero (mirroring the filter); no bias estimation.
    """
    n = t.shape[0]
    half_g = 0.5 * g
    phi = theta = psi = 0.0
    ve = np.zeros(3)
    out_att[0] = (phi, theta, psi)
    out_ve[0] = ve
    for i in range(1, n):
        dt = t[i] - t[i - 1]
        if dt <= 0.0:
            raise NonMonotonicTimeError(
                f"sample {i}: timestamp {float(t[i])!r} does not increase past {float(t[i - 1])!r}", index=i
            )
        if dt > 10.0 * ts_nominal * (1.0 + 1e-9):
            raise DataError(
                f"sample {i}: gap {dt:.6g} s exceeds 10x the nominal period", index=i
            )
        sphi, cphi = math.sin(phi), math.cos(phi)
        cth = math.cos(theta)
        tth = math.tan(theta)
        sec = 1.0 / cth
        wx, wy, wz = gyro[i - 1, 0], gyro[i - 1, 1], gyro[i - 1, 2]
        ax, ay, az = accel[i - 1, 0], accel[i - 1, 1], accel[i - 1, 2]
        # velocity first, with the attitude at the start of the interval
        sth = math.sin(theta)
        spsi, cpsi = math.sin(psi), math.cos(psi)
        ve[0] += dt * (
            cpsi * cth * ax
            + (cpsi * sth * sphi - spsi * cphi) * ay
            + (cpsi * sth * cphi + spsi * sphi) * az
        )
        ve[1] += dt * (
            spsi * cth * ax
            + (spsi * sth * sphi + cpsi * cphi) * ay
            + (spsi * sth * cphi - cpsi * sphi) * az
        )
        ve[2] += dt * (-sth * ax + cth * sphi * ay + cth * cphi * az + g)
        phi += dt * (wx + tth * sphi * wy + tth * cphi * wz)
        theta += dt * (cphi * wy - sphi * wz)
        psi += dt * (sec * sphi * wy + sec * cphi * wz)
        axc, ayc, azc = accel[i, 0], accel[i, 1], accel[i, 2]
        norm = math.sqrt(axc * axc + ayc * ayc + azc * azc)
        if norm > half_g:
            phi_acc = math.atan2(-ayc, -azc)
            theta_acc = math.atan2(axc, math.sqrt(ayc * ayc + azc * azc))
            phi += alpha * dt * (phi_acc - phi)
            theta += alpha * dt * (theta_acc - theta)
        phi = _model.wrap_pi(phi)
        psi = _model.wrap_pi(psi)
        if abs(theta) > theta_guard:
            raise AttitudeSingularityError(
                f"sample {i}: pitch estimate {theta:.4f} rad exceeds the guard", index=i
            )
        out_att[i] = (phi, theta, psi)
        out_ve[i] = ve
