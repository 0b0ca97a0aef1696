"""Array-level process and measurement model of the drag-aware filter.

State layout, fixed everywhere:

    x = [phi, theta, beta_gx, beta_gy, vbx, vby]

phi/theta are roll and pitch (rad), beta_g* are the roll/pitch gyro biases
(rad/s, first-order Gauss-Markov), vbx/vby are body-frame horizontal
velocities (m/s).  Gyro measurements are the model input; the z-axis gyro
bias is assumed calibrated out.  Rotor drag makes the horizontal
accelerometer axes read -(k1/m) * (vbx, vby), which is the measurement that
keeps the velocity states drift-free.

These functions are deliberately plain (no dataclasses, no validation): the
typed public API in ``ekf`` wraps them, and the pure-Python loop backend
runs them per sample.  The compiled backend re-implements the same formulas
in C; the two are held together by cross-backend equivalence tests.
"""

from __future__ import annotations

import math

import numpy as np

N_STATES = 6


def process_rhs(
    x: np.ndarray,
    gx: float,
    gy: float,
    gz: float,
    k1m: float,
    g: float,
    tau_gx: float,
    tau_gy: float,
) -> np.ndarray:
    """Time derivative of the state given gyro readings (rad/s)."""
    phi, theta = x[0], x[1]
    sphi, cphi = math.sin(phi), math.cos(phi)
    tth = math.tan(theta)
    rx = gx - x[2]
    ry = gy - x[3]
    return np.array(
        [
            rx + tth * sphi * ry + tth * cphi * gz,
            cphi * ry - sphi * gz,
            -x[2] / tau_gx,
            -x[3] / tau_gy,
            -g * math.sin(theta) - k1m * x[4],
            g * math.cos(theta) * sphi - k1m * x[5],
        ]
    )


def process_jacobian(
    x: np.ndarray,
    gx: float,
    gy: float,
    gz: float,
    k1m: float,
    g: float,
    tau_gx: float,
    tau_gy: float,
) -> np.ndarray:
    """d(process_rhs)/dx, evaluated analytically."""
    phi, theta = x[0], x[1]
    sphi, cphi = math.sin(phi), math.cos(phi)
    sth, cth = math.sin(theta), math.cos(theta)
    tth = math.tan(theta)
    sec2 = 1.0 + tth * tth
    ry = gy - x[3]
    F = np.zeros((N_STATES, N_STATES))
    F[0, 0] = tth * (cphi * ry - sphi * gz)
    F[0, 1] = sec2 * (sphi * ry + cphi * gz)
    F[0, 2] = -1.0
    F[0, 3] = -tth * sphi
    F[1, 0] = -sphi * ry - cphi * gz
    F[1, 3] = -cphi
    F[2, 2] = -1.0 / tau_gx
    F[3, 3] = -1.0 / tau_gy
    F[4, 1] = -g * cth
    F[4, 4] = -k1m
    F[5, 0] = g * cth * cphi
    F[5, 1] = -g * sth * sphi
    F[5, 5] = -k1m
    return F


def noise_gain(x: np.ndarray) -> np.ndarray:
    """Gain G mapping the white-noise vector w into state derivatives.

    w = (w_gx, w_gy, w_bgx, w_bgy, w_vx, w_vy): the two gyro noises enter
    the attitude rows through the same kinematic map as the gyro readings,
    the rest drive their own states directly.
    """
    phi, theta = x[0], x[1]
    G = np.eye(N_STATES)
    G[0, 1] = math.tan(theta) * math.sin(phi)
    G[1, 1] = math.cos(phi)
    return G


def discretize_cov(
    F: np.ndarray, Qc: np.ndarray, ts: float, trapezoid: bool
) -> tuple[np.ndarray, np.ndarray]:
    """First-order transition matrix and discrete process noise.

    A = I + F*Ts.  The integral of A(tau) Qc A(tau)^T over the step is
    approximated by the trapezoid rule (Qc + A Qc A^T) * Ts / 2, which is
    third-order accurate in Ts; ``trapezoid=False`` selects the plain Euler
    rectangle Qc * Ts for ablation.
    """
    A = np.eye(F.shape[0]) + F * ts
    if trapezoid:
        Qk = (Qc + A @ Qc @ A.T) * (ts / 2.0)
    else:
        Qk = Qc * ts
    return A, 0.5 * (Qk + Qk.T)


def truth_rhs(
    s: np.ndarray,
    wx: float,
    wy: float,
    wz: float,
    m: float,
    k1: float,
    g: float,
    trim: bool,
    thrust_fixed: float,
) -> np.ndarray:
    """Time derivative of the 9-component truth state.

    s = [phi, theta, psi, vx_e, vy_e, vz_e, x_e, y_e, z_e].  Forces: gravity
    (earth +z), total rotor thrust along -b3, and rotor drag -k1 * V_plane
    where V_plane is the velocity projected onto the rotor plane.  In trim
    mode the thrust is whatever cancels gravity along earth z at the current
    attitude (an altitude-hold idealisation); in fixed mode it is constant.
    """
    sphi, cphi = math.sin(s[0]), math.cos(s[0])
    sth, cth = math.sin(s[1]), math.cos(s[1])
    spsi, cpsi = math.sin(s[2]), math.cos(s[2])
    tth = math.tan(s[1])
    sec = 1.0 / cth
    b30 = cpsi * sth * cphi + spsi * sphi
    b31 = spsi * sth * cphi - cpsi * sphi
    b32 = cth * cphi
    thrust = m * g / (cphi * cth) if trim else thrust_fixed
    v0, v1, v2 = s[3], s[4], s[5]
    vdotb3 = (v0 * b30 + v1 * b31) + v2 * b32
    d = np.empty(9)
    d[0] = wx + tth * sphi * wy + tth * cphi * wz
    d[1] = cphi * wy - sphi * wz
    d[2] = sec * sphi * wy + sec * cphi * wz
    d[3] = -(thrust * b30 + k1 * (v0 - vdotb3 * b30)) / m
    d[4] = -(thrust * b31 + k1 * (v1 - vdotb3 * b31)) / m
    d[5] = g - (thrust * b32 + k1 * (v2 - vdotb3 * b32)) / m
    d[6] = v0
    d[7] = v1
    d[8] = v2
    return d


def wrap_pi(angle: float) -> float:
    """Wrap to (-pi, pi]; scalar twin of geometry.wrap_angle."""
    wrapped = math.remainder(angle, math.tau)
    if wrapped <= -math.pi:
        wrapped += math.tau
    return wrapped


def truth_rk2(
    s: np.ndarray,
    wx: float,
    wy: float,
    wz: float,
    dt: float,
    m: float,
    k1: float,
    g: float,
    trim: bool,
    thrust_fixed: float,
    theta_guard: float,
) -> np.ndarray:
    """One midpoint (RK2) step of the truth dynamics.

    Returns the advanced 9-vector with phi/psi wrapped to (-pi, pi), or
    raises if the pitch guard is violated at the midpoint or endpoint.
    """
    from dragekf.errors import AttitudeSingularityError

    d1 = truth_rhs(s, wx, wy, wz, m, k1, g, trim, thrust_fixed)
    mid = s + (0.5 * dt) * d1
    if abs(mid[1]) > theta_guard:
        raise AttitudeSingularityError(
            f"midpoint pitch {mid[1]:.4f} rad exceeds the guard"
        )
    d2 = truth_rhs(mid, wx, wy, wz, m, k1, g, trim, thrust_fixed)
    out = s + dt * d2
    if abs(out[1]) > theta_guard:
        raise AttitudeSingularityError(f"pitch {out[1]:.4f} rad exceeds the guard")
    out[0] = wrap_pi(out[0])
    out[2] = wrap_pi(out[2])
    return out


def kalman_update(
    x: np.ndarray,
    P: np.ndarray,
    ax: float,
    ay: float,
    kappa: float,
    r_ax: float,
    r_ay: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, bool, float]:
    """Joseph-form measurement update with z = (ax, ay), H = -kappa on v rows.

    Returns (x_new, P_new, innovation, ok, asym); ok is False when the
    innovation covariance is not invertible, which the caller turns into an
    error.  asym is the worst elementwise asymmetry of the covariance before
    it is re-symmetrised, a cheap per-step health number.
    """
    innov = np.array([ax + kappa * x[4], ay + kappa * x[5]])
    s00 = kappa * kappa * P[4, 4] + r_ax
    s11 = kappa * kappa * P[5, 5] + r_ay
    s01 = kappa * kappa * P[4, 5]
    det = s00 * s11 - s01 * s01
    if not (math.isfinite(det) and det > 0.0 and s00 > 0.0):
        return x, P, innov, False, 0.0
    # K = P H^T S^-1 with H^T columns = -kappa * e4, -kappa * e5
    pht = np.empty((N_STATES, 2))
    pht[:, 0] = -kappa * P[:, 4]
    pht[:, 1] = -kappa * P[:, 5]
    sinv = np.array([[s11, -s01], [-s01, s00]]) / det
    K = pht @ sinv
    x_new = x + K @ innov
    ikh = np.eye(N_STATES)
    ikh[:, 4] += kappa * K[:, 0]
    ikh[:, 5] += kappa * K[:, 1]
    P_new = ikh @ P @ ikh.T + (r_ax * np.outer(K[:, 0], K[:, 0]) + r_ay * np.outer(K[:, 1], K[:, 1]))
    asym = float(np.abs(P_new - P_new.T).max())
    return x_new, 0.5 * (P_new + P_new.T), innov, True, asym
