# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled twins of the pure-Python inner loops.

Formula-for-formula mirrors of ``dragekf._model`` and
``dragekf._backend.loops_py``: same state layouts, same update order, same
error types with the same sample indices.  Sums inside the small matrix
products run in the same ascending-index order as the NumPy reference, so
the two backends agree to rounding (held together by equivalence tests,
not assumed bit-identical).  Built with -O2 and without -ffast-math on
purpose: IEEE semantics are part of the contract.
"""

import numpy as np

from libc.math cimport (
    M_PI,
    atan2,
    ceil,
    cos,
    fabs,
    isfinite,
    remainder,
    sin,
    sqrt,
    tan,
)

from dragekf.errors import (
    AttitudeSingularityError,
    CovarianceBlowupError,
    DataError,
    NonMonotonicTimeError,
    NotPositiveDefiniteError,
    NumericalError,
)

BACKEND_NAME = "compiled"

cdef double TAU = 2.0 * M_PI


cdef inline double _wrap_pi(double a) noexcept nogil:
    cdef double w = remainder(a, TAU)
    if w <= -M_PI:
        w += TAU
    return w


# --- truth dynamics ---------------------------------------------------------

cdef void _truth_rhs(
    const double* s, double wx, double wy, double wz,
    double m, double k1, double g, bint trim, double thrust_fixed,
    double* d,
) noexcept nogil:
    cdef double sphi = sin(s[0])
    cdef double cphi = cos(s[0])
    cdef double sth = sin(s[1])
    cdef double cth = cos(s[1])
    cdef double spsi = sin(s[2])
    cdef double cpsi = cos(s[2])
    cdef double tth = tan(s[1])
    cdef double sec = 1.0 / cth
    cdef double b30 = cpsi * sth * cphi + spsi * sphi
    cdef double b31 = spsi * sth * cphi - cpsi * sphi
    cdef double b32 = cth * cphi
    cdef double thrust
    if trim:
        thrust = m * g / (cphi * cth)
    else:
        thrust = thrust_fixed
    cdef double v0 = s[3]
    cdef double v1 = s[4]
    cdef double v2 = s[5]
    cdef double vdotb3 = (v0 * b30 + v1 * b31) + v2 * b32
    d[0] = wx + tth * sphi * wy + tth * cphi * wz
    d[1] = cphi * wy - sphi * wz
    d[2] = sec * sphi * wy + sec * cphi * wz
    d[3] = -(thrust * b30 + k1 * (v0 - vdotb3 * b30)) / m
    d[4] = -(thrust * b31 + k1 * (v1 - vdotb3 * b31)) / m
    d[5] = g - (thrust * b32 + k1 * (v2 - vdotb3 * b32)) / m
    d[6] = v0
    d[7] = v1
    d[8] = v2


def truth_loop(
    double[:, ::1] step_rates,
    double dt,
    double[::1] state0,
    double m,
    double k1,
    double g,
    bint trim,
    double thrust_fixed,
    double theta_guard,
):
    """Integrate N steps of truth dynamics; returns an (N+1, 9) state array."""
    cdef Py_ssize_t n = step_rates.shape[0]
    out_arr = np.empty((n + 1, 9))
    cdef double[:, ::1] out = out_arr
    cdef double s[9]
    cdef double mid[9]
    cdef double d1[9]
    cdef double d2[9]
    cdef Py_ssize_t k, j
    for j in range(9):
        s[j] = state0[j]
        out[0, j] = s[j]
    for k in range(n):
        _truth_rhs(s, step_rates[k, 0], step_rates[k, 1], step_rates[k, 2],
                   m, k1, g, trim, thrust_fixed, d1)
        for j in range(9):
            mid[j] = s[j] + (0.5 * dt) * d1[j]
        if fabs(mid[1]) > theta_guard:
            raise AttitudeSingularityError(
                f"step {k}: midpoint pitch {mid[1]:.4f} rad exceeds the guard",
                index=k,
            )
        _truth_rhs(mid, step_rates[k, 0], step_rates[k, 1], step_rates[k, 2],
                   m, k1, g, trim, thrust_fixed, d2)
        for j in range(9):
            s[j] = s[j] + dt * d2[j]
        if fabs(s[1]) > theta_guard:
            raise AttitudeSingularityError(
                f"step {k}: pitch {s[1]:.4f} rad exceeds the guard", index=k
            )
        s[0] = _wrap_pi(s[0])
        s[2] = _wrap_pi(s[2])
        for j in range(9):
            out[k + 1, j] = s[j]
    return out_arr


# --- drag filter ------------------------------------------------------------

cdef void _process_rhs(
    const double* x, double gx, double gy, double gz,
    double k1m, double g, double tau_gx, double tau_gy, double* f,
) noexcept nogil:
    cdef double sphi = sin(x[0])
    cdef double cphi = cos(x[0])
    cdef double tth = tan(x[1])
    cdef double rx = gx - x[2]
    cdef double ry = gy - x[3]
    f[0] = rx + tth * sphi * ry + tth * cphi * gz
    f[1] = cphi * ry - sphi * gz
    f[2] = -x[2] / tau_gx
    f[3] = -x[3] / tau_gy
    f[4] = -g * sin(x[1]) - k1m * x[4]
    f[5] = g * cos(x[1]) * sphi - k1m * x[5]


cdef void _process_jacobian(
    const double* x, double gx, double gy, double gz,
    double k1m, double g, double tau_gx, double tau_gy, double* F,
) noexcept nogil:
    cdef double sphi = sin(x[0])
    cdef double cphi = cos(x[0])
    cdef double sth = sin(x[1])
    cdef double cth = cos(x[1])
    cdef double tth = tan(x[1])
    cdef double sec2 = 1.0 + tth * tth
    cdef double ry = gy - x[3]
    cdef Py_ssize_t i
    for i in range(36):
        F[i] = 0.0
    F[0 * 6 + 0] = tth * (cphi * ry - sphi * gz)
    F[0 * 6 + 1] = sec2 * (sphi * ry + cphi * gz)
    F[0 * 6 + 2] = -1.0
    F[0 * 6 + 3] = -tth * sphi
    F[1 * 6 + 0] = -sphi * ry - cphi * gz
    F[1 * 6 + 3] = -cphi
    F[2 * 6 + 2] = -1.0 / tau_gx
    F[3 * 6 + 3] = -1.0 / tau_gy
    F[4 * 6 + 1] = -g * cth
    F[4 * 6 + 4] = -k1m
    F[5 * 6 + 0] = g * cth * cphi
    F[5 * 6 + 1] = -g * sth * sphi
    F[5 * 6 + 5] = -k1m


cdef void _qc_from_state(const double* x, const double* w, double* Qc) noexcept nogil:
    # Qc = G W G^T with G = I except G[0,1] = tan(theta)sin(phi), G[1,1] = cos(phi)
    cdef double G[36]
    cdef Py_ssize_t i, j, k
    for i in range(36):
        G[i] = 0.0
    for i in range(6):
        G[i * 6 + i] = 1.0
    G[0 * 6 + 1] = tan(x[1]) * sin(x[0])
    G[1 * 6 + 1] = cos(x[0])
    cdef double acc
    for i in range(6):
        for j in range(6):
            acc = 0.0
            for k in range(6):
                acc += G[i * 6 + k] * w[k] * G[j * 6 + k]
            Qc[i * 6 + j] = acc


cdef void _mat_mul(const double* A, const double* B, double* C) noexcept nogil:
    # C = A B, 6x6, ascending-k sums
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(6):
        for j in range(6):
            acc = 0.0
            for k in range(6):
                acc += A[i * 6 + k] * B[k * 6 + j]
            C[i * 6 + j] = acc


cdef void _mat_mul_bt(const double* A, const double* B, double* C) noexcept nogil:
    # C = A B^T, 6x6
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(6):
        for j in range(6):
            acc = 0.0
            for k in range(6):
                acc += A[i * 6 + k] * B[j * 6 + k]
            C[i * 6 + j] = acc


cdef bint _cholesky_ok(const double* P) noexcept nogil:
    # succeeds iff P is numerically positive definite
    cdef double L[36]
    cdef Py_ssize_t i, j, k
    cdef double acc
    for j in range(6):
        acc = P[j * 6 + j]
        for k in range(j):
            acc -= L[j * 6 + k] * L[j * 6 + k]
        if not (isfinite(acc) and acc > 0.0):
            return False
        L[j * 6 + j] = sqrt(acc)
        for i in range(j + 1, 6):
            acc = P[i * 6 + j]
            for k in range(j):
                acc -= L[i * 6 + k] * L[j * 6 + k]
            L[i * 6 + j] = acc / L[j * 6 + j]
    return True


def ekf_loop(
    double[::1] t,
    double[:, ::1] gyro,
    double[:, ::1] accel_xy,
    double[::1] x0,
    double[:, ::1] P0,
    double kappa,
    double g,
    double tau_gx,
    double tau_gy,
    double[::1] w_diag,
    double r_ax,
    double r_ay,
    double ts_nominal,
    double trace_ceiling,
    bint trapezoid,
    double theta_guard,
    double[:, ::1] out_x,
    double[:, ::1] out_pdiag,
    double[:, ::1] out_innov,
    object out_pfull=None,
):
    """Predict/update cycle over a log; see the Python backend docstring.
    Returns the worst covariance asymmetry seen before re-symmetrisation."""
    cdef Py_ssize_t n = t.shape[0]
    cdef double[:, :, ::1] pfull = None
    cdef bint record_full = out_pfull is not None
    if record_full:
        pfull = out_pfull

    cdef double x[6]
    cdef double P[36]
    cdef double w[6]
    cdef double f1[6]
    cdef double xm[6]
    cdef double f2[6]
    cdef double F[36]
    cdef double A[36]
    cdef double Qc[36]
    cdef double Qk[36]
    cdef double T1[36]
    cdef double T2[36]
    cdef double max_asym = 0.0
    cdef Py_ssize_t i, j, k, sub, n_sub
    cdef double dt, h, gx, gy, gz, half_ts, asym, diff, tr

    for j in range(6):
        x[j] = x0[j]
        w[j] = w_diag[j]
    for i in range(6):
        for j in range(6):
            P[i * 6 + j] = P0[i, j]

    _ekf_update(x, P, accel_xy[0, 0], accel_xy[0, 1], kappa, r_ax, r_ay,
                out_innov, 0, &max_asym)
    _ekf_checks(x, P, 0, theta_guard, trace_ceiling)
    _store(x, P, out_x, out_pdiag, pfull, record_full, 0)

    for i in range(1, n):
        dt = t[i] - t[i - 1]
        if dt <= 0.0:
            raise NonMonotonicTimeError(
                f"sample {i}: timestamp {t[i]!r} does not increase past {t[i - 1]!r}",
                index=i,
            )
        if dt > 10.0 * ts_nominal * (1.0 + 1e-9):
            raise DataError(
                f"sample {i}: gap {dt:.6g} s exceeds 10x the nominal period", index=i
            )
        n_sub = <Py_ssize_t>ceil(dt / ts_nominal - 1e-9)
        if n_sub < 1:
            n_sub = 1
        h = dt / n_sub
        gx = gyro[i - 1, 0]
        gy = gyro[i - 1, 1]
        gz = gyro[i - 1, 2]
        for sub in range(n_sub):
            _process_rhs(x, gx, gy, gz, kappa, g, tau_gx, tau_gy, f1)
            for j in range(6):
                xm[j] = x[j] + (0.5 * h) * f1[j]
            if fabs(xm[1]) > theta_guard:
                raise AttitudeSingularityError(
                    f"sample {i}: midpoint pitch exceeds the guard", index=i
                )
            _process_rhs(xm, gx, gy, gz, kappa, g, tau_gx, tau_gy, f2)
            _process_jacobian(x, gx, gy, gz, kappa, g, tau_gx, tau_gy, F)
            _qc_from_state(x, w, Qc)
            # A = I + F h; Qk = (Qc + A Qc A^T) * h/2 (or Qc h), symmetrised
            for j in range(36):
                A[j] = F[j] * h
            for j in range(6):
                A[j * 6 + j] += 1.0
            if trapezoid:
                _mat_mul(A, Qc, T1)
                _mat_mul_bt(T1, A, T2)
                half_ts = h / 2.0
                for j in range(36):
                    Qk[j] = (Qc[j] + T2[j]) * half_ts
            else:
                for j in range(36):
                    Qk[j] = Qc[j] * h
            for j in range(6):
                for k in range(j + 1, 6):
                    asym = 0.5 * (Qk[j * 6 + k] + Qk[k * 6 + j])
                    Qk[j * 6 + k] = asym
                    Qk[k * 6 + j] = asym
            for j in range(6):
                x[j] = x[j] + h * f2[j]
            _mat_mul(A, P, T1)
            _mat_mul_bt(T1, A, T2)
            for j in range(36):
                P[j] = T2[j] + Qk[j]
            asym = 0.0
            for j in range(6):
                for k in range(j + 1, 6):
                    diff = fabs(P[j * 6 + k] - P[k * 6 + j])
                    if diff > asym:
                        asym = diff
            if asym > max_asym:
                max_asym = asym
            for j in range(6):
                for k in range(j + 1, 6):
                    diff = 0.5 * (P[j * 6 + k] + P[k * 6 + j])
                    P[j * 6 + k] = diff
                    P[k * 6 + j] = diff
            if fabs(x[1]) > theta_guard:
                raise AttitudeSingularityError(
                    f"sample {i}: pitch estimate exceeds the guard", index=i
                )
        _ekf_update(x, P, accel_xy[i, 0], accel_xy[i, 1], kappa, r_ax, r_ay,
                    out_innov, i, &max_asym)
        _ekf_checks(x, P, i, theta_guard, trace_ceiling)
        _store(x, P, out_x, out_pdiag, pfull, record_full, i)
    return max_asym


cdef void _store(
    const double* x, const double* P,
    double[:, ::1] out_x, double[:, ::1] out_pdiag,
    double[:, :, ::1] pfull, bint record_full, Py_ssize_t i,
) noexcept:
    cdef Py_ssize_t j, k
    for j in range(6):
        out_x[i, j] = x[j]
        out_pdiag[i, j] = P[j * 6 + j]
    if record_full:
        for j in range(6):
            for k in range(6):
                pfull[i, j, k] = P[j * 6 + k]


cdef _ekf_update(
    double* x, double* P, double ax, double ay,
    double kappa, double r_ax, double r_ay,
    double[:, ::1] out_innov, Py_ssize_t i, double* max_asym,
):
    # Joseph-form update, twin of _model.kalman_update
    cdef double in0 = ax + kappa * x[4]
    cdef double in1 = ay + kappa * x[5]
    cdef double s00 = kappa * kappa * P[4 * 6 + 4] + r_ax
    cdef double s11 = kappa * kappa * P[5 * 6 + 5] + r_ay
    cdef double s01 = kappa * kappa * P[4 * 6 + 5]
    cdef double det = s00 * s11 - s01 * s01
    if not (isfinite(det) and det > 0.0 and s00 > 0.0):
        raise NumericalError(
            f"sample {i}: innovation covariance not invertible", index=i
        )
    cdef double pht[12]
    cdef double K[12]
    cdef double ikh[36]
    cdef double T1[36]
    cdef double T2[36]
    cdef double inv00 = s11 / det
    cdef double inv01 = -s01 / det
    cdef double inv11 = s00 / det
    cdef Py_ssize_t j, k
    cdef double asym, diff
    for j in range(6):
        pht[j * 2 + 0] = -kappa * P[j * 6 + 4]
        pht[j * 2 + 1] = -kappa * P[j * 6 + 5]
    for j in range(6):
        K[j * 2 + 0] = pht[j * 2 + 0] * inv00 + pht[j * 2 + 1] * inv01
        K[j * 2 + 1] = pht[j * 2 + 0] * inv01 + pht[j * 2 + 1] * inv11
    for j in range(6):
        x[j] = x[j] + (K[j * 2 + 0] * in0 + K[j * 2 + 1] * in1)
    for j in range(36):
        ikh[j] = 0.0
    for j in range(6):
        ikh[j * 6 + j] = 1.0
        ikh[j * 6 + 4] += kappa * K[j * 2 + 0]
        ikh[j * 6 + 5] += kappa * K[j * 2 + 1]
    _mat_mul(ikh, P, T1)
    _mat_mul_bt(T1, ikh, T2)
    for j in range(6):
        for k in range(6):
            P[j * 6 + k] = T2[j * 6 + k] + (
                r_ax * K[j * 2 + 0] * K[k * 2 + 0]
                + r_ay * K[j * 2 + 1] * K[k * 2 + 1]
            )
    asym = 0.0
    for j in range(6):
        for k in range(j + 1, 6):
            diff = fabs(P[j * 6 + k] - P[k * 6 + j])
            if diff > asym:
                asym = diff
    if asym > max_asym[0]:
        max_asym[0] = asym
    for j in range(6):
        for k in range(j + 1, 6):
            diff = 0.5 * (P[j * 6 + k] + P[k * 6 + j])
            P[j * 6 + k] = diff
            P[k * 6 + j] = diff
    out_innov[i, 0] = in0
    out_innov[i, 1] = in1


cdef _ekf_checks(
    const double* x, const double* P, Py_ssize_t i,
    double theta_guard, double trace_ceiling,
):
    cdef double tr = 0.0
    cdef Py_ssize_t j
    if fabs(x[1]) > theta_guard:
        raise AttitudeSingularityError(
            f"sample {i}: pitch estimate {x[1]:.4f} rad exceeds the guard", index=i
        )
    for j in range(6):
        tr += P[j * 6 + j]
    if not isfinite(tr) or tr > trace_ceiling:
        raise CovarianceBlowupError(
            f"sample {i}: covariance trace {tr:.3e} exceeds ceiling {trace_ceiling:.3e}",
            index=i,
        )
    if not _cholesky_ok(P):
        raise NotPositiveDefiniteError(
            f"sample {i}: covariance lost positive definiteness", index=i
        )


# --- generic baseline --------------------------------------------------------

def generic_loop(
    double[::1] t,
    double[:, ::1] gyro,
    double[:, ::1] accel,
    double alpha,
    double g,
    double ts_nominal,
    double theta_guard,
    double[:, ::1] out_att,
    double[:, ::1] out_ve,
):
    """Complementary attitude plus direct velocity integration; see the
    Python backend docstring."""
    cdef Py_ssize_t n = t.shape[0]
    cdef double half_g = 0.5 * g
    cdef double phi = 0.0, theta = 0.0, psi = 0.0
    cdef double ve0 = 0.0, ve1 = 0.0, ve2 = 0.0
    cdef double dt, sphi, cphi, sth, cth, tth, sec, spsi, cpsi
    cdef double wx, wy, wz, ax, ay, az, axc, ayc, azc, norm, phi_acc, theta_acc
    cdef Py_ssize_t i
    out_att[0, 0] = phi
    out_att[0, 1] = theta
    out_att[0, 2] = psi
    out_ve[0, 0] = ve0
    out_ve[0, 1] = ve1
    out_ve[0, 2] = ve2
    for i in range(1, n):
        dt = t[i] - t[i - 1]
        if dt <= 0.0:
            raise NonMonotonicTimeError(
                f"sample {i}: timestamp {t[i]!r} does not increase past {t[i - 1]!r}",
                index=i,
            )
        if dt > 10.0 * ts_nominal * (1.0 + 1e-9):
            raise DataError(
                f"sample {i}: gap {dt:.6g} s exceeds 10x the nominal period", index=i
            )
        sphi = sin(phi)
        cphi = cos(phi)
        cth = cos(theta)
        tth = tan(theta)
        sec = 1.0 / cth
        wx = gyro[i - 1, 0]
        wy = gyro[i - 1, 1]
        wz = gyro[i - 1, 2]
        ax = accel[i - 1, 0]
        ay = accel[i - 1, 1]
        az = accel[i - 1, 2]
        sth = sin(theta)
        spsi = sin(psi)
        cpsi = cos(psi)
        ve0 += dt * (
            cpsi * cth * ax
            + (cpsi * sth * sphi - spsi * cphi) * ay
            + (cpsi * sth * cphi + spsi * sphi) * az
        )
        ve1 += dt * (
            spsi * cth * ax
            + (spsi * sth * sphi + cpsi * cphi) * ay
            + (spsi * sth * cphi - cpsi * sphi) * az
        )
        ve2 += dt * (-sth * ax + cth * sphi * ay + cth * cphi * az + g)
        phi += dt * (wx + tth * sphi * wy + tth * cphi * wz)
        theta += dt * (cphi * wy - sphi * wz)
        psi += dt * (sec * sphi * wy + sec * cphi * wz)
        axc = accel[i, 0]
        ayc = accel[i, 1]
        azc = accel[i, 2]
        norm = sqrt(axc * axc + ayc * ayc + azc * azc)
        if norm > half_g:
            phi_acc = atan2(-ayc, -azc)
            theta_acc = atan2(axc, sqrt(ayc * ayc + azc * azc))
            phi += alpha * dt * (phi_acc - phi)
            theta += alpha * dt * (theta_acc - theta)
        phi = _wrap_pi(phi)
        psi = _wrap_pi(psi)
        if fabs(theta) > theta_guard:
            raise AttitudeSingularityError(
                f"sample {i}: pitch estimate {theta:.4f} rad exceeds the guard",
                index=i,
            )
        out_att[i, 0] = phi
        out_att[i, 1] = theta
        out_att[i, 2] = psi
        out_ve[i, 0] = ve0
        out_ve[i, 1] = ve1
        out_ve[i, 2] = ve2
