"""Drag-aware EKF: process model, Jacobians, discretization, update, runs.

Frozen constants come from tests/oracles/derive_process_jacobian.py and
derive_update_and_noise.py.
"""

import dataclasses
import math

import numpy as np
import pytest

from dragekf.ekf import (
    DEFAULT_W_VEL,
    FilterConfig,
    build_G_W,
    discretize,
    initial_state,
    jacobian_F,
    predict,
    process_derivative,
    run_filter,
    update,
)
from dragekf.errors import (
    AttitudeSingularityError,
    ConfigValueError,
    CovarianceBlowupError,
    DataError,
    NonMonotonicTimeError,
)
from dragekf.geometry import BodyRates
from dragekf.sensors import ImuLog, NoiseConfig, synthesize
from dragekf.truthsim import ManeuverScript, ManeuverSegment, VehicleParams, simulate

KAPPA = 0.57 / 0.42  # drag-to-mass ratio of the default vehicle

# tests/oracles/derive_process_jacobian.py, pinned state
# x = (0.3, -0.2, 0.01, -0.02, 0.5, -0.3), gyro = (0.05, -0.03, 0.08)
F_PINNED = np.array([
    [0.006728955863201851, 0.07649076972860003, -1.0, 0.05990491158585037, 0.0, 0.0],
    [-0.07347171706343508, 0.0, 0.0, -0.955336489125606, 0.0, 0.0],
    [0.0, 0.0, -0.01, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -0.01, 0.0, 0.0],
    [0.0, -9.611169905586813, 0.0, 0.0, -KAPPA, 0.0],
    [9.181901313992988, 0.5757562834307639, 0.0, 0.0, 0.0, -KAPPA],
])
F_PINNED_RHS = np.array([
    0.025106545625187937, -0.033194981424163224, -0.0001, 0.0002,
    1.2697091642699585, 3.2474377738991196,
])
X_PINNED = np.array([0.3, -0.2, 0.01, -0.02, 0.5, -0.3])
GYRO_PINNED = BodyRates(0.05, -0.03, 0.08)


def seg(duration, wx=0.0, wy=0.0, wz=0.0):
    return ManeuverSegment(duration, BodyRates(wx, wy, wz))


@pytest.fixture
def cfg():
    return FilterConfig()


@pytest.fixture
def vehicle():
    return VehicleParams()


# ---------------------------------------------------------------- process model

def test_rhs_zero_at_origin(cfg):
    d = process_derivative(np.zeros(6), BodyRates(0.0, 0.0, 0.0), cfg)
    assert np.array_equal(d, np.zeros(6))


def test_rhs_pure_drag(cfg):
    x = np.array([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])
    d = process_derivative(x, BodyRates(0.0, 0.0, 0.0), cfg)
    assert abs(d[4] + KAPPA) < 1e-15
    assert np.abs(np.delete(d, 4)).max() == 0.0


def test_rhs_pitched_gravity_component(cfg):
    x = np.array([0.0, 0.1, 0.0, 0.0, 0.0, 0.0])
    d = process_derivative(x, BodyRates(0.0, 0.0, 0.0), cfg)
    assert abs(d[4] - (-9.80665 * math.sin(0.1))) < 1e-14
    assert abs(d[4] - (-0.9790313753596173)) < 1e-13


def test_rhs_bias_cancels_gyro(cfg):
    x = np.array([0.0, 0.0, 0.02, 0.0, 0.0, 0.0])
    d = process_derivative(x, BodyRates(0.02, 0.0, 0.0), cfg)
    assert d[0] == 0.0


def test_rhs_pinned_state(cfg):
    d = process_derivative(X_PINNED, GYRO_PINNED, cfg)
    assert np.abs(d - F_PINNED_RHS).max() < 1e-12


# ------------------------------------------------------------------- jacobian_F

def test_jacobian_origin_entries(cfg):
    F = jacobian_F(np.zeros(6), BodyRates(0.0, 0.0, 0.0), cfg)
    assert F[4, 1] == -cfg.g
    assert abs(F[4, 4] + cfg.kappa) < 1e-15
    assert F[0, 2] == -1.0
    assert F[1, 3] == -1.0
    assert F[2, 2] == -1.0 / cfg.tau_gx
    assert F[5, 0] == cfg.g
    assert abs(F[5, 5] + cfg.kappa) < 1e-15


def test_jacobian_pinned_state(cfg):
    F = jacobian_F(X_PINNED, GYRO_PINNED, cfg)
    assert np.abs(F - F_PINNED).max() < 1e-12


def test_jacobian_bias_columns_zero_in_velocity_rows(cfg, rng):
    for _ in range(20):
        x = rng.uniform(-0.5, 0.5, 6)
        F = jacobian_F(x, BodyRates(*rng.uniform(-1, 1, 3)), cfg)
        assert np.abs(F[4:, 2:4]).max() == 0.0


def test_jacobian_matches_finite_differences(cfg, rng):
    h = 1e-6
    worst = 0.0
    for _ in range(200):
        x = np.concatenate([
            rng.uniform(-math.radians(60), math.radians(60), 2),
            rng.uniform(-0.05, 0.05, 2),
            rng.uniform(-3.0, 3.0, 2),
        ])
        gyro = BodyRates(*rng.uniform(-1.0, 1.0, 3))
        F = jacobian_F(x, gyro, cfg)
        for j in range(6):
            e = np.zeros(6)
            e[j] = h
            fd = (process_derivative(x + e, gyro, cfg) -
                  process_derivative(x - e, gyro, cfg)) / (2 * h)
            num = np.abs(F[:, j] - fd).max()
            den = max(1.0, np.abs(F[:, j]).max())
            worst = max(worst, num / den)
    assert worst < 1e-5


# -------------------------------------------------------------------- G, W, Qk

def test_noise_gain_origin_structure(cfg):
    G, W = build_G_W(np.zeros(6), cfg)
    expect = np.zeros((6, 6))
    expect[0, 0] = 1.0  # w_gx -> phi_dot
    expect[1, 1] = 1.0  # w_gy -> theta_dot
    expect[2, 2] = expect[3, 3] = 1.0
    expect[4, 4] = expect[5, 5] = 1.0
    assert np.array_equal(G, expect)
    assert np.array_equal(W, np.diag(cfg.w))


def test_noise_gain_gyro_coupling(cfg):
    x = np.array([0.3, -0.2, 0.0, 0.0, 0.0, 0.0])
    G, _ = build_G_W(x, cfg)
    assert abs(G[0, 1] - math.tan(-0.2) * math.sin(0.3)) < 1e-15
    assert abs(G[1, 1] - math.cos(0.3)) < 1e-15


def test_discretize_constant_velocity_limit(cfg):
    Qc = np.diag([1.0, 2.0, 3.0, 4.0, 5.0, 6.0]) * 1e-4
    A, Qk = discretize(np.zeros((6, 6)), Qc, 0.005)
    assert np.array_equal(A, np.eye(6))
    assert np.abs(Qk - Qc * 0.005).max() < 1e-18


def test_discretize_scalar_trapezoid():
    # oracle: a=1.5, q=0.02, Ts=0.005 -> trapezoid 9.92528125e-05,
    # exact integral 9.9251875e-05, difference -q a^2 Ts^3 / 6
    F = np.zeros((6, 6))
    F[0, 0] = -1.5
    Qc = np.zeros((6, 6))
    Qc[0, 0] = 0.02
    A, Qk = discretize(F, Qc, 0.005)
    assert abs(A[0, 0] - (1.0 - 1.5 * 0.005)) < 1e-15
    assert abs(Qk[0, 0] - 9.92528125e-05) < 1e-15
    assert abs(Qk[0, 0] - 9.9251875e-05) < 2e-9  # O(Ts^3) from the exact law


def test_discretize_euler_mode():
    F = np.zeros((6, 6))
    F[0, 0] = -1.5
    Qc = np.zeros((6, 6))
    Qc[0, 0] = 0.02
    _, Qk = discretize(F, Qc, 0.005, mode="euler")
    assert abs(Qk[0, 0] - 0.02 * 0.005) < 1e-18


def test_discretize_small_ts_limit(cfg, rng):
    x = rng.uniform(-0.3, 0.3, 6)
    F = jacobian_F(x, BodyRates(0.1, -0.2, 0.05), cfg)
    G, W = build_G_W(x, cfg)
    Qc = G @ W @ G.T
    for ts in (1e-4, 1e-5):
        _, Qk = discretize(F, Qc, ts)
        assert np.abs(Qk / ts - Qc).max() < 10.0 * ts * np.abs(Qc).max() / ts * ts + 1e-6 * ts
        assert np.abs(Qk / ts - Qc).max() < np.abs(Qc).max() * ts * 10 + 1e-20


# --------------------------------------------------------------- predict/update

def test_predict_hover_keeps_state(cfg):
    fs = initial_state(cfg)
    out = predict(fs, BodyRates(0.0, 0.0, 0.0), 0.005, cfg)
    assert np.array_equal(out.x, fs.x)
    assert out.t == fs.t + 0.005


def test_predict_injects_process_noise(cfg):
    # from a near-zero prior the Qk term dominates the A P A^T contraction,
    # so one predict step must add uncertainty on every diagonal channel
    tiny = dataclasses.replace(cfg, p0=(1e-10,) * 6)
    fs = initial_state(tiny)
    out = predict(fs, BodyRates(0.0, 0.0, 0.0), 0.005, tiny)
    assert np.trace(out.P) > np.trace(fs.P)
    assert np.all(np.diag(out.P) > np.diag(fs.P))


def test_predict_two_half_steps_third_order(cfg):
    fs = initial_state(cfg)
    fs = dataclasses.replace(fs, x=X_PINNED.copy())
    gyro = GYRO_PINNED
    for ts in (0.02, 0.01):
        full = predict(fs, gyro, ts, cfg)
        half = predict(predict(fs, gyro, ts / 2, cfg), gyro, ts / 2, cfg)
        assert np.abs(full.x - half.x).max() < 10.0 * ts ** 3


def test_predict_tracks_simulator(cfg, vehicle, zero_noise):
    script = ManeuverScript((seg(1.0, wx=0.1), seg(1.0, wy=-0.1)))
    traj = simulate(script, vehicle, dt=0.005)
    log = synthesize(traj, vehicle, zero_noise)
    fs = initial_state(cfg)
    for i in range(1, len(log.t)):
        fs = predict(fs, BodyRates(*log.gyro[i - 1]), 0.005, cfg)
    assert abs(fs.x[0] - traj.att[-1, 0]) < 1e-9
    assert abs(fs.x[1] - traj.att[-1, 1]) < 1e-9
    from dragekf.geometry import body_velocity
    vb = body_velocity(traj.att[-1:], traj.vel_e[-1:])[0]
    # the planar model drops omega x v and vertical coupling, so the gap is
    # model error (~2% of the developed speed here), not integration error
    assert abs(fs.x[4] - vb[0]) < 2e-2
    assert abs(fs.x[5] - vb[1]) < 2e-2


def test_update_zero_innovation_keeps_state(cfg):
    fs = initial_state(cfg)
    x = np.zeros(6)
    x[4] = 1.0
    fs = dataclasses.replace(fs, x=x)
    out = update(fs, -KAPPA * 1.0, 0.0, cfg)
    assert np.abs(out.x - fs.x).max() < 1e-15
    assert np.trace(out.P) < np.trace(fs.P)


def test_update_scalar_kalman_oracle(cfg):
    # oracle: prior vbx = 0, P_v = 1, R = 0.05^2, z = -1.3571
    #         -> posterior vbx = 0.9986129630141913
    fs = initial_state(cfg)
    P = np.diag([1e-12, 1e-12, 1e-12, 1e-12, 1.0, 1.0])
    fs = dataclasses.replace(fs, x=np.zeros(6), P=P)
    out = update(fs, -1.3571, 0.0, cfg)
    assert abs(out.x[4] - 0.9986129630141913) < 1e-12
    assert 0.0 < out.x[4] < 1.0
    assert abs(out.P[4, 4] - 0.0013555008437301508) < 1e-12


def test_update_block_diagonal_leaves_attitude(cfg):
    fs = initial_state(cfg)  # default P0 is diagonal: no velocity-attitude coupling
    out = update(fs, 0.4, -0.2, cfg)
    assert out.x[0] == 0.0 and out.x[1] == 0.0
    assert out.x[2] == 0.0 and out.x[3] == 0.0
    assert out.x[4] != 0.0 and out.x[5] != 0.0


# ------------------------------------------------------------------- run_filter

def test_hover_noise_free_stays_at_zero(cfg, vehicle, zero_noise):
    traj = simulate(ManeuverScript((seg(2.0),)), vehicle, dt=0.005)
    log = synthesize(traj, vehicle, zero_noise)
    est = run_filter(log, cfg)
    after_1s = est.t >= 1.0
    assert np.abs(est.x[after_1s]).max() < 1e-9
    assert est.meta["backend"] in ("compiled", "python")
    assert est.meta["max_p_asym"] < 1e-12


def test_bias_estimate_converges(vehicle):
    # slow-decay injected bias 0.02 rad/s on x reads back within +-0.005 by 30 s
    traj = simulate(ManeuverScript((seg(35.0),)), vehicle, dt=0.005)
    nc = NoiseConfig(sigma_g=0.0, sigma_bg=0.0, sigma_a=0.0,
                     tau_g=1e9, beta_g0=(0.02, 0.0, 0.0))
    log = synthesize(traj, vehicle, nc)
    est = run_filter(log, FilterConfig())
    at_30s = int(round(30.0 / 0.005))
    assert abs(est.x[at_30s, 2] - 0.02) < 0.005
    assert abs(est.x[-1, 2] - 0.02) < 0.005


def test_nonmonotonic_time_rejected_at_construction(cfg):
    t = np.array([0.0, 0.005, 0.004])
    with pytest.raises(NonMonotonicTimeError):
        ImuLog(t=t, gyro=np.zeros((3, 3)), accel=np.tile([0, 0, -9.80665], (3, 1)))


def test_run_filter_gap_rejected(cfg):
    t = np.array([0.0, 0.005, 0.2])
    log = ImuLog(t=t, gyro=np.zeros((3, 3)), accel=np.tile([0, 0, -9.80665], (3, 1)))
    with pytest.raises(DataError, match="gap"):
        run_filter(log, cfg)


def test_run_filter_substeps_slow_log(cfg, vehicle, zero_noise):
    # a 100 Hz log is integrated in two 200 Hz half-steps per sample
    script = ManeuverScript((seg(1.0, wx=0.1), seg(1.0)))
    fast = simulate(script, vehicle, dt=0.005)
    slow = simulate(script, vehicle, dt=0.01)
    est_fast = run_filter(synthesize(fast, vehicle, zero_noise), cfg)
    est_slow = run_filter(synthesize(slow, vehicle, zero_noise), cfg)
    assert np.abs(est_fast.x[-1, :2] - est_slow.x[-1, :2]).max() < 1e-4


def test_trace_ceiling_raises(cfg, vehicle, zero_noise):
    traj = simulate(ManeuverScript((seg(1.0),)), vehicle, dt=0.005)
    log = synthesize(traj, vehicle, zero_noise)
    tight = dataclasses.replace(cfg, trace_ceiling=1e-9)
    with pytest.raises(CovarianceBlowupError):
        run_filter(log, tight)


def test_theta_guard_raises(cfg, vehicle):
    # gyro that pitches far past the guard
    n = 1200
    t = 0.005 * np.arange(n)
    gyro = np.zeros((n, 3))
    gyro[:, 1] = 1.5
    accel = np.tile([0.0, 0.0, -9.80665], (n, 1))
    log = ImuLog(t=t, gyro=gyro, accel=accel)
    with pytest.raises(AttitudeSingularityError):
        run_filter(log, cfg)


def test_matched_config_densities(vehicle):
    nc = NoiseConfig(seed=0)
    cfg = FilterConfig.matched(nc, vehicle)
    assert cfg.k1 == vehicle.k1 and cfg.m == vehicle.m and cfg.g == vehicle.g
    assert abs(cfg.w[0] - nc.sigma_g ** 2 * 0.005) < 1e-18
    assert abs(cfg.w[2] - nc.sigma_bg ** 2) < 1e-18
    assert cfg.w[4] == DEFAULT_W_VEL
    assert cfg.sigma_ax == nc.sigma_a
    assert cfg.tau_gx == nc.tau_g


def test_matched_rejects_zero_accel_noise(vehicle, zero_noise):
    with pytest.raises(ConfigValueError):
        FilterConfig.matched(zero_noise, vehicle)


def test_qk_mode_changes_little(cfg, vehicle, zero_noise):
    script = ManeuverScript((seg(1.0, wx=0.1), seg(1.0)))
    traj = simulate(script, vehicle, dt=0.005)
    log = synthesize(traj, vehicle, zero_noise)
    a = run_filter(log, cfg)
    b = run_filter(log, dataclasses.replace(cfg, qk_mode="euler"))
    assert not np.array_equal(a.sig3, b.sig3)
    assert np.abs(a.x[-1] - b.x[-1]).max() < 1e-4


def test_config_validation():
    with pytest.raises(ConfigValueError):
        FilterConfig(m=-1.0)
    with pytest.raises(ConfigValueError):
        FilterConfig(w=(1e-7,) * 5)
    with pytest.raises(ConfigValueError):
        FilterConfig(p0=(0.0,) * 6)
    with pytest.raises(ConfigValueError):
        FilterConfig(qk_mode="exact")
    with pytest.raises(ConfigValueError):
        FilterConfig(sigma_ax=0.0)
