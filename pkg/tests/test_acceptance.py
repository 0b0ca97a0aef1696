"""Release gate: the nine headline behaviors, one test per criterion.

Each test prints a single ``criterion N PASS`` line with its measured
numbers when it holds; a failing criterion fails its test.  The Monte
Carlo fixtures are session-scoped so the expensive ensembles run once.

Covered, in order:
  1. analytic process Jacobian vs central finite differences
  2. noise-free tracking residual (pure model/integration error)
  3. drift-free velocity over a 30-seed ensemble vs the growing baseline
  4. attitude accuracy under hard accelerations vs the baseline
  5. drag coefficient identification, exact and under noise
  6. filter consistency (NEES) with matched noise parameters
  7. robustness of tuning to a global 2x covariance scaling
  8. numerical hygiene: covariance symmetry/positivity, RK2 order
  9. file I/O exactness and end-to-end pipeline determinism
"""

import math
import time

import numpy as np
import pytest
from scipy import stats

from dragekf.baseline import GenericConfig, run_generic
from dragekf.cli import main as cli_main
from dragekf.ekf import FilterConfig, jacobian_F, process_derivative, run_filter
from dragekf.evaluate import align, error_metrics, nees
from dragekf.geometry import BodyRates, body_velocity
from dragekf.logio import (
    read_estimates_csv,
    read_imu_csv,
    read_truth_csv,
    write_estimates_csv,
    write_imu_csv,
    write_truth_csv,
)
from dragekf.scenarios import (
    figure_eight_script,
    mixed_maneuver_script,
    reversal_script,
    transient_windows,
)
from dragekf.sensors import NoiseConfig, synthesize
from dragekf.sysid import fit_k1
from dragekf.truthsim import ManeuverScript, ManeuverSegment, VehicleParams, simulate

K1_TRUE = 0.57
MASS = 0.42
DT = 0.005


def hygiene_of(est) -> tuple[float, float]:
    """(worst pre-symmetrisation asymmetry, smallest covariance eigenvalue)."""
    eigs = np.linalg.eigvalsh(est.meta["P_full"])
    return float(est.meta["max_p_asym"]), float(eigs.min())


def windows_mask(t: np.ndarray, windows) -> np.ndarray:
    mask = np.zeros(t.shape[0], dtype=bool)
    for lo, hi in windows:
        mask |= (t >= lo) & (t <= hi)
    return mask


# ------------------------------------------------------------ shared ensembles

@pytest.fixture(scope="session")
def drift_mc():
    """30-seed, 120 s standard-scenario ensemble: drag filter vs baseline."""
    script = mixed_maneuver_script(duration=120.0)
    vehicle = VehicleParams()
    fcfg = FilterConfig()
    gcfg = GenericConfig()
    out = {
        "drag_slopes": [], "gen_slopes": [], "ratios": [],
        "asym": 0.0, "min_eig": math.inf,
    }
    t0 = time.monotonic()
    traj = simulate(script, vehicle, dt=DT)
    for seed in range(30):
        log = synthesize(traj, vehicle, NoiseConfig(seed=seed))
        est_d = run_filter(log, fcfg, record_full_p=True)
        asym, min_eig = hygiene_of(est_d)
        out["asym"] = max(out["asym"], asym)
        out["min_eig"] = min(out["min_eig"], min_eig)
        est_g = run_generic(log, gcfg)
        rep_d = error_metrics(align(traj, est_d))
        rep_g = error_metrics(align(traj, est_g))
        out["drag_slopes"].append(rep_d.drift_slope)
        out["gen_slopes"].append(rep_g.drift_slope)
        out["ratios"].append(rep_g.final_rmse_vel_total / rep_d.final_rmse_vel_total)
    out["wall_s"] = time.monotonic() - t0
    for key in ("drag_slopes", "gen_slopes", "ratios"):
        out[key] = np.array(out[key])
    return out


@pytest.fixture(scope="session")
def nees_mc():
    """10-seed consistency ensemble with filter noise matched to synthesis."""
    script = mixed_maneuver_script(duration=120.0)
    vehicle = VehicleParams()
    traj = simulate(script, vehicle, dt=DT)
    fractions = []
    asym_worst, eig_worst = 0.0, math.inf
    for seed in range(10):
        noise = NoiseConfig(seed=seed)
        log = synthesize(traj, vehicle, noise)
        est = run_filter(log, FilterConfig.matched(noise, vehicle), record_full_p=True)
        asym, min_eig = hygiene_of(est)
        asym_worst, eig_worst = max(asym_worst, asym), min(eig_worst, min_eig)
        _, fraction = nees(align(traj, est))
        fractions.append(fraction)
    return {"fractions": np.array(fractions), "asym": asym_worst, "min_eig": eig_worst}


@pytest.fixture(scope="session")
def tracking_run():
    """Noise-free 60 s standard scenario with perfect initialisation."""
    script = mixed_maneuver_script(duration=60.0)
    vehicle = VehicleParams()
    traj = simulate(script, vehicle, dt=DT)
    log = synthesize(traj, vehicle,
                     NoiseConfig(sigma_g=0.0, sigma_bg=0.0, sigma_a=0.0,
                                 beta_g0=(0.0, 0.0, 0.0)))
    est = run_filter(log, FilterConfig(), record_full_p=True)
    vb = body_velocity(traj.att, traj.vel_e)
    att_err = np.abs(est.x[:, 0:2] - traj.att[:, 0:2]).max()
    vel_err = np.abs(est.x[:, 4:6] - vb[:, 0:2]).max()
    asym, min_eig = hygiene_of(est)
    return {"att_err": att_err, "vel_err": vel_err, "asym": asym, "min_eig": min_eig}


# ------------------------------------------------------------------- criteria

def test_criterion_1_jacobian_vs_finite_differences(rng):
    h = 1e-6
    worst = 0.0
    cfg = FilterConfig()
    t0 = time.monotonic()
    for _ in range(1000):
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
            fd = (process_derivative(x + e, gyro, cfg)
                  - process_derivative(x - e, gyro, cfg)) / (2 * h)
            num = np.abs(F[:, j] - fd).max()
            den = max(1.0, np.abs(F[:, j]).max())
            worst = max(worst, num / den)
    wall = time.monotonic() - t0
    assert worst < 1e-5
    assert wall < 5.0
    print(f"criterion 1 PASS: max relative Jacobian error {worst:.3e} "
          f"over 1000 states in {wall:.2f} s")


def test_criterion_2_noise_free_tracking(tracking_run):
    att_deg = math.degrees(tracking_run["att_err"])
    vel = tracking_run["vel_err"]
    assert att_deg < 0.1
    assert vel < 0.02
    print(f"criterion 2 PASS: noise-free residuals {att_deg:.4f} deg, "
          f"{vel:.5f} m/s (bounds 0.1 deg / 0.02 m/s)")


def test_criterion_3_drift_free_velocity(drift_mc):
    d = drift_mc["drag_slopes"]
    g = drift_mc["gen_slopes"]
    ratios = drift_mc["ratios"]
    n = len(d)
    mean = float(d.mean())
    half = float(stats.t.ppf(0.975, n - 1) * d.std(ddof=1) / math.sqrt(n))
    ci = (mean - half, mean + half)
    assert np.abs(d).max() < 0.002           # every seed's slope is tiny
    assert ci[0] <= 0.0 <= ci[1]             # ensemble mean indistinguishable from 0
    assert float(g.mean()) > 0.02            # the baseline grows
    assert float(ratios.min()) >= 5.0        # and is at least 5x worse at the end
    assert drift_mc["wall_s"] < 120.0
    print(f"criterion 3 PASS: drag slope mean {mean:.2e} m/s/s, "
          f"CI [{ci[0]:.2e}, {ci[1]:.2e}] contains 0, max |slope| {np.abs(d).max():.2e}; "
          f"generic mean slope {g.mean():.3f}; min RMSE ratio {ratios.min():.0f}x; "
          f"{drift_mc['wall_s']:.1f} s wall")


def test_criterion_4_attitude_under_acceleration():
    script = reversal_script()
    vehicle = VehicleParams()
    traj = simulate(script, vehicle, dt=DT)
    accel_peak = float(
        (np.linalg.norm(np.diff(traj.vel_e[:, :2], axis=0), axis=1) / DT).max()
    )
    assert accel_peak >= 2.0
    windows = transient_windows(script, pad_after=1.0)
    worst = 0.0
    for seed in range(10):
        log = synthesize(traj, vehicle, NoiseConfig(seed=seed))
        ps_d = align(traj, run_filter(log, FilterConfig()))
        ps_g = align(traj, run_generic(log, GenericConfig()))
        mask = windows_mask(ps_d.t, windows)
        for col in (0, 1):
            e_d = ps_d.est[mask, col] - ps_d.truth[mask, col]
            e_g = ps_g.est[mask, col] - ps_g.truth[mask, col]
            ratio = float(np.sqrt(np.mean(e_d**2) / np.mean(e_g**2)))
            worst = max(worst, ratio)
    assert worst <= 0.5
    print(f"criterion 4 PASS: peak horizontal acceleration {accel_peak:.2f} m/s^2, "
          f"worst drag/generic attitude RMSE ratio {worst:.3f} (bound 0.5)")


def test_criterion_5_drag_coefficient_identification():
    script = figure_eight_script(duration=60.0)
    vehicle = VehicleParams()
    traj = simulate(script, vehicle, dt=DT)
    clean = synthesize(traj, vehicle,
                       NoiseConfig(sigma_g=0.0, sigma_bg=0.0, sigma_a=0.0,
                                   beta_g0=(0.0, 0.0, 0.0)))
    exact = fit_k1(clean, traj, MASS).k1
    assert abs(exact - K1_TRUE) < 1e-12
    fits = []
    for seed in range(20):
        log = synthesize(traj, vehicle, NoiseConfig(seed=seed))
        fits.append(fit_k1(log, traj, MASS).k1)
    fits = np.array(fits)
    rel = np.abs(fits - K1_TRUE) / K1_TRUE
    sigma_rel = float(fits.std(ddof=1)) / K1_TRUE
    assert rel.max() < 0.05
    assert sigma_rel < 0.05
    print(f"criterion 5 PASS: noise-free error {abs(exact - K1_TRUE):.2e} kg/s; "
          f"noisy worst {rel.max() * 100:.3f}%, 1-sigma {sigma_rel * 100:.3f}% "
          f"over 20 seeds (bound 5%)")


def test_criterion_6_nees_consistency(nees_mc):
    mean_fraction = float(nees_mc["fractions"].mean())
    assert mean_fraction >= 0.90
    print(f"criterion 6 PASS: NEES in-band fraction {mean_fraction:.4f} "
          f"averaged over 10 seeds (bound 0.90, matched noise parameters)")


def test_criterion_7_tuning_robustness():
    script = mixed_maneuver_script(duration=120.0)
    vehicle = VehicleParams()
    traj = simulate(script, vehicle, dt=DT)
    log = synthesize(traj, vehicle, NoiseConfig(seed=0))
    base = error_metrics(align(traj, run_filter(log, FilterConfig())))
    scaled = error_metrics(align(traj, run_filter(log, FilterConfig().scaled(2.0))))
    worst = abs(scaled.final_rmse_vel_total - base.final_rmse_vel_total) / base.final_rmse_vel_total
    for name in ("phi", "theta", "vbx", "vby"):
        rel = abs(scaled.final_rmse[name] - base.final_rmse[name]) / base.final_rmse[name]
        worst = max(worst, rel)
    assert worst < 0.20
    print(f"criterion 7 PASS: 2x covariance scaling moves final-window RMSE by "
          f"{worst * 100:.2e}% (bound 20%; a global scale leaves the gains invariant)")


def test_criterion_8_numerical_hygiene(drift_mc, nees_mc, tracking_run):
    asym = max(drift_mc["asym"], nees_mc["asym"], tracking_run["asym"])
    min_eig = min(drift_mc["min_eig"], nees_mc["min_eig"], tracking_run["min_eig"])
    assert asym < 1e-10
    assert min_eig > 0.0

    # RK2 order by step-halving on a smooth constant-rate segment
    script = ManeuverScript((ManeuverSegment(2.0, BodyRates(0.2, 0.1, 0.0)),))
    vehicle = VehicleParams()
    ref = simulate(script, vehicle, dt=0.0003125)
    errs = []
    for dt in (0.01, 0.005, 0.0025):
        traj = simulate(script, vehicle, dt=dt)
        stride = int(round(dt / 0.0003125))
        errs.append(np.abs(traj.vel_e[-1] - ref.vel_e[::stride][-1]).max())
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 1.9
    print(f"criterion 8 PASS: worst P asymmetry {asym:.2e} (bound 1e-10), "
          f"min eigenvalue {min_eig:.2e} > 0 over 41 runs; "
          f"RK2 orders {orders[0]:.2f}, {orders[1]:.2f} (bound 1.9)")


def test_criterion_9_io_determinism(tmp_path):
    # value-exact round-trips on a live pipeline's artifacts
    script = mixed_maneuver_script(duration=20.0)
    vehicle = VehicleParams()
    traj = simulate(script, vehicle, dt=DT)
    log = synthesize(traj, vehicle, NoiseConfig(seed=11))
    est = run_filter(log, FilterConfig())
    write_truth_csv(traj, str(tmp_path / "t.csv"))
    write_imu_csv(log, str(tmp_path / "i.csv"))
    write_estimates_csv(est, str(tmp_path / "e.csv"))
    t2 = read_truth_csv(str(tmp_path / "t.csv"))
    i2 = read_imu_csv(str(tmp_path / "i.csv"))
    e2 = read_estimates_csv(str(tmp_path / "e.csv"))
    assert np.array_equal(t2.att, traj.att) and np.array_equal(t2.vel_e, traj.vel_e)
    assert np.array_equal(i2.gyro, log.gyro) and np.array_equal(i2.accel, log.accel)
    assert np.array_equal(e2.x, est.x) and np.array_equal(e2.sig3, est.sig3)

    # identical (config, seed) pipelines are byte-identical end-to-end
    dirs = (tmp_path / "run_a", tmp_path / "run_b")
    for d in dirs:
        code = cli_main(["preset", "standard", "--out-dir", str(d),
                         "--duration", "20", "--seed", "13"])
        assert code == 0
    names = ("imu.csv", "truth.csv", "est_drag.csv", "est_generic.csv")
    for name in names:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes(), name
    print("criterion 9 PASS: CSV round-trips value-exact; "
          "repeated pipelines byte-identical across "
          f"{len(names)} artifacts")
