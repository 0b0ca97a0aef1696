"""Time the compiled inner loops against the pure-Python fallback.

Runs each backend on identical inputs (120 s standard scenario at 200 Hz)
and prints best-of-N wall times plus the speedup.  Usage:

    python3 benchmarks/bench_backends.py [--repeats N] [--duration S]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dragekf._backend import loops_py
from dragekf.ekf import FilterConfig
from dragekf.geometry import THETA_GUARD_RAD
from dragekf.scenarios import mixed_maneuver_script
from dragekf.sensors import NoiseConfig, synthesize
from dragekf.truthsim import VehicleParams, simulate

try:
    from dragekf._backend import _fastloops
except ImportError:
    _fastloops = None


def best_of(repeats: int, fn) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--duration", type=float, default=120.0)
    args = ap.parse_args()

    vehicle = VehicleParams()
    cfg = FilterConfig()
    traj = simulate(mixed_maneuver_script(duration=args.duration), vehicle, dt=0.005)
    log = synthesize(traj, vehicle, NoiseConfig(seed=0))
    n = len(log.t)
    rates = np.ascontiguousarray(traj.rates[:-1])
    t = np.ascontiguousarray(log.t)
    gyro = np.ascontiguousarray(log.gyro)
    accel = np.ascontiguousarray(log.accel)
    accel_xy = np.ascontiguousarray(log.accel[:, 0:2])

    def truth_fn(impl):
        return lambda: impl.truth_loop(
            rates, 0.005, np.zeros(9), vehicle.m, vehicle.k1, vehicle.g,
            True, 0.0, THETA_GUARD_RAD,
        )

    def ekf_fn(impl):
        out_x = np.empty((n, 6))
        out_pdiag = np.empty((n, 6))
        out_innov = np.empty((n, 2))
        return lambda: impl.ekf_loop(
            t, gyro, accel_xy, np.array(cfg.x0), np.diag(cfg.p0),
            cfg.kappa, cfg.g, cfg.tau_gx, cfg.tau_gy, np.array(cfg.w),
            cfg.sigma_ax**2, cfg.sigma_ay**2, cfg.ts_nominal,
            cfg.trace_ceiling, True, THETA_GUARD_RAD,
            out_x, out_pdiag, out_innov, None,
        )

    def generic_fn(impl):
        out_att = np.empty((n, 3))
        out_ve = np.empty((n, 3))
        return lambda: impl.generic_loop(
            t, gyro, accel, 0.5, vehicle.g, 0.005, THETA_GUARD_RAD,
            out_att, out_ve,
        )

    loops = [("truth_loop", truth_fn), ("ekf_loop", ekf_fn), ("generic_loop", generic_fn)]
    print(f"{n} samples ({args.duration:.0f} s at 200 Hz), best of {args.repeats}")
    print(f"{'loop':<14}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, make in loops:
        t_py = best_of(args.repeats, make(loops_py))
        if _fastloops is None:
            print(f"{name:<14}{t_py * 1e3:>10.1f} ms{'n/a':>12}{'n/a':>10}")
            continue
        t_c = best_of(args.repeats, make(_fastloops))
        print(f"{name:<14}{t_py * 1e3:>10.1f} ms{t_c * 1e3:>10.2f} ms{t_py / t_c:>9.0f}x")
    if _fastloops is None:
        print("compiled extension not built; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
