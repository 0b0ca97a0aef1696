"""Batch pipeline driver.

Subcommands compose through files: simulate writes truth CSV, synthesize
writes an IMU log (and optionally the matching truth), estimate runs either
estimator over a log, fit identifies the drag coefficient, evaluate and
compare score estimates against truth.  Every pipeline is reproducible:
the same configs and seed give byte-identical artifacts.

Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numerical
failure.  Files hold SI units and radians; degrees appear only in the
printed summaries.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace

from dragekf import baseline, ekf, evaluate, logio, scenarios, sensors, sysid, truthsim
from dragekf.errors import (
    ConfigValueError,
    DataError,
    MissingKeyError,
    NumericalError,
    UnknownKeyError,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; this tool reserves 2 for data
    errors, so usage problems are remapped to 1."""

    def error(self, message: str):  # noqa: A003 - argparse API
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _kv_pair(arg: str) -> tuple[str, str]:
    key, sep, value = arg.partition("=")
    key, value = key.strip(), value.strip()
    if not sep or not key or not value:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {arg!r}")
    return key, value


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="ascii") as fh:
            return fh.read()
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from None
    except UnicodeDecodeError:
        raise DataError(f"{path}: not an ASCII text file") from None


def _load_configs(args: argparse.Namespace, needed: tuple[str, ...]) -> dict:
    """Resolve --config files and --set overrides into typed configs.

    Files may declare their kind with a ``kind = ...`` line; a file without
    one is only accepted when the command needs a single kind.  Each --set
    key is routed to whichever needed kind defines it (the schemas of kinds
    used together are disjoint).
    """
    raw: dict[str, dict[str, str]] = {kind: {} for kind in needed}
    for path in getattr(args, "config", None) or []:
        d = logio.parse_config_lines(_read_text(path), origin=path)
        kind = d.get("kind")
        if kind is None:
            if len(needed) == 1:
                kind = needed[0]
            else:
                raise MissingKeyError(
                    f"{path}: add a 'kind = ...' line; this command uses "
                    + " and ".join(needed)
                )
        if kind not in needed:
            raise ConfigValueError(
                f"{path}: kind {kind!r} is not used by this command"
            )
        if raw[kind]:
            raise ConfigValueError(f"{path}: duplicate {kind!r} config")
        raw[kind] = d
    for key, value in getattr(args, "set", None) or []:
        if key == "kind":
            raise UnknownKeyError("'kind' cannot be overridden with --set")
        owners = [k for k in needed if key in logio.known_keys(k)]
        if not owners:
            raise UnknownKeyError(
                f"--set key {key!r} is not a {' or '.join(needed)} config key"
            )
        raw[owners[0]][key] = value
    return {
        kind: logio.build_config(kind, d, origin=f"<{kind} config>")
        for kind, d in raw.items()
    }


def _resolve_script(name_or_path: str, duration: float | None) -> truthsim.ManeuverScript:
    if name_or_path in scenarios.NAMED_SCRIPTS:
        return scenarios.build_script(name_or_path, duration)
    if duration is not None:
        raise DataError(
            f"script file {name_or_path!r} carries its own duration; omit --duration"
        )
    return scenarios.load_script(name_or_path)


def _fmt_value(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    return logio.fmt(v)


def _report_lines(report: evaluate.MetricsReport) -> list[str]:
    return [f"{key} = {_fmt_value(value)}" for key, value in report.to_kv()]


def _human_summary(report: evaluate.MetricsReport) -> list[str]:
    return [
        f"# {report.source}: attitude rmse {math.degrees(report.rmse['phi']):.3f} / "
        f"{math.degrees(report.rmse['theta']):.3f} deg (roll/pitch), "
        f"velocity rmse {report.rmse_vel_total:.4f} m/s, drift {report.drift_flag} "
        f"(slope {report.drift_slope:.3e} m/s per s)",
    ]


def _emit(text: str, out: str | None) -> None:
    sys.stdout.write(text)
    if out is not None:
        logio.ensure_parent_dir(out)
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)


def cmd_simulate(args: argparse.Namespace) -> int:
    script = _resolve_script(args.script, args.duration)
    vehicle = _load_configs(args, ("vehicle",))["vehicle"]
    traj = truthsim.simulate(script, vehicle, dt=args.dt)
    logio.ensure_parent_dir(args.out)
    logio.write_truth_csv(traj, args.out, fingerprint=logio.config_fingerprint(vehicle))
    print(
        f"wrote {args.out}: {traj.t.shape[0]} rows, "
        f"{traj.t[-1] - traj.t[0]:.3f} s at {1.0 / args.dt:.0f} Hz"
    )
    return EXIT_OK


def cmd_synthesize(args: argparse.Namespace) -> int:
    script = _resolve_script(args.script, args.duration)
    cfgs = _load_configs(args, ("vehicle", "noise"))
    vehicle, noise = cfgs["vehicle"], cfgs["noise"]
    if args.seed is not None:
        noise = replace(noise, seed=args.seed)
    traj = truthsim.simulate(script, vehicle, dt=args.dt)
    log = sensors.synthesize(traj, vehicle, noise)
    fingerprint = logio.config_fingerprint(noise)
    logio.ensure_parent_dir(args.out)
    logio.write_imu_csv(log, args.out, fingerprint=fingerprint)
    print(f"wrote {args.out}: {log.t.shape[0]} samples, seed {noise.seed}")
    if args.truth_out is not None:
        logio.ensure_parent_dir(args.truth_out)
        logio.write_truth_csv(
            traj, args.truth_out, fingerprint=logio.config_fingerprint(vehicle)
        )
        print(f"wrote {args.truth_out}: {traj.t.shape[0]} rows")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    log = logio.read_imu_csv(args.imu)
    if args.which == "drag":
        cfg = _load_configs(args, ("filter",))["filter"]
        est = ekf.run_filter(log, cfg)
    else:
        cfg = _load_configs(args, ("generic",))["generic"]
        est = baseline.run_generic(log, cfg)
    logio.ensure_parent_dir(args.out)
    logio.write_estimates_csv(est, args.out, fingerprint=logio.config_fingerprint(cfg))
    print(f"wrote {args.out}: {est.t.shape[0]} samples ({est.source})")
    return EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    log = logio.read_imu_csv(args.imu)
    truth = logio.read_truth_csv(args.truth)
    vehicle = _load_configs(args, ("vehicle",))["vehicle"]
    result = sysid.fit_k1(log, truth, vehicle.m)
    lines = [
        "# dragekf fit v1",
        f"# {result.summary()}",
        f"k1_over_m = {logio.fmt(result.k1_over_m)}",
        f"k1 = {logio.fmt(result.k1)}",
        f"residual_rms = {logio.fmt(result.residual_rms)}",
        f"n_samples = {result.n_samples}",
        f"r_squared = {logio.fmt(result.r_squared)}",
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_evaluate(args: argparse.Namespace) -> int:
    truth = logio.read_truth_csv(args.truth)
    est = logio.read_estimates_csv(args.est)
    ps = evaluate.align(truth, est)
    report = evaluate.error_metrics(ps)
    lines = ["# dragekf report v1"] + _human_summary(report) + _report_lines(report)
    _emit("\n".join(lines) + "\n", args.out)
    if args.errors_out is not None:
        logio.ensure_parent_dir(args.errors_out)
        evaluate.write_errors_csv(ps, args.errors_out)
        print(f"wrote {args.errors_out}")
    return EXIT_OK


#: numeric metrics that get a delta row in comparison reports
_DELTA_KEYS = (
    ["rmse_" + c for c in evaluate.CHANNELS]
    + ["final_rmse_" + c for c in evaluate.CHANNELS]
    + ["max_abs_" + c for c in evaluate.CHANNELS]
    + ["rmse_vel_total", "final_rmse_vel_total", "drift_slope"]
)


def cmd_compare(args: argparse.Namespace) -> int:
    truth = logio.read_truth_csv(args.truth)
    est_a = logio.read_estimates_csv(args.est_a)
    est_b = logio.read_estimates_csv(args.est_b)
    rep_a = evaluate.error_metrics(evaluate.align(truth, est_a))
    rep_b = evaluate.error_metrics(evaluate.align(truth, est_b))
    kv_a, kv_b = dict(rep_a.to_kv()), dict(rep_b.to_kv())
    lines = [
        "# dragekf comparison v1",
        f"# a = {args.est_a} ({rep_a.source}), b = {args.est_b} ({rep_b.source})",
    ]
    lines += _human_summary(rep_a) + _human_summary(rep_b)
    lines += ["[a]"] + _report_lines(rep_a)
    lines += ["[b]"] + _report_lines(rep_b)
    lines += ["[delta]"]
    lines += [
        f"delta_{key} = {logio.fmt(float(kv_b[key]) - float(kv_a[key]))}"
        for key in _DELTA_KEYS
    ]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_preset(args: argparse.Namespace) -> int:
    """Write the standard-scenario configs and run the whole pipeline."""
    out_dir = args.out_dir
    os.makedirs(out_dir, exist_ok=True)
    vehicle = truthsim.VehicleParams()
    noise = sensors.NoiseConfig(seed=args.seed)
    fcfg = ekf.FilterConfig.matched(noise, vehicle)
    gcfg = baseline.GenericConfig()
    script = scenarios.mixed_maneuver_script(duration=args.duration)

    def p(name: str) -> str:
        return os.path.join(out_dir, name)

    logio.write_config(vehicle, p("vehicle.cfg"))
    logio.write_config(noise, p("noise.cfg"))
    logio.write_config(fcfg, p("filter.cfg"))
    logio.write_config(gcfg, p("generic.cfg"))
    scenarios.save_script(script, p("script.txt"))

    traj = truthsim.simulate(script, vehicle, dt=0.005)
    log = sensors.synthesize(traj, vehicle, noise)
    logio.write_truth_csv(traj, p("truth.csv"), fingerprint=logio.config_fingerprint(vehicle))
    logio.write_imu_csv(log, p("imu.csv"), fingerprint=logio.config_fingerprint(noise))
    est_a = ekf.run_filter(log, fcfg)
    est_b = baseline.run_generic(log, gcfg)
    logio.write_estimates_csv(est_a, p("est_drag.csv"), fingerprint=logio.config_fingerprint(fcfg))
    logio.write_estimates_csv(est_b, p("est_generic.csv"), fingerprint=logio.config_fingerprint(gcfg))
    for name in ("vehicle.cfg", "noise.cfg", "filter.cfg", "generic.cfg",
                 "script.txt", "truth.csv", "imu.csv", "est_drag.csv", "est_generic.csv"):
        print(f"wrote {p(name)}")

    compare_args = argparse.Namespace(
        truth=p("truth.csv"), est_a=p("est_drag.csv"), est_b=p("est_generic.csv"),
        out=p("report.txt"),
    )
    code = cmd_compare(compare_args)
    print(f"wrote {p('report.txt')}")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dragekf", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        return sp

    def opt_config(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", action="append", metavar="FILE",
                        help="config file; repeatable, kind detected from its 'kind' line")
        sp.add_argument("--set", action="append", type=_kv_pair, metavar="KEY=VALUE",
                        help="override one config value; repeatable")

    sp = add("simulate", cmd_simulate, "integrate a maneuver script into a truth CSV")
    sp.add_argument("script", help="built-in script name or script file path")
    sp.add_argument("--duration", type=float, help="seconds (built-in scripts only)")
    sp.add_argument("--dt", type=float, default=0.005, help="step, default 0.005 s")
    opt_config(sp)
    sp.add_argument("--out", required=True, metavar="FILE")

    sp = add("synthesize", cmd_synthesize,
             "simulate a script and emit a noisy IMU log (optionally the truth too)")
    sp.add_argument("script", help="built-in script name or script file path")
    sp.add_argument("--duration", type=float, help="seconds (built-in scripts only)")
    sp.add_argument("--dt", type=float, default=0.005, help="step, default 0.005 s")
    opt_config(sp)
    sp.add_argument("--seed", type=int, help="override the noise config seed")
    sp.add_argument("--out", required=True, metavar="FILE")
    sp.add_argument("--truth-out", metavar="FILE", help="also write the truth CSV")

    sp = add("estimate", cmd_estimate, "run an estimator over an IMU log")
    sp.add_argument("imu", help="IMU CSV path")
    sp.add_argument("--which", choices=("drag", "generic"), default="drag")
    opt_config(sp)
    sp.add_argument("--out", required=True, metavar="FILE")

    sp = add("fit", cmd_fit, "identify the drag coefficient from an IMU log plus truth")
    sp.add_argument("imu", help="IMU CSV path")
    sp.add_argument("truth", help="truth CSV path")
    opt_config(sp)
    sp.add_argument("--out", metavar="FILE", help="also write the report to a file")

    sp = add("evaluate", cmd_evaluate, "score one estimate against truth")
    sp.add_argument("truth", help="truth CSV path")
    sp.add_argument("est", help="estimate CSV path")
    sp.add_argument("--out", metavar="FILE", help="also write the report to a file")
    sp.add_argument("--errors-out", metavar="FILE",
                    help="write the per-step error/3-sigma CSV")

    sp = add("compare", cmd_compare, "score two estimates against truth, with deltas")
    sp.add_argument("truth", help="truth CSV path")
    sp.add_argument("est_a", help="first estimate CSV (usually the drag filter)")
    sp.add_argument("est_b", help="second estimate CSV (usually the generic baseline)")
    sp.add_argument("--out", metavar="FILE", help="also write the report to a file")

    sp = add("preset", cmd_preset,
             "write the standard-scenario configs and run the full pipeline")
    sp.add_argument("name", choices=("standard",))
    sp.add_argument("--out-dir", required=True, metavar="DIR")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--duration", type=float, default=120.0)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # -h exits 0; usage errors exit 1 via _Parser.error
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NumericalError as err:
        print(f"dragekf: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DataError as err:
        print(f"dragekf: error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
