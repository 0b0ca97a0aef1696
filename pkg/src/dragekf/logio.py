"""File formats: CSV logs and flat key=value configs.

All files are plain text, one record per line, LF endings.  Every CSV
starts with exactly one header line of the form

    # dragekf <kind> v1 source=<tag> rate_hz=<float> fingerprint=<hex8|none> cols=<names>

followed by comma-separated data rows.  Floats are written with
``repr(float(x))`` (shortest round-trip representation), so write->read is
value-exact; NaN is legal only in the sig3/innovation columns of estimate
files, infinities never.  Readers are strict: anything the writers cannot
produce is rejected with a line number.

Config files are flat ``key = value`` lines with full-line ``#`` comments.
Unknown keys are errors (they are almost always typos), all values are
validated by the target dataclass, and an optional ``kind = ...`` line
pins the schema.
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np

from dragekf.baseline import GenericConfig
from dragekf.errors import (
    ConfigValueError,
    DataError,
    MalformedRowError,
    MissingKeyError,
    NonMonotonicTimeError,
    UnknownKeyError,
)
from dragekf.estimates import EstimateTrajectory
from dragekf.ekf import FilterConfig
from dragekf.sensors import ImuLog, NoiseConfig
from dragekf.truthsim import TruthTrajectory, VehicleParams

FORMAT_VERSION = "v1"

IMU_COLS = "t,gx,gy,gz,ax,ay,az"
TRUTH_COLS = "t,phi,theta,psi,vx_e,vy_e,vz_e,x,y,z"
EST_COLS = (
    "t,phi,theta,beta_gx,beta_gy,vbx,vby,"
    "sig3_phi,sig3_theta,sig3_beta_gx,sig3_beta_gy,sig3_vbx,sig3_vby,"
    "innov_ax,innov_ay"
)

_COLS_BY_KIND = {"imu": IMU_COLS, "truth": TRUTH_COLS, "est": EST_COLS}
#: columns (by index) where NaN is legal, per kind
_NAN_OK = {"imu": frozenset(), "truth": frozenset(), "est": frozenset(range(7, 15))}


@dataclass(frozen=True)
class LogHeader:
    """Metadata carried in the single '#' header line of every CSV."""

    kind: str
    source: str = "sim"
    rate_hz: float = 0.0
    fingerprint: str = "none"
    version: str = FORMAT_VERSION

    def render(self) -> str:
        cols = _COLS_BY_KIND[self.kind]
        return (
            f"# dragekf {self.kind} {self.version} source={self.source} "
            f"rate_hz={fmt(self.rate_hz)} fingerprint={self.fingerprint} cols={cols}"
        )


def fmt(v: float) -> str:
    """Shortest decimal that parses back to exactly the same float."""
    return repr(float(v))


def _rate_of(t: np.ndarray) -> float:
    if t.shape[0] < 2:
        return 0.0
    return (t.shape[0] - 1) / float(t[-1] - t[0])


def _parse_header(line: str, kind: str, path: str) -> LogHeader:
    def bad(reason: str) -> MalformedRowError:
        return MalformedRowError(f"{path}:1: bad header ({reason})", index=1)

    tokens = line.split(" ")
    if len(tokens) != 8 or tokens[0] != "#" or tokens[1] != "dragekf":
        raise bad("expected '# dragekf <kind> <version> source=... rate_hz=... "
                  "fingerprint=... cols=...'")
    if tokens[2] != kind:
        raise bad(f"kind {tokens[2]!r} where {kind!r} expected")
    if tokens[3] != FORMAT_VERSION:
        raise bad(f"unrecognised format version {tokens[3]!r}")
    fields = {}
    for tok in tokens[4:]:
        key, sep, value = tok.partition("=")
        if not sep or key not in ("source", "rate_hz", "fingerprint", "cols"):
            raise bad(f"unexpected header token {tok!r}")
        fields[key] = value
    if fields.get("cols") != _COLS_BY_KIND[kind]:
        raise bad("column list does not match the schema")
    try:
        rate = float(fields["rate_hz"])
    except ValueError:
        raise bad(f"rate_hz {fields['rate_hz']!r} is not a float") from None
    return LogHeader(kind=kind, source=fields["source"], rate_hz=rate,
                     fingerprint=fields["fingerprint"])


def _read_table(path: str, kind: str) -> tuple[LogHeader, np.ndarray]:
    n_cols = _COLS_BY_KIND[kind].count(",") + 1
    nan_ok = _NAN_OK[kind]
    try:
        with open(path, "r", encoding="ascii", newline="") as fh:
            text = fh.read()
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from None
    except UnicodeDecodeError:
        raise MalformedRowError(f"{path}: not an ASCII text file") from None
    if not text.endswith("\n"):
        raise MalformedRowError(f"{path}: missing final newline")
    lines = text.split("\n")[:-1]
    if not lines:
        raise MalformedRowError(f"{path}: empty file")
    header = _parse_header(lines[0], kind, path)
    if len(lines) == 1:
        raise MalformedRowError(f"{path}: no data rows")
    rows = np.empty((len(lines) - 1, n_cols))
    prev_t = -math.inf
    for li, line in enumerate(lines[1:], start=2):
        tokens = line.split(",")
        if len(tokens) != n_cols:
            raise MalformedRowError(
                f"{path}:{li}: expected {n_cols} fields, found {len(tokens)}", index=li
            )
        for ci, tok in enumerate(tokens):
            if not tok or tok != tok.strip():
                raise MalformedRowError(
                    f"{path}:{li}: empty or padded field {ci + 1}", index=li
                )
            try:
                value = float(tok)
            except ValueError:
                raise MalformedRowError(
                    f"{path}:{li}: field {ci + 1} ({tok!r}) is not a number", index=li
                ) from None
            if math.isinf(value):
                raise MalformedRowError(
                    f"{path}:{li}: field {ci + 1} is infinite", index=li
                )
            if math.isnan(value) and ci not in nan_ok:
                raise MalformedRowError(
                    f"{path}:{li}: field {ci + 1} may not be NaN", index=li
                )
            rows[li - 2, ci] = value
        if rows[li - 2, 0] <= prev_t:
            raise NonMonotonicTimeError(
                f"{path}:{li}: timestamp does not increase", index=li
            )
        prev_t = rows[li - 2, 0]
    return header, rows


def _write_table(path: str, header: LogHeader, rows: np.ndarray) -> None:
    out = [header.render()]
    for row in rows:
        out.append(",".join(fmt(v) for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def write_imu_csv(log: ImuLog, path: str, fingerprint: str = "none") -> None:
    header = LogHeader("imu", source=log.source, rate_hz=_rate_of(log.t),
                       fingerprint=fingerprint)
    _write_table(path, header, np.column_stack([log.t, log.gyro, log.accel]))


def read_imu_csv(path: str) -> ImuLog:
    header, rows = _read_table(path, "imu")
    return ImuLog(
        t=rows[:, 0],
        gyro=rows[:, 1:4],
        accel=rows[:, 4:7],
        noise=None,
        bias_truth=None,
        source=header.source,
        meta={"header": header},
    )


def write_truth_csv(traj: TruthTrajectory, path: str, fingerprint: str = "none") -> None:
    """Write truth samples; the in-memory body-rate channel is not part of
    the schema and is dropped."""
    header = LogHeader("truth", source="sim", rate_hz=_rate_of(traj.t),
                       fingerprint=fingerprint)
    _write_table(path, header, np.column_stack([traj.t, traj.att, traj.vel_e, traj.pos_e]))


def read_truth_csv(path: str) -> TruthTrajectory:
    header, rows = _read_table(path, "truth")
    return TruthTrajectory(
        t=rows[:, 0],
        att=rows[:, 1:4],
        vel_e=rows[:, 4:7],
        pos_e=rows[:, 7:10],
        rates=None,
        meta={"header": header},
    )


def write_estimates_csv(est: EstimateTrajectory, path: str, fingerprint: str = "none") -> None:
    header = LogHeader("est", source=est.source, rate_hz=_rate_of(est.t),
                       fingerprint=fingerprint)
    _write_table(path, header, np.column_stack([est.t, est.x, est.sig3, est.innov]))


def read_estimates_csv(path: str) -> EstimateTrajectory:
    header, rows = _read_table(path, "est")
    return EstimateTrajectory(
        t=rows[:, 0],
        x=rows[:, 1:7],
        sig3=rows[:, 7:13],
        innov=rows[:, 13:15],
        source=header.source,
        meta={"header": header},
    )


# --- configs ---------------------------------------------------------------

CONFIG_KINDS = ("filter", "noise", "vehicle", "generic")


def _filter_to_kv(cfg: FilterConfig) -> list[tuple[str, str]]:
    kv = [("kind", "filter")]
    for name in ("k1", "m", "g", "tau_gx", "tau_gy"):
        kv.append((name, fmt(getattr(cfg, name))))
    for key, value in zip(("w_gx", "w_gy", "w_bgx", "w_bgy", "w_vx", "w_vy"), cfg.w):
        kv.append((key, fmt(value)))
    kv += [("sigma_ax", fmt(cfg.sigma_ax)), ("sigma_ay", fmt(cfg.sigma_ay))]
    for key, value in zip(("x0_phi", "x0_theta", "x0_bgx", "x0_bgy", "x0_vbx", "x0_vby"), cfg.x0):
        kv.append((key, fmt(value)))
    for key, value in zip(("p0_phi", "p0_theta", "p0_bgx", "p0_bgy", "p0_vbx", "p0_vby"), cfg.p0):
        kv.append((key, fmt(value)))
    kv += [
        ("ts_nominal", fmt(cfg.ts_nominal)),
        ("trace_ceiling", fmt(cfg.trace_ceiling)),
        ("qk_mode", cfg.qk_mode),
    ]
    return kv


_W_KEYS = ("w_gx", "w_gy", "w_bgx", "w_bgy", "w_vx", "w_vy")
_X0_KEYS = ("x0_phi", "x0_theta", "x0_bgx", "x0_bgy", "x0_vbx", "x0_vby")
_P0_KEYS = ("p0_phi", "p0_theta", "p0_bgx", "p0_bgy", "p0_vbx", "p0_vby")


def _kv_to_filter(d: dict[str, str]) -> FilterConfig:
    base = FilterConfig()
    kwargs = {}
    for name in ("k1", "m", "g", "tau_gx", "tau_gy", "sigma_ax", "sigma_ay",
                 "ts_nominal", "trace_ceiling"):
        if name in d:
            kwargs[name] = _as_float(name, d[name])
    for group, keys in (("w", _W_KEYS), ("x0", _X0_KEYS), ("p0", _P0_KEYS)):
        values = list(getattr(base, group))
        touched = False
        for i, key in enumerate(keys):
            if key in d:
                values[i] = _as_float(key, d[key])
                touched = True
        if touched:
            kwargs[group] = tuple(values)
    if "qk_mode" in d:
        kwargs["qk_mode"] = d["qk_mode"]
    return FilterConfig(**kwargs)


def _noise_to_kv(cfg: NoiseConfig) -> list[tuple[str, str]]:
    return [
        ("kind", "noise"),
        ("sigma_g", fmt(cfg.sigma_g)),
        ("sigma_bg", fmt(cfg.sigma_bg)),
        ("tau_g", fmt(cfg.tau_g)),
        ("sigma_a", fmt(cfg.sigma_a)),
        ("beta_g0_x", fmt(cfg.beta_g0[0])),
        ("beta_g0_y", fmt(cfg.beta_g0[1])),
        ("beta_g0_z", fmt(cfg.beta_g0[2])),
        ("seed", str(cfg.seed)),
    ]


def _kv_to_noise(d: dict[str, str]) -> NoiseConfig:
    base = NoiseConfig()
    kwargs = {}
    for name in ("sigma_g", "sigma_bg", "tau_g", "sigma_a"):
        if name in d:
            kwargs[name] = _as_float(name, d[name])
    beta = list(base.beta_g0)
    for i, key in enumerate(("beta_g0_x", "beta_g0_y", "beta_g0_z")):
        if key in d:
            beta[i] = _as_float(key, d[key])
    kwargs["beta_g0"] = tuple(beta)
    if "seed" in d:
        kwargs["seed"] = _as_int("seed", d["seed"])
    return NoiseConfig(**kwargs)


def _vehicle_to_kv(cfg: VehicleParams) -> list[tuple[str, str]]:
    return [
        ("kind", "vehicle"),
        ("m", fmt(cfg.m)),
        ("k1", fmt(cfg.k1)),
        ("g", fmt(cfg.g)),
        ("thrust_total", fmt(cfg.thrust_total)),
        ("thrust_mode", cfg.thrust_mode),
    ]


def _kv_to_vehicle(d: dict[str, str]) -> VehicleParams:
    kwargs = {}
    for name in ("m", "k1", "g", "thrust_total"):
        if name in d:
            kwargs[name] = _as_float(name, d[name])
    if "thrust_mode" in d:
        kwargs["thrust_mode"] = d["thrust_mode"]
    return VehicleParams(**kwargs)


def _generic_to_kv(cfg: GenericConfig) -> list[tuple[str, str]]:
    return [
        ("kind", "generic"),
        ("alpha", fmt(cfg.alpha)),
        ("g", fmt(cfg.g)),
        ("ts_nominal", fmt(cfg.ts_nominal)),
    ]


def _kv_to_generic(d: dict[str, str]) -> GenericConfig:
    kwargs = {}
    for name in ("alpha", "g", "ts_nominal"):
        if name in d:
            kwargs[name] = _as_float(name, d[name])
    return GenericConfig(**kwargs)


_TO_KV = {
    "filter": _filter_to_kv,
    "noise": _noise_to_kv,
    "vehicle": _vehicle_to_kv,
    "generic": _generic_to_kv,
}
_FROM_KV = {
    "filter": _kv_to_filter,
    "noise": _kv_to_noise,
    "vehicle": _kv_to_vehicle,
    "generic": _kv_to_generic,
}
_KNOWN_KEYS = {
    "filter": {"kind", "k1", "m", "g", "tau_gx", "tau_gy", "sigma_ax", "sigma_ay",
               "ts_nominal", "trace_ceiling", "qk_mode",
               *_W_KEYS, *_X0_KEYS, *_P0_KEYS},
    "noise": {"kind", "sigma_g", "sigma_bg", "tau_g", "sigma_a",
              "beta_g0_x", "beta_g0_y", "beta_g0_z", "seed"},
    "vehicle": {"kind", "m", "k1", "g", "thrust_total", "thrust_mode"},
    "generic": {"kind", "alpha", "g", "ts_nominal"},
}

ConfigObject = FilterConfig | NoiseConfig | VehicleParams | GenericConfig


def _as_float(key: str, value: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise ConfigValueError(f"{key} = {value!r} is not a number") from None
    if not math.isfinite(out):
        raise ConfigValueError(f"{key} = {value!r} must be finite")
    return out


def _as_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigValueError(f"{key} = {value!r} is not an integer") from None


def parse_config_lines(text: str, origin: str = "<config>") -> dict[str, str]:
    """Flat key=value lines into an ordered dict; comments and blanks skipped."""
    out: dict[str, str] = {}
    for li, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise MalformedRowError(f"{origin}:{li}: expected 'key = value'", index=li)
        if key in out:
            raise MalformedRowError(f"{origin}:{li}: duplicate key {key!r}", index=li)
        out[key] = value
    return out


def known_keys(kind: str) -> frozenset[str]:
    if kind not in CONFIG_KINDS:
        raise ConfigValueError(f"unknown config kind {kind!r}; expected one of {CONFIG_KINDS}")
    return frozenset(_KNOWN_KEYS[kind])


def build_config(kind: str, d: dict[str, str], origin: str = "<config>") -> ConfigObject:
    """Validate a parsed key/value dict and build the typed config."""
    if kind not in CONFIG_KINDS:
        raise ConfigValueError(f"unknown config kind {kind!r}; expected one of {CONFIG_KINDS}")
    declared = d.get("kind")
    if declared is not None and declared != kind:
        raise ConfigValueError(
            f"{origin} declares kind={declared!r} where {kind!r} is required"
        )
    known = _KNOWN_KEYS[kind]
    for key in d:
        if key not in known:
            raise UnknownKeyError(f"{origin}: unknown {kind} config key {key!r}")
    return _FROM_KV[kind](d)


def read_config(
    path: str | None,
    kind: str | None = None,
    overrides: dict[str, str] | None = None,
) -> ConfigObject:
    """Load a config of the given kind, with optional key overrides.

    ``kind=None`` requires the file to declare itself with a ``kind`` line.
    ``path=None`` starts from defaults (overrides still apply).  Unknown
    keys are errors; values are validated by the target dataclass.
    """
    d: dict[str, str] = {}
    if path is not None:
        try:
            with open(path, "r", encoding="ascii") as fh:
                text = fh.read()
        except OSError as err:
            raise DataError(f"cannot read config {path}: {err}") from None
        d = parse_config_lines(text, origin=path)
    if overrides:
        d.update(overrides)
    declared = d.get("kind")
    if kind is None:
        if declared is None:
            raise MissingKeyError(
                f"{path or '<config>'}: no 'kind' line and no kind requested"
            )
        kind = declared
    return build_config(kind, d, origin=path or "<config>")


def write_config(cfg: ConfigObject, path: str) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(render_config(cfg))


def render_config(cfg: ConfigObject) -> str:
    kind = _kind_of(cfg)
    lines = [f"# dragekf {kind} config"]
    lines += [f"{key} = {value}" for key, value in _TO_KV[kind](cfg)]
    return "\n".join(lines) + "\n"


def config_fingerprint(cfg: ConfigObject) -> str:
    """Eight hex chars identifying the effective config values."""
    return hashlib.sha256(render_config(cfg).encode("ascii")).hexdigest()[:8]


def _kind_of(cfg: ConfigObject) -> str:
    if isinstance(cfg, FilterConfig):
        return "filter"
    if isinstance(cfg, NoiseConfig):
        return "noise"
    if isinstance(cfg, VehicleParams):
        return "vehicle"
    if isinstance(cfg, GenericConfig):
        return "generic"
    raise ConfigValueError(f"not a config object: {type(cfg).__name__}")


def ensure_parent_dir(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
