"""Truth-vs-estimate alignment, error metrics and consistency statistics.

Comparisons run on four channels: roll, pitch and the two body-frame
horizontal velocities.  Truth is linearly interpolated onto the estimate
timestamps (angles unwrapped first), and truth velocity is rotated into
the body frame by the truth attitude.  The total velocity error at a step
is |e_vbx| + |e_vby|; its growth rate over the final two thirds of a run
is the drift slope, the single number that separates a drift-free
estimator from an integrating one.

NEES here is the per-step sum over the four channels of squared error per
reported variance.  For a consistent estimator it is chi-square with four
degrees of freedom; steps are counted inside the one-sided 95% band
[0, chi2_95(4)], so zero error counts as inside and overconfidence counts
as outside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from dragekf.errors import MissingVarianceError, NoOverlapError
from dragekf.estimates import EstimateTrajectory
from dragekf.geometry import body_velocity
from dragekf.truthsim import TruthTrajectory

CHANNELS = ("phi", "theta", "vbx", "vby")

#: Upper edge of the one-sided 95% chi-square band with 4 degrees of freedom.
CHI2_BAND_DOF4 = float(chi2.ppf(0.95, 4))

MIN_OVERLAP_S = 1.0


def truth_body_series(truth: TruthTrajectory, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Truth attitude and body-frame velocity interpolated at given times.

    Returns (att (M,3), v_b (M,3)).  Angles are unwrapped before
    interpolation, so the returned attitude may exceed (-pi, pi].
    """
    att = np.empty((times.shape[0], 3))
    att[:, 0] = np.interp(times, truth.t, np.unwrap(truth.att[:, 0]))
    att[:, 1] = np.interp(times, truth.t, truth.att[:, 1])
    att[:, 2] = np.interp(times, truth.t, np.unwrap(truth.att[:, 2]))
    vel_e = np.empty((times.shape[0], 3))
    for j in range(3):
        vel_e[:, j] = np.interp(times, truth.t, truth.vel_e[:, j])
    return att, body_velocity(att, vel_e)


@dataclass
class PairedSeries:
    """Truth and estimate on a common time base, four channels per row."""

    t: np.ndarray
    truth: np.ndarray
    est: np.ndarray
    var: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.shape[0]


def align(truth: TruthTrajectory, est: EstimateTrajectory) -> PairedSeries:
    """Pair an estimate with interpolated truth over their time overlap."""
    lo = max(float(truth.t[0]), float(est.t[0]))
    hi = min(float(truth.t[-1]), float(est.t[-1]))
    if hi - lo < MIN_OVERLAP_S:
        raise NoOverlapError(
            f"truth [{truth.t[0]:.3f}, {truth.t[-1]:.3f}] and estimate "
            f"[{est.t[0]:.3f}, {est.t[-1]:.3f}] overlap for less than "
            f"{MIN_OVERLAP_S:.0f} s"
        )
    sel = (est.t >= lo) & (est.t <= hi)
    times = est.t[sel]
    att_i, vb_i = truth_body_series(truth, times)
    truth4 = np.column_stack([att_i[:, 0], att_i[:, 1], vb_i[:, 0], vb_i[:, 1]])
    est4 = est.x[np.ix_(sel.nonzero()[0], [0, 1, 4, 5])]
    sig34 = est.sig3[np.ix_(sel.nonzero()[0], [0, 1, 4, 5])]
    var = (sig34 / 3.0) ** 2 if bool(np.all(np.isfinite(sig34))) else None
    return PairedSeries(
        t=times.copy(),
        truth=truth4,
        est=est4,
        var=var,
        meta={"source": est.source, "n_total": len(est)},
    )


def channel_errors(ps: PairedSeries) -> np.ndarray:
    """est - truth per channel, angle channels wrapped to (-pi, pi]."""
    e = ps.est - ps.truth
    for j in (0, 1):
        e[:, j] = e[:, j] - math.tau * np.round(e[:, j] / math.tau)
    return e


@dataclass
class MetricsReport:
    """Summary metrics for one estimator run against truth."""

    source: str
    n: int
    t_start: float
    t_end: float
    rmse: dict
    final_rmse: dict
    max_abs: dict
    rmse_vel_total: float
    final_rmse_vel_total: float
    drift_slope: float
    drift_ci95: tuple[float, float]
    nees_mean: float
    nees_fraction: float

    #: drift slopes (m/s per s) below this magnitude count as bounded,
    #: above DRIFT_GROWING as growing; in between the run is indeterminate.
    DRIFT_BOUNDED = 0.002
    DRIFT_GROWING = 0.02

    @property
    def drift_flag(self) -> str:
        if abs(self.drift_slope) <= self.DRIFT_BOUNDED:
            return "bounded"
        if self.drift_slope >= self.DRIFT_GROWING:
            return "growing"
        return "indeterminate"

    def to_kv(self) -> list[tuple[str, float | str]]:
        rows: list[tuple[str, float | str]] = [
            ("source", self.source),
            ("n", self.n),
            ("t_start", self.t_start),
            ("t_end", self.t_end),
        ]
        for name in CHANNELS:
            rows.append((f"rmse_{name}", self.rmse[name]))
        for name in CHANNELS:
            rows.append((f"final_rmse_{name}", self.final_rmse[name]))
        for name in CHANNELS:
            rows.append((f"max_abs_{name}", self.max_abs[name]))
        rows += [
            ("rmse_vel_total", self.rmse_vel_total),
            ("final_rmse_vel_total", self.final_rmse_vel_total),
            ("drift_slope", self.drift_slope),
            ("drift_ci95_lo", self.drift_ci95[0]),
            ("drift_ci95_hi", self.drift_ci95[1]),
            ("drift", self.drift_flag),
            ("nees_mean", self.nees_mean),
            ("nees_fraction", self.nees_fraction),
        ]
        return rows


def error_metrics(ps: PairedSeries, drift_window: float = 2.0 / 3.0) -> MetricsReport:
    """Compute the standard metric set for a paired series.

    Invariant to a common shift of both time axes.  ``drift_window`` is the
    trailing fraction of the run used for the drift fit (the leading part
    is estimator convergence, not drift); the final-window RMSEs use the
    trailing 25%.
    """
    e = channel_errors(ps)
    t = ps.t
    span = float(t[-1] - t[0])
    final_mask = t >= t[0] + 0.75 * span
    e_tot = np.abs(e[:, 2]) + np.abs(e[:, 3])

    rmse = {name: float(np.sqrt(np.mean(e[:, j] ** 2))) for j, name in enumerate(CHANNELS)}
    final_rmse = {
        name: float(np.sqrt(np.mean(e[final_mask, j] ** 2)))
        for j, name in enumerate(CHANNELS)
    }
    max_abs = {name: float(np.max(np.abs(e[:, j]))) for j, name in enumerate(CHANNELS)}

    slope, ci = drift_fit(t, e_tot, drift_window)

    if ps.var is not None:
        series, fraction = nees(ps)
        nees_mean = float(np.mean(series))
    else:
        nees_mean, fraction = float("nan"), float("nan")

    return MetricsReport(
        source=str(ps.meta.get("source", "unknown")),
        n=len(ps),
        t_start=float(t[0]),
        t_end=float(t[-1]),
        rmse=rmse,
        final_rmse=final_rmse,
        max_abs=max_abs,
        rmse_vel_total=float(np.sqrt(np.mean(e_tot**2))),
        final_rmse_vel_total=float(np.sqrt(np.mean(e_tot[final_mask] ** 2))),
        drift_slope=slope,
        drift_ci95=ci,
        nees_mean=nees_mean,
        nees_fraction=fraction,
    )


def drift_fit(
    t: np.ndarray, series: np.ndarray, window: float = 2.0 / 3.0
) -> tuple[float, tuple[float, float]]:
    """OLS slope of a series over its trailing time window, with a 95% CI.

    The CI assumes independent residuals, which per-sample errors are not;
    across-seed statistics are the trustworthy version (the acceptance
    tests use them), but the single-run CI is still a useful scale bar.
    """
    span = float(t[-1] - t[0])
    mask = t >= t[0] + (1.0 - window) * span
    tw = t[mask]
    yw = series[mask]
    if tw.shape[0] < 3:
        return float("nan"), (float("nan"), float("nan"))
    tc = tw - np.mean(tw)
    denom = float(tc @ tc)
    if denom == 0.0:
        return float("nan"), (float("nan"), float("nan"))
    slope = float((tc @ (yw - np.mean(yw))) / denom)
    resid = (yw - np.mean(yw)) - slope * tc
    dof = tw.shape[0] - 2
    se = math.sqrt(float(resid @ resid) / dof / denom)
    return slope, (slope - 1.96 * se, slope + 1.96 * se)


def write_errors_csv(ps: PairedSeries, path: str) -> None:
    """Plot-ready per-step table: t, channel errors, 3-sigma bounds.

    Write-only companion to the metrics report; columns mirror CHANNELS.
    Bounds are NaN when the estimator reported none.
    """
    e = channel_errors(ps)
    if ps.var is not None:
        sig3 = 3.0 * np.sqrt(ps.var)
    else:
        sig3 = np.full_like(e, np.nan)
    cols = ["t"]
    cols += [f"e_{name}" for name in CHANNELS]
    cols += [f"sig3_{name}" for name in CHANNELS]
    lines = ["# dragekf errors v1 cols=" + ",".join(cols)]
    table = np.column_stack([ps.t, e, sig3])
    for row in table:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def nees(ps: PairedSeries) -> tuple[np.ndarray, float]:
    """Per-step NEES over the four channels and the in-band fraction.

    Uses the per-channel variances the estimator reported (cross
    covariances are not transported in files, so the statistic is the
    diagonal version).  Fraction counts steps with NEES <= chi2_95(4).
    """
    if ps.var is None:
        raise MissingVarianceError("paired series carries no estimator variances")
    if np.any(ps.var <= 0.0):
        raise MissingVarianceError("estimator variances must be positive for NEES")
    e = channel_errors(ps)
    series = np.sum(e * e / ps.var, axis=1)
    fraction = float(np.mean(series <= CHI2_BAND_DOF4))
    return series, fraction
