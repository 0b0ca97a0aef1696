"""Canned maneuver scripts and script-file I/O.

Scripts are piecewise-constant body-rate schedules (see truthsim).  The
builders here produce the scenarios the test suite and CLI presets use:

* ``hover``: zero rates, for sanity checks and noise floors.
* ``mixed``: the standard scenario, a gentle triangle-wave tilt
  oscillation that alternates between the roll and pitch axes.  Stays
  near hover (peak tilt ~6 deg) where the planar-drag model is most
  faithful, while still developing enough body velocity to excite it.
* ``reversal``: aggressive diagonal direction reversals (equal roll and
  pitch); the developed speed puts peak horizontal deceleration above
  2 m/s^2, which is where accelerometer-as-gravity attitude estimators
  are most wrong.
* ``figure-eight``: square-wave rate approximation of a 1:2 roll/pitch
  Lissajous tilt pattern; traces looping paths.

Script files are plain text: full-line ``#`` comments, then one
``duration,wx,wy,wz`` row per segment (seconds, rad/s).
"""

from __future__ import annotations

import math

from dragekf.errors import DataError, MalformedRowError
from dragekf.geometry import BodyRates
from dragekf.truthsim import ManeuverScript, ManeuverSegment

_ZERO = BodyRates(0.0, 0.0, 0.0)


def _seg(duration: float, wx: float = 0.0, wy: float = 0.0, wz: float = 0.0) -> ManeuverSegment:
    return ManeuverSegment(duration, BodyRates(wx, wy, wz))


def _pad_to(segments: list[ManeuverSegment], duration: float) -> list[ManeuverSegment]:
    used = sum(s.duration for s in segments)
    if used > duration + 1e-9:
        raise DataError(
            f"script needs {used:.2f} s but only {duration:.2f} s requested"
        )
    if duration - used > 1e-9:
        segments.append(ManeuverSegment(duration - used, _ZERO))
    return segments


def hover_script(duration: float = 10.0) -> ManeuverScript:
    return ManeuverScript((ManeuverSegment(duration, _ZERO),))


def mixed_maneuver_script(
    duration: float = 120.0,
    rate: float = 0.25,
    quarter: float = 0.4,
    cycles_per_axis: int = 3,
    lead_in: float = 1.0,
) -> ManeuverScript:
    """Alternating roll/pitch triangle-wave tilt oscillation.

    One cycle ramps the tilt to +rate*quarter, swings through to the
    mirrored tilt, and ramps back to level; after ``cycles_per_axis``
    cycles the active axis switches.  Peak tilt is rate*quarter (0.1 rad
    with the defaults) and peak body speed ~0.3 m/s.  The oscillation
    period is kept short against the drag time constant so the vertical
    component of planar drag (a term the estimator's force model drops)
    averages out instead of pumping vertical speed.
    """
    block = cycles_per_axis * 4.0 * quarter
    segments: list[ManeuverSegment] = [_seg(lead_in)]
    budget = duration - lead_in
    t_used = 0.0
    axis = 0  # 0 = roll (wx), 1 = pitch (wy)
    while t_used + block <= budget + 1e-9:
        w = (rate, 0.0) if axis == 0 else (0.0, rate)
        nw = (-rate, 0.0) if axis == 0 else (0.0, -rate)
        for _ in range(cycles_per_axis):
            segments += [
                _seg(quarter, *w),
                _seg(2.0 * quarter, *nw),
                _seg(quarter, *w),
            ]
        t_used += block
        axis ^= 1
    return ManeuverScript(tuple(_pad_to(segments, duration)))


def reversal_script(
    cycles: int = 3,
    rate: float = 0.25,
    tilt_time: float = 0.7,
    hold: float = 3.0,
    lead_in: float = 1.0,
) -> ManeuverScript:
    """Diagonal direction reversals exercising both tilt axes at once.

    Each cycle tilts to a combined rate*tilt_time (split equally between
    roll and pitch), lets speed build over the hold, swings through to the
    mirrored tilt (the reversal), holds, and re-levels.  With the defaults
    the developed speed is ~1.3 m/s and horizontal deceleration through a
    reversal peaks above 2.3 m/s^2."""
    if cycles < 1:
        raise DataError(f"need at least one cycle, got {cycles}")
    r = rate / math.sqrt(2.0)
    segments: list[ManeuverSegment] = [_seg(lead_in)]
    for _ in range(cycles):
        segments += [
            _seg(tilt_time, wx=r, wy=r),
            _seg(hold),
            _seg(2.0 * tilt_time, wx=-r, wy=-r),
            _seg(hold),
            _seg(tilt_time, wx=r, wy=r),
            _seg(1.0),
        ]
    return ManeuverScript(tuple(segments))


def figure_eight_script(duration: float = 120.0, rate: float = 0.1, period: float = 8.0) -> ManeuverScript:
    """Square-wave roll at 1/period Hz against pitch at 2/period Hz."""
    q = period / 4.0  # pitch half-period; roll flips every 2q
    segments: list[ManeuverSegment] = []
    t_used = 0.0
    k = 0
    while t_used + q <= duration + 1e-9:
        roll = rate if (k // 2) % 2 == 0 else -rate
        pitch = rate if k % 2 == 0 else -rate
        segments.append(_seg(q, wx=roll, wy=pitch))
        t_used += q
        k += 1
    return ManeuverScript(tuple(_pad_to(segments, duration)))


NAMED_SCRIPTS = {
    "hover": hover_script,
    "mixed": mixed_maneuver_script,
    "reversal": reversal_script,  # fixed duration; takes cycles, not seconds
    "figure-eight": figure_eight_script,
}


def build_script(name: str, duration: float | None = None) -> ManeuverScript:
    """Build one of the named scripts, optionally at a custom duration."""
    if name not in NAMED_SCRIPTS:
        raise DataError(
            f"unknown script {name!r}; names: {', '.join(sorted(NAMED_SCRIPTS))}"
        )
    if duration is None:
        return NAMED_SCRIPTS[name]()
    if name == "reversal":
        raise DataError("the reversal script has a fixed duration; omit --duration")
    return NAMED_SCRIPTS[name](duration)


def transient_windows(script: ManeuverScript, pad_after: float = 1.0) -> list[tuple[float, float]]:
    """Time windows covering every rate-active segment plus a settling pad,
    overlapping windows merged.  Used to score estimators on transients."""
    windows: list[tuple[float, float]] = []
    t = 0.0
    for seg in script.segments:
        if any(r != 0.0 for r in (seg.rates.wx, seg.rates.wy, seg.rates.wz)):
            start, end = t, t + seg.duration + pad_after
            if windows and start <= windows[-1][1]:
                windows[-1] = (windows[-1][0], max(windows[-1][1], end))
            else:
                windows.append((start, end))
        t += seg.duration
    return windows


def save_script(script: ManeuverScript, path: str) -> None:
    lines = ["# dragekf maneuver script: duration,wx,wy,wz (s, rad/s)"]
    for seg in script.segments:
        lines.append(
            f"{seg.duration!r},{seg.rates.wx!r},{seg.rates.wy!r},{seg.rates.wz!r}"
        )
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_script(path: str) -> ManeuverScript:
    try:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    except OSError as err:
        raise DataError(f"cannot read script {path}: {err}") from None
    except UnicodeDecodeError:
        raise MalformedRowError(f"{path}: not an ASCII text file") from None
    segments: list[ManeuverSegment] = []
    for li, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split(",")
        if len(tokens) != 4:
            raise MalformedRowError(
                f"{path}:{li}: expected 'duration,wx,wy,wz'", index=li
            )
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            raise MalformedRowError(
                f"{path}:{li}: non-numeric segment field", index=li
            ) from None
        if not all(math.isfinite(v) for v in values):
            raise MalformedRowError(f"{path}:{li}: non-finite segment field", index=li)
        segments.append(ManeuverSegment(values[0], BodyRates(*values[1:])))
    if not segments:
        raise MalformedRowError(f"{path}: no segments found")
    return ManeuverScript(tuple(segments))
