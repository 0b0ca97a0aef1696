"""Common estimator output container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from dragekf.errors import NonMonotonicTimeError, ShapeError

#: Column order of EstimateTrajectory.x, everywhere.
STATE_COLUMNS = ("phi", "theta", "beta_gx", "beta_gy", "vbx", "vby")


@dataclass
class EstimateTrajectory:
    """Per-sample estimator output.

    x columns follow STATE_COLUMNS.  Estimators without a covariance or
    innovation (the generic baseline) fill ``sig3``/``innov`` with NaN; the
    bias columns of such estimators are zero.  ``source`` tags the
    estimator family ("drag" or "generic").
    """

    t: np.ndarray
    x: np.ndarray
    sig3: np.ndarray
    innov: np.ndarray
    source: str = "drag"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        n = self.t.shape[0]
        if n == 0:
            raise ShapeError("estimate trajectory must contain at least one sample")
        shapes = {"x": (n, 6), "sig3": (n, 6), "innov": (n, 2)}
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ShapeError(f"{name} must have shape {shape}, got {arr.shape}")
            setattr(self, name, arr)
        if not np.all(np.isfinite(self.x)):
            raise ShapeError("estimate states contain non-finite values")
        if n > 1 and np.any(np.diff(self.t) <= 0.0):
            bad = int(np.argmax(np.diff(self.t) <= 0.0)) + 1
            raise NonMonotonicTimeError(
                f"sample {bad}: timestamps must strictly increase", index=bad
            )

    def __len__(self) -> int:
        return self.t.shape[0]

    @property
    def has_sigmas(self) -> bool:
        return bool(np.all(np.isfinite(self.sig3)))
