"""Small fixed-size matrix guards used across the filter plumbing.

NumPy arrays are the matrix kernel; these helpers add the contracts the
filter relies on: construction-time dimension checks (never silent
broadcasting), symmetry and positive-definiteness tests, and symmetric
solves.  Everything here is sized for the 6x6 problems of this package.
"""

from __future__ import annotations

import numpy as np

from dragekf.errors import NotPositiveDefiniteError, ShapeError


def as_vector(x, n: int, name: str = "x") -> np.ndarray:
    """Validate and copy a length-n float vector."""
    arr = np.asarray(x, dtype=float)
    if arr.shape != (n,):
        raise ShapeError(f"{name} must have shape ({n},), got {arr.shape}")
    return arr.copy()


def as_matrix(a, rows: int, cols: int, name: str = "A") -> np.ndarray:
    """Validate and copy a rows-by-cols float matrix."""
    arr = np.asarray(a, dtype=float)
    if arr.shape != (rows, cols):
        raise ShapeError(f"{name} must have shape ({rows}, {cols}), got {arr.shape}")
    return arr.copy()


def max_asymmetry(P: np.ndarray) -> float:
    return float(np.max(np.abs(P - P.T))) if P.size else 0.0


def symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def require_symmetric(P: np.ndarray, tol: float = 1e-10, name: str = "P") -> None:
    worst = max_asymmetry(P)
    if worst > tol:
        raise NotPositiveDefiniteError(f"{name} asymmetric by {worst:.3e} (tol {tol:.1e})")


def is_positive_definite(P: np.ndarray) -> bool:
    """Cholesky-based test; also returns False for non-finite input."""
    if not np.all(np.isfinite(P)):
        return False
    try:
        np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        return False
    return True


def require_positive_definite(P: np.ndarray, name: str = "P") -> None:
    if not is_positive_definite(P):
        raise NotPositiveDefiniteError(f"{name} is not positive definite")


def solve_sym(S: np.ndarray, b: np.ndarray, name: str = "S") -> np.ndarray:
    """Solve S x = b for symmetric positive definite S."""
    require_positive_definite(S, name=name)
    return np.linalg.solve(S, b)
