"""Inner-loop backend selection.

Two interchangeable implementations of the hot loops exist: a compiled
Cython extension (``_fastloops``) and a NumPy fallback (``loops_py``).
The compiled one is preferred when importable.  Override with the
environment variable ``DRAGEKF_BACKEND``:

* ``auto`` (default) -- compiled if available, else Python
* ``compiled``       -- require the extension, ImportError if missing
* ``python``         -- force the fallback

Both backends implement identical signatures and are held to near
machine-precision agreement by the test suite.
"""

from __future__ import annotations

import os

from dragekf._backend import loops_py

_requested = os.environ.get("DRAGEKF_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "compiled", "python"):
    raise ImportError(
        f"DRAGEKF_BACKEND={_requested!r} not recognised; use auto, compiled or python"
    )

_impl = None
if _requested in ("auto", "compiled"):
    try:
        from dragekf._backend import _fastloops as _impl
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "DRAGEKF_BACKEND=compiled but the dragekf._backend._fastloops "
                "extension is not built; reinstall the package or use auto/python"
            ) from None
        _impl = None
if _impl is None:
    _impl = loops_py

BACKEND_NAME: str = _impl.BACKEND_NAME
truth_loop = _impl.truth_loop
ekf_loop = _impl.ekf_loop
generic_loop = _impl.generic_loop

__all__ = ["BACKEND_NAME", "truth_loop", "ekf_loop", "generic_loop", "loops_py"]
