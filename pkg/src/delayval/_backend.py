"""Kernel backend selection.

The compiled Cython extension is preferred; the pure-numpy fallback is
used when the extension is unavailable or when DELAYVAL_BACKEND=python
is set.  Both expose the same entry points with interchangeable
semantics (bit-for-bit for the stochastic kernels).
"""
from __future__ import annotations

import os

_requested = os.environ.get("DELAYVAL_BACKEND", "auto").lower()

if _requested not in ("auto", "cython", "python"):
    raise ImportError(f"DELAYVAL_BACKEND must be auto, cython or python, got {_requested!r}")

if _requested == "python":
    from . import _kernels_py as _impl
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise ImportError("compiled kernel requested via DELAYVAL_BACKEND=cython "
                              "but delayval._kernels is not built") from None
        from . import _kernels_py as _impl
        BACKEND = "python"

mean_path_kernel = _impl.mean_path_kernel
euler_accumulate = _impl.euler_accumulate
euler_paths = _impl.euler_paths


def available_backends() -> list[str]:
    out = []
    try:
        from . import _kernels  # noqa: F401
        out.append("cython")
    except ImportError:
        pass
    out.append("python")
    return out
