"""Backend selection for the Bellman backup kernels.

The compiled extension is used when it was built and ``MORSDP_PURE_PYTHON``
is unset; otherwise the numpy fallback is used.  ``BACKEND`` names the choice.
"""
import os

from . import _kernels_py

if os.environ.get("MORSDP_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "compiled"
backup_min = _impl.backup_min
backup_fixed = _impl.backup_fixed


def default_threads() -> int:
    value = os.environ.get("MORSDP_THREADS")
    if value:
        return max(1, int(value))
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)
