"""Trial-kernel selection.

The compiled kernel is preferred when present; the pure-numpy kernel is the
fallback.  Both produce bitwise-identical results, so the choice only
affects speed.  Set SPITFILTER_KERNEL=c or =py to force one (useful for the
benchmark and the cross-backend tests).
"""

from __future__ import annotations

import os

_forced = os.environ.get("SPITFILTER_KERNEL", "").strip().lower()

if _forced in ("", "auto"):
    try:
        from . import _kernel as kernel
        BACKEND = "c"
    except ImportError:
        from . import _kernel_py as kernel
        BACKEND = "python"
elif _forced == "c":
    from . import _kernel as kernel
    BACKEND = "c"
elif _forced in ("py", "python"):
    from . import _kernel_py as kernel
    BACKEND = "python"
else:
    raise ImportError(
        f"SPITFILTER_KERNEL={_forced!r} not recognized; use 'c', 'py' or 'auto'")

run_trials_exponential = kernel.run_trials_exponential
run_trials_pool = kernel.run_trials_pool

__all__ = ["BACKEND", "kernel", "run_trials_exponential", "run_trials_pool"]
