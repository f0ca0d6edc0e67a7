"""Selects the kernel backend at import time.

The compiled extension ``pcrtbp._core`` is preferred; the pure-Python
module ``pcrtbp._purepy`` is the fallback.  Set ``PCRTBP_PURE=1`` to force
the fallback (used by the benchmark and by tests that compare the two).
"""

import os

if os.environ.get("PCRTBP_PURE"):
    from . import _purepy as kernels

    BACKEND = "pure"
else:
    try:
        from . import _core as kernels  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _purepy as kernels

        BACKEND = "pure"
