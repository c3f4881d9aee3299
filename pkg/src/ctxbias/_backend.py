"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python fallback
is numerically identical, so the choice only affects speed. Set CTXBIAS_PURE=1
to force the fallback (used by tests and the benchmark).
"""

from __future__ import annotations

import os

if os.environ.get("CTXBIAS_PURE"):
    from . import _pykernels as kernels

    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from . import _pykernels as kernels  # type: ignore[no-redef]

        BACKEND = "python"

fuse_scores = kernels.fuse_scores
levenshtein_fill = kernels.levenshtein_fill
