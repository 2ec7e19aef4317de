"""Dispatch to the compiled descriptor kernels, falling back to NumPy.

Set ``OMNIPLACE_PURE_PYTHON=1`` before import to force the fallback.
``BACKEND`` names the implementation in use.
"""
import os

import numpy as np

from . import _fallback

BACKEND = "python"
_compiled = None
if os.environ.get("OMNIPLACE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    else:
        BACKEND = "cython"


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True


def hog_cell_histograms(img: np.ndarray, cell: int, nbins: int) -> np.ndarray:
    if _compiled is not None:
        return _compiled.hog_cell_histograms(np.ascontiguousarray(img, dtype=np.uint8), cell, nbins)
    return _fallback.hog_cell_histograms(img, cell, nbins)


def lbp_histogram(img: np.ndarray, table: np.ndarray, nbins: int) -> np.ndarray:
    if _compiled is not None:
        return _compiled.lbp_histogram(
            np.ascontiguousarray(img, dtype=np.uint8),
            np.ascontiguousarray(table, dtype=np.int64),
            nbins,
        )
    return _fallback.lbp_histogram(img, table, nbins)
