import os
import subprocess
import sys

import numpy as np
import pytest

from omniplace import _fallback, kernels
from omniplace.features import _lbp_table

compiled = pytest.mark.skipif(not kernels.compiled_available(), reason="compiled kernels not built")


@compiled
@pytest.mark.parametrize("shape", [(16, 16), (120, 752), (37, 53), (3, 3)])
def test_compiled_hog_matches_fallback(shape):
    from omniplace import _kernels

    rng = np.random.default_rng(shape[0])
    img = rng.integers(0, 256, shape).astype(np.uint8)
    for cell, bins in ((16, 9), (8, 6), (3, 4)):
        a = _kernels.hog_cell_histograms(img, cell, bins)
        b = _fallback.hog_cell_histograms(img, cell, bins)
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-9)


@compiled
@pytest.mark.parametrize("uniform", [True, False])
def test_compiled_lbp_matches_fallback(uniform):
    from omniplace import _kernels

    rng = np.random.default_rng(9)
    table = _lbp_table(uniform)
    nbins = int(table.max()) + 1
    for shape in ((3, 3), (64, 64), (120, 752)):
        img = rng.integers(0, 256, shape).astype(np.uint8)
        np.testing.assert_array_equal(
            _kernels.lbp_histogram(img, table, nbins), _fallback.lbp_histogram(img, table, nbins)
        )


@compiled
def test_compiled_edges_and_extremes():
    from omniplace import _kernels

    for img in (np.zeros((32, 32), np.uint8), np.full((32, 32), 255, np.uint8),
                np.tile(np.array([0, 255], np.uint8), (32, 16))):
        np.testing.assert_allclose(
            _kernels.hog_cell_histograms(img, 16, 9), _fallback.hog_cell_histograms(img, 16, 9), atol=1e-9
        )


def test_pure_python_switch():
    code = "from omniplace import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, OMNIPLACE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backend_reported():
    expected = "cython" if kernels.compiled_available() and os.environ.get("OMNIPLACE_PURE_PYTHON") != "1" else "python"
    assert kernels.BACKEND == expected
