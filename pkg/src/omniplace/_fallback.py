"""NumPy implementations of the per-pixel descriptor kernels.

Used when the compiled ``_kernels`` extension is unavailable or disabled.
Conventions (gradient stencil, orientation wrap, bin interpolation, LBP bit
order) are identical to the Cython versions.
"""
import math

import numpy as np

RAD2DEG = 180.0 / math.pi

# (dy, dx) of LBP bit 0..7: east, then counter-clockwise.
LBP_OFFSETS = ((0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1))


def hog_cell_histograms(img, cell, nbins):
    """Orientation histograms of every complete ``cell x cell`` tile.

    Centered differences with zero gradient on the image border; unsigned
    orientation in [0, 180) degrees; bin k is centered on ``k * 180 / nbins``
    and each pixel's magnitude is split linearly between the two nearest
    centers (wrapping at 180).
    """
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    ncy, ncx = h // cell, w // cell
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    gx[:, 1:-1] = img[:, 2:] - img[:, :-2]
    gy[1:-1, :] = img[2:, :] - img[:-2, :]
    gx = gx[: ncy * cell, : ncx * cell]
    gy = gy[: ncy * cell, : ncx * cell]

    mag = np.sqrt(gx * gx + gy * gy)
    deg = np.arctan2(gy, gx) * RAD2DEG
    deg[deg < 0] += 180.0
    deg[deg >= 180.0] -= 180.0
    pos = deg * (nbins / 180.0)
    fl = np.floor(pos)
    frac = pos - fl
    lo = fl.astype(np.int64) % nbins
    hi = (lo + 1) % nbins

    ys, xs = np.indices(mag.shape)
    base = ((ys // cell) * ncx + xs // cell) * nbins
    size = ncy * ncx * nbins
    hist = np.bincount((base + lo).ravel(), weights=(mag * (1.0 - frac)).ravel(), minlength=size)
    hist += np.bincount((base + hi).ravel(), weights=(mag * frac).ravel(), minlength=size)
    return hist.reshape(ncy, ncx, nbins)


def lbp_codes(img):
    """8-neighbour radius-1 codes of the interior pixels; neighbour >= center sets a bit."""
    img = np.asarray(img)
    h, w = img.shape
    center = img[1:-1, 1:-1]
    codes = np.zeros((h - 2, w - 2), dtype=np.int64)
    for bit, (dy, dx) in enumerate(LBP_OFFSETS):
        neigh = img[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        codes |= (neigh >= center).astype(np.int64) << bit
    return codes


def lbp_histogram(img, table, nbins):
    """Bin counts of ``table[code]`` over the interior pixels."""
    return np.bincount(np.asarray(table)[lbp_codes(img)].ravel(), minlength=nbins).astype(np.int64)
