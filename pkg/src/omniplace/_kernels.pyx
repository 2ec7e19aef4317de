# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel descriptor kernels. See ``_fallback`` for the conventions."""
from libc.math cimport floor

import numpy as np

from ._fallback import RAD2DEG

# Gradients of 8-bit images are integers in [-255, 255]; magnitude and
# orientation are tabulated with the same NumPy expressions as the fallback.
_G = np.arange(-255, 256, dtype=np.float64)
_GY, _GX = np.meshgrid(_G, _G, indexing="ij")
_MAG = np.ascontiguousarray(np.sqrt(_GX * _GX + _GY * _GY).ravel())
_DEG = np.arctan2(_GY, _GX) * RAD2DEG
_DEG[_DEG < 0] += 180.0
_DEG[_DEG >= 180.0] -= 180.0
_DEG = np.ascontiguousarray(_DEG.ravel())
del _G, _GY, _GX


def hog_cell_histograms(const unsigned char[:, ::1] img, int cell, int nbins):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t ncy = h // cell
    cdef Py_ssize_t ncx = w // cell
    out = np.zeros((ncy, ncx, nbins), dtype=np.float64)
    cdef double[:, :, ::1] hist = out
    cdef const double[::1] mag_lut = _MAG
    cdef const double[::1] deg_lut = _DEG
    cdef Py_ssize_t y, x, cy, cx, lo, hi, gx, gy, idx
    cdef double mag, pos, fl, frac
    cdef double scale = nbins / 180.0

    with nogil:
        for y in range(ncy * cell):
            cy = y // cell
            for x in range(ncx * cell):
                if 0 < x < w - 1:
                    gx = <Py_ssize_t>img[y, x + 1] - <Py_ssize_t>img[y, x - 1]
                else:
                    gx = 0
                if 0 < y < h - 1:
                    gy = <Py_ssize_t>img[y + 1, x] - <Py_ssize_t>img[y - 1, x]
                else:
                    gy = 0
                if gx == 0 and gy == 0:
                    continue
                idx = (gy + 255) * 511 + gx + 255
                mag = mag_lut[idx]
                pos = deg_lut[idx] * scale
                fl = floor(pos)
                frac = pos - fl
                lo = (<Py_ssize_t>fl) % nbins
                hi = (lo + 1) % nbins
                cx = x // cell
                hist[cy, cx, lo] += mag * (1.0 - frac)
                hist[cy, cx, hi] += mag * frac
    return out


def lbp_histogram(const unsigned char[:, ::1] img, const long long[::1] table, int nbins):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    counts = np.zeros(nbins, dtype=np.int64)
    cdef long long[::1] c = counts
    cdef Py_ssize_t y, x
    cdef int code
    cdef unsigned char v

    with nogil:
        for y in range(1, h - 1):
            for x in range(1, w - 1):
                v = img[y, x]
                code = ((img[y, x + 1] >= v)
                        | ((img[y - 1, x + 1] >= v) << 1)
                        | ((img[y - 1, x] >= v) << 2)
                        | ((img[y - 1, x - 1] >= v) << 3)
                        | ((img[y, x - 1] >= v) << 4)
                        | ((img[y + 1, x - 1] >= v) << 5)
                        | ((img[y + 1, x] >= v) << 6)
                        | ((img[y + 1, x + 1] >= v) << 7))
                c[table[code]] += 1
    return counts
