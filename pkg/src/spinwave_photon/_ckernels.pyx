# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops of the Monte Carlo sampler.

Must stay bit-identical to ``_kernels_py``.
"""

import numpy as np

from libc.stdint cimport uint64_t, int64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t key, uint64_t k) nogil:
    return <double>(_mix(key + (k + 1) * GOLDEN) >> 11) * (1.0 / 9007199254740992.0)


def uniforms(uint64_t key, int64_t start, int64_t n):
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef int64_t i
    with nogil:
        for i in range(n):
            o[i] = _uniform(key, <uint64_t>(start + i))
    return out


def draw_categories(const double[::1] cdf, uint64_t key, int64_t start, int64_t n):
    """Index of the first cdf entry exceeding the uniform of each trial."""
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] o = out
    cdef int64_t i, base, half, size, m = cdf.shape[0]
    cdef double u
    with nogil:
        for i in range(n):
            u = _uniform(key, <uint64_t>(start + i))
            # branchless upper bound: the comparison compiles to a conditional move
            base = 0
            size = m
            while size > 1:
                half = size >> 1
                base = base + half * (cdf[base + half - 1] <= u)
                size -= half
            base += cdf[base] <= u
            o[i] = base if base < m else m - 1
    return out


def count_superset(const uint64_t[::1] masks, uint64_t pattern):
    """Number of click masks containing every bit of ``pattern``."""
    cdef int64_t i, total = 0
    with nogil:
        for i in range(masks.shape[0]):
            if (masks[i] & pattern) == pattern:
                total += 1
    return total
