"""Vectorised numpy versions of the sampler kernels (fallback path).

Results are bit-identical to the compiled extension.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(key: int, start: int, n: int) -> np.ndarray:
    k = np.arange(start + 1, start + n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(np.uint64(key) + k * GOLDEN)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def draw_categories(cdf: np.ndarray, key: int, start: int, n: int) -> np.ndarray:
    u = uniforms(key, start, n)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1).astype(np.int64)


def count_superset(masks: np.ndarray, pattern: int) -> int:
    p = np.uint64(pattern)
    return int(np.count_nonzero((masks & p) == p))
