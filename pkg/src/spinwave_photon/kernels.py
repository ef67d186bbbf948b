"""Sampler kernels: compiled extension when built, numpy otherwise.

Set ``SPINWAVE_PURE=1`` to force the numpy path.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("SPINWAVE_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, stream: int = 0) -> int:
    """Key of an independent trial stream derived from (seed, stream)."""
    return splitmix64((seed & MASK64) + (stream + 1) * 0xD1B54A32D192ED03)


def uniforms(key: int, start: int, n: int):
    return _impl.uniforms(key, start, n)


def draw_categories(cdf, key: int, start: int, n: int):
    return _impl.draw_categories(cdf, key, start, n)


def count_superset(masks, pattern: int) -> int:
    return int(_impl.count_superset(masks, pattern))
