"""Compare the compiled sampler kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--trials N] [--repeat R]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from spinwave_photon import _kernels_py, kernels

try:
    from spinwave_photon import _ckernels
except ImportError:
    _ckernels = None


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--trials", type=int, default=1_000_000)
    parser.add_argument("--categories", type=int, default=64)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    p = rng.random(args.categories)
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    key = kernels.stream_key(12345, 0)
    masks = rng.integers(0, 256, args.trials).astype(np.uint64)

    backends = {"numpy": _kernels_py}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled kernels not built; timing the numpy fallback only")

    ref = _kernels_py.draw_categories(cdf, key, 0, args.trials)
    print(f"{'kernel':<18}{'backend':<10}{'best [ms]':>12}{'Mtrials/s':>12}")
    timings = {}
    for name, mod in backends.items():
        if not np.array_equal(mod.draw_categories(cdf, key, 0, args.trials), ref):
            raise SystemExit(f"{name}: draw_categories disagrees with the reference")
        for kernel, stmt in (
            ("uniforms", lambda: mod.uniforms(key, 0, args.trials)),
            ("draw_categories", lambda: mod.draw_categories(cdf, key, 0, args.trials)),
            ("count_superset", lambda: mod.count_superset(masks, 5)),
        ):
            best = min(timeit.repeat(stmt, number=1, repeat=args.repeat))
            timings[(kernel, name)] = best
            print(f"{kernel:<18}{name:<10}{best * 1e3:>12.2f}{args.trials / best / 1e6:>12.1f}")
    if "cython" in backends:
        for kernel in ("uniforms", "draw_categories", "count_superset"):
            print(f"speedup {kernel}: {timings[(kernel, 'numpy')] / timings[(kernel, 'cython')]:.1f}x")


if __name__ == "__main__":
    main()
