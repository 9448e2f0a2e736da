"""Compare the compiled and NumPy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]

Prints per-kernel timings and checks that both backends agree bit for bit.
"""
import argparse
import timeit

import numpy as np

from divfid import _kernels_py

try:
    from divfid import _kernels as _kc
except ImportError:
    _kc = None


def cases(rng):
    cand = rng.standard_normal((1001, 2)) + 1j * rng.standard_normal((1001, 2))
    y = rng.standard_normal((2000, 2)) + 1j * rng.standard_normal((2000, 2))
    pts = rng.random((10**6, 2))
    return {
        "grid_argmin 2000x1001x2": ("grid_argmin", (y, cand)),
        "box_hash 1e6x2": ("box_hash", (pts, 2.0**-9)),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kc is None:
        print("compiled extension not built; only the NumPy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':26s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}  equal")
    for label, (name, argv) in cases(rng).items():
        py = getattr(_kernels_py, name)
        t_py = min(timeit.repeat(lambda: py(*argv), number=1, repeat=args.repeat)) * 1e3
        if _kc is None:
            print(f"{label:26s} {t_py:12.1f} {'-':>12s} {'-':>8s}  -")
            continue
        cy = getattr(_kc, name)
        t_cy = min(timeit.repeat(lambda: cy(*argv), number=1, repeat=args.repeat)) * 1e3
        a, b = py(*argv), cy(*argv)
        if isinstance(a, tuple):
            equal = all(np.array_equal(u, v) for u, v in zip(a, b))
        else:
            equal = np.array_equal(a, b)
        print(f"{label:26s} {t_py:12.1f} {t_cy:12.1f} {t_py / t_cy:8.1f}  {equal}")


if __name__ == "__main__":
    main()
