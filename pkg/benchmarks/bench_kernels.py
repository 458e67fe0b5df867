"""Compare the compiled and numpy pairwise-distance kernels.

    python benchmarks/bench_kernels.py [--sizes 256,1024,2048] [--dim 128] [--repeat 5]

Both backends are imported directly, so one process times both regardless
of ``HYPUML_PURE_PYTHON``.
"""

import argparse
import timeit

import numpy as np

from hypuml._kernels import _pairwise_py

try:
    from hypuml._kernels import _pairwise as _pairwise_cy
except ImportError:  # extension not built
    _pairwise_cy = None


def _points(rng, n, dim, c):
    x = rng.standard_normal((n, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * rng.uniform(0.1, 0.9, (n, 1)) / np.sqrt(c)


def bench(n, dim, c, repeat, rng):
    X = _points(rng, n, dim, c)
    Y = _points(rng, n, dim, c)
    G = rng.standard_normal((n, n))
    rows = []
    backends = [("numpy", _pairwise_py)]
    if _pairwise_cy is not None:
        backends.append(("cython", _pairwise_cy))
    ref = _pairwise_py.pairwise_distance(X, Y, c)
    for name, mod in backends:
        fwd = min(timeit.repeat(lambda: mod.pairwise_distance(X, Y, c), number=1, repeat=repeat))
        bwd = min(timeit.repeat(lambda: mod.pairwise_distance_backward(X, Y, c, G), number=1, repeat=repeat))
        err = float(np.max(np.abs(mod.pairwise_distance(X, Y, c) - ref)))
        rows.append((name, fwd, bwd, err))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sizes", default="256,1024,2048")
    ap.add_argument("--dim", type=int, default=128)
    ap.add_argument("--curvature", type=float, default=0.1)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    if _pairwise_cy is None:
        print("compiled extension not available; timing numpy only")
    print(f"{'N':>6} {'backend':>8} {'forward s':>10} {'backward s':>11} {'max |diff|':>11}")
    for n in (int(s) for s in args.sizes.split(",")):
        rows = bench(n, args.dim, args.curvature, args.repeat, rng)
        for name, fwd, bwd, err in rows:
            print(f"{n:>6} {name:>8} {fwd:>10.4f} {bwd:>11.4f} {err:>11.2e}")
        if len(rows) == 2:
            print(f"{'':>6} {'speedup':>8} {rows[0][1] / rows[1][1]:>9.2f}x {rows[0][2] / rows[1][2]:>10.2f}x")


if __name__ == "__main__":
    main()
