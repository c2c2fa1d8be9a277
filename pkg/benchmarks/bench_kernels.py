"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--n 2000]

Each kernel runs on identical inputs in both backends; outputs are checked
for agreement before timing.
"""

import argparse
import importlib
import timeit

import numpy as np

from seqmon import _kernels_py
from seqmon.basis import make_additive_cubic_spline


def _inputs(n, seed=0):
    rng = np.random.default_rng(seed)
    basis = make_additive_cubic_spline(3, 4, (-2.0, 2.0))
    X = rng.uniform(-2, 2, size=(n, 3))
    phi = basis.eval_many(X)
    q = basis.q
    arms = rng.integers(0, 2, size=n).astype(np.int64)
    y = rng.standard_normal(n)
    u = rng.random(n)
    # well-conditioned starting point for the greedy kernel
    P = np.stack([np.eye(q) * 0.01, np.eye(q) * 0.01])
    beta = rng.standard_normal((2, q)) * 0.1
    return basis, X, phi, arms, y, u, P, beta


def _cases(mod, n):
    basis, X, phi, arms, y, u, P, beta = _inputs(n)
    q = basis.q
    knots = np.array([-2.0] * 4 + list(basis.knots[0]) + [2.0] * 4)
    x1 = np.ascontiguousarray(X[:, 0])

    def stream():
        sigma, gamma = np.zeros((2, q, q)), np.zeros((2, q))
        mod.stream_update(sigma, gamma, phi, arms, y, 0)
        return sigma

    def spline():
        out = np.empty((n, knots.size - 4))
        mod.bspline_basis(x1, knots, 3, out)
        return out

    def greedy():
        Pc, bc = P.copy(), beta.copy()
        a, p, ys = np.empty(n, dtype=np.int64), np.empty(n), np.empty(n)
        mod.greedy_run(phi, u, y, y + 1.0, Pc, bc, 0.3, a, p, ys)
        return bc

    def reservoir():
        pts = np.zeros((512, 3))
        mod.reservoir_offer(pts, 0, np.ascontiguousarray(X), 12345)
        return pts

    return {"stream_update": stream, "bspline_basis": spline, "greedy_run": greedy,
            "reservoir_offer": reservoir}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=2000, help="rows per call")
    args = ap.parse_args(argv)

    try:
        compiled = importlib.import_module("seqmon._kernels")
    except ImportError:
        print("compiled extension not built; only the Python backend is available")
        return 1

    fast, slow = _cases(compiled, args.n), _cases(_kernels_py, args.n)
    print(f"{'kernel':<16} {'cython [ms]':>12} {'python [ms]':>12} {'speedup':>9}")
    for name in fast:
        np.testing.assert_allclose(fast[name](), slow[name](), rtol=1e-9, atol=1e-12)
        t_fast = min(timeit.repeat(fast[name], number=1, repeat=args.repeat)) * 1e3
        t_slow = min(timeit.repeat(slow[name], number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<16} {t_fast:>12.3f} {t_slow:>12.3f} {t_slow / t_fast:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
