"""Time the compiled kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best-of-N wall time for both backends on the same
inputs and the speedup.  Inputs are the sizes the pipeline actually meets:
a 4096-line Cantor hull in H^3 and an H^2 disk mesh of radius 6 at h = 0.1.
"""

import argparse
import timeit

import numpy as np

from hyperharm import _backend, _pycore
from hyperharm.boundary import gen_cantor
from hyperharm.geometry import origin, polar_point
from hyperharm.harmonic import mesh_ball
from hyperharm.hull import build_hull
from hyperharm.streams import RandomStream

J = np.diag([-1.0, 1, 1, 1])


def cases():
    K = build_hull(gen_cantor(1 / 3, 10), "auto", 4096, rng=RandomStream(1))
    g = np.random.default_rng(0)
    dirs = g.standard_normal((2000, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    P = polar_point(dirs, g.uniform(0, 6, 2000))
    alpha = -(P @ J @ K.ends.T)
    # per-line window: a tube of radius 2 about each line, 4 units long
    lo, hi = np.full(len(K), np.exp(-4.0)), np.full(len(K), np.exp(4.0))

    mesh = mesh_ball(origin(2), 6.0, 0.1)
    F = mesh.points.copy()

    yield "min_line_product", lambda impl: _backend.min_line_product(alpha, K.I, K.J, K.C, impl)
    yield "cylinder_count", lambda impl: _backend.cylinder_count(alpha, K.I, K.J, K.C, lo, hi,
                                                                 np.cosh(2.0) ** 2, impl)
    yield "edge_log_sum", lambda impl: _backend.edge_log_sum(F, mesh.indptr, mesh.indices,
                                                             mesh.weights, impl)
    yield "greedy_color", lambda impl: _backend.greedy_color(mesh.indptr, mesh.indices, impl)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _backend.BACKEND != "cython":
        print("compiled core unavailable; only the fallback can be timed")
    print(f"{'kernel':18s} {'cython [s]':>12s} {'python [s]':>12s} {'speedup':>9s}")
    for name, fn in cases():
        slow = min(timeit.repeat(lambda: fn(_pycore), number=1, repeat=args.repeat))
        if _backend.BACKEND == "cython":
            fast = min(timeit.repeat(lambda: fn(_backend._impl), number=1, repeat=args.repeat))
            print(f"{name:18s} {fast:12.5f} {slow:12.5f} {slow / fast:9.1f}")
        else:
            print(f"{name:18s} {'-':>12s} {slow:12.5f} {'-':>9s}")


if __name__ == "__main__":
    main()
