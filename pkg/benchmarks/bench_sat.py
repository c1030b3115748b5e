"""Benchmark the compiled geometry kernels against the pure-Python fallback.

Usage:
    python3 benchmarks/bench_sat.py [--pairs N]

Runs the same random workloads through both backends and reports timings and
speedups. The backends are imported directly (no env var juggling), so one
process measures both.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from fleetmpc.geometry import EPS, PolyUnion, _satpy, convex_hull

try:
    from fleetmpc.geometry import _satcy
except ImportError:
    _satcy = None


def random_convex(rng, scale=1.0):
    pts = rng.uniform(-scale, scale, size=(rng.integers(6, 14), 2))
    center = rng.uniform(-2 * scale, 2 * scale, size=2)
    return np.ascontiguousarray(convex_hull(pts) + center)


def bench(label, fn, n_iter):
    t0 = time.perf_counter()
    for _ in range(n_iter):
        fn()
    dt = time.perf_counter() - t0
    print(f"  {label:28s} {dt * 1e6 / n_iter:10.1f} us/call")
    return dt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=400)
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    from fleetmpc.geometry import ConvexPolygon

    pairs = [(random_convex(rng), random_convex(rng)) for _ in range(args.pairs)]
    ua = PolyUnion([ConvexPolygon(random_convex(rng)) for _ in range(24)])
    ub = PolyUnion([ConvexPolygon(random_convex(rng)) for _ in range(24)])
    ad, ao, aab = ua.packed()
    bd, bo, bab = ub.packed()
    inner = random_convex(rng, 0.8)

    backends = [("python", _satpy)] + ([("compiled", _satcy)] if _satcy else [])
    results = {}
    for name, mod in backends:
        print(f"backend: {name}")
        t_pair = bench(
            "convex_overlap (pairs)",
            lambda: [mod.convex_overlap(a, b, EPS) for a, b in pairs],
            20,
        )
        t_union = bench(
            "union_overlap (24x24 parts)",
            lambda: mod.union_overlap(ad, ao, aab, bd, bo, bab, EPS),
            2000,
        )
        t_contain = bench(
            "poly_in_union",
            lambda: mod.poly_in_union(inner, ad, ao, aab, EPS),
            2000,
        )
        results[name] = (t_pair, t_union, t_contain)

    if len(results) == 2:
        py = results["python"]
        cy = results["compiled"]
        print("speedup compiled vs python:")
        for label, i in (("convex_overlap", 0), ("union_overlap", 1), ("poly_in_union", 2)):
            print(f"  {label:28s} {py[i] / cy[i]:8.1f}x")
    # sanity: backends agree
    for a, b in pairs[:100]:
        assert _satpy.convex_overlap(a, b, EPS) == (
            _satcy.convex_overlap(a, b, EPS) if _satcy else _satpy.convex_overlap(a, b, EPS)
        )
    print("agreement check: OK")


if __name__ == "__main__":
    main()
