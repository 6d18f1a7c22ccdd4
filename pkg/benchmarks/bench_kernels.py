"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Both back ends are checked for identical output before timing.
"""

import argparse
import time

import numpy as np

from fractalhp import geometry as G, kernels
from fractalhp.quadrature import _root_square


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    impls = kernels.backends()
    if "compiled" not in impls:
        print("compiled extension not available; build it with `python setup.py build_ext --inplace`")
    region = G.unit_snowflake_region()
    pts = np.random.default_rng(0).uniform(-0.7, 0.7, (200_000, 2))
    x0, y0, size = _root_square(region)
    cases = [
        ("classify 2e5 points, depth 6",
         lambda k: k.classify_points(region.verts, region.koch, pts, 6, region.eps)),
        ("classify 2e5 points, depth 9",
         lambda k: k.classify_points(region.verts, region.koch, pts, 9, region.eps)),
        ("decompose depth 9", lambda k: k.decompose_cells(region.verts, region.koch, x0, y0, size, 9, 0.5,
                                                          region.eps)),
        ("decompose depth 11", lambda k: k.decompose_cells(region.verts, region.koch, x0, y0, size, 11, 0.5,
                                                           region.eps)),
    ]
    print(f"{'case':32s} " + " ".join(f"{name:>10s}" for name in impls) + "   speed-up")
    for label, fn in cases:
        res = {name: best_of(lambda: fn(mod), args.repeat) for name, mod in impls.items()}
        outs = [r[1] for r in res.values()]
        for o in outs[1:]:
            a, b = (outs[0], o) if isinstance(o, tuple) else ((outs[0],), (o,))
            assert all(np.array_equal(x, y) for x, y in zip(a, b)), f"back ends disagree on {label}"
        row = " ".join(f"{res[n][0]:9.3f}s" for n in impls)
        speed = res["python"][0] / res["compiled"][0] if "compiled" in res else float("nan")
        print(f"{label:32s} {row}   {speed:7.1f}x")


if __name__ == "__main__":
    main()
