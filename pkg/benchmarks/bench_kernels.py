"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--points 20000] [--repeat 5]

Prints one line per kernel with the best-of-repeat time for each backend
and the speedup.
"""
import argparse
import timeit

import numpy as np

from henonlab import kernels
from henonlab.core import HenonComposition
from henonlab.green import _tails, escape_radius


def cases(n, rng):
    # an attracting fixed point with a large basin, so many points use the whole budget
    f = HenonComposition.single([-0.5 + 0.1j, 0j, 1 + 0j], 0.3)
    # a mix of points that escape quickly and points that stay bounded for the full budget
    z = 0.7 * (rng.normal(size=(2, n)) + 1j * rng.normal(size=(2, n)))
    order, tails = _tails(f, False)
    esc = (*f.packed, order, tails, z[0], z[1], escape_radius(f), 400, 1e-10, False)
    jac = (*f.packed, 0.5 * z[0], 0.5 * z[1], 6)
    m = 30
    c = rng.normal(size=(2, m)) + 1j * rng.normal(size=(2, m))
    ser = (c[0], c[1], 0.5 * z[0])
    return {"escape": esc, "orbit_jacobian": jac, "series_eval": ser}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    impls = kernels.implementations()
    if "cython" not in impls:
        print("compiled kernels not built; only the numpy fallback is available")
    work = cases(args.points, np.random.default_rng(0))
    print(f"{'kernel':<16}" + "".join(f"{k:>12}" for k in impls) + f"{'speedup':>10}")
    for name, call_args in work.items():
        times = {}
        for label, mod in impls.items():
            fn = getattr(mod, name)
            times[label] = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
        row = f"{name:<16}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times.values())
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
