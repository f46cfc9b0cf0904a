"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per (kernel, size) with the best time of each backend and
the speed-up.  Results are checked for agreement before timing.
"""
import argparse
import timeit

import numpy as np

from kalmanflow import _backend


def cases(rng):
    for k in (2, 4, 8, 16):
        M = rng.uniform(-1, 1, (k, k))
        yield f"expm k={k}", "expm", (M,), 200
    for n, m, N, S in ((2, 1, 2000, 4), (4, 2, 2000, 8), (8, 3, 500, 16)):
        A, B = rng.uniform(-1, 1, (n, n)), rng.uniform(-1, 1, (n, m))
        dur = rng.dirichlet(np.ones(S), size=N)
        ctl = rng.uniform(-1, 1, (N, S, m))
        yield f"propagate_batch n={n} m={m} N={N} S={S}", "propagate_batch", (A, B, np.zeros(n), dur, ctl), 1


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    names = _backend.available()
    mods = {name: _backend.load(name) for name in names}
    if "cython" not in mods:
        print("compiled kernels not built; only the numpy fallback is available")
    rng = np.random.default_rng(0)
    print(f"{'case':44s} " + " ".join(f"{n + ' [ms]':>14s}" for n in names) + "   speed-up")
    for label, fn, fargs, number in cases(rng):
        ref = getattr(mods["python"], fn)(*fargs)
        times = {}
        for name, mod in mods.items():
            out = getattr(mod, fn)(*fargs)
            assert np.allclose(out, ref, rtol=1e-12, atol=1e-13), f"{name} disagrees on {label}"
            t = min(timeit.repeat(lambda: getattr(mod, fn)(*fargs), number=number, repeat=args.repeat))
            times[name] = 1e3 * t / number
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:44s} " + " ".join(f"{times[n]:14.4f}" for n in names) + f"   {speed:7.1f}x")


if __name__ == "__main__":
    main()
