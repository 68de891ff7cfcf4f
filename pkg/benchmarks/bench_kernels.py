"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best wall time of each backend, the
speedup and the max abs difference between their outputs.
"""
import argparse
import timeit

import numpy as np

from latentwave import kernels


def leapfrog_case(rng, nx=64, ny=32, nsteps=400):
    coef = np.full((nx, ny), 0.25)
    damp = np.zeros((nx, ny))
    damp[:6], damp[-6:], damp[:, :6], damp[:, -6:] = 0.2, 0.2, 0.2, 0.2
    inj_ix = rng.integers(8, nx - 8, 9)
    inj_iy = rng.integers(8, ny - 8, 9)
    t = np.arange(nsteps) * 0.01
    wave = np.exp(-((t - 0.5) / 0.1) ** 2)[None]
    return kernels._prep_leapfrog(coef, damp, inj_ix, inj_iy, np.zeros(9, int), np.ones(9), wave,
                                  np.arange(8, nx - 8, 2), np.arange(8, ny - 8, 2))


def ncc_case(rng, P=512, C=2, T=96, K=24):
    return (np.ascontiguousarray(rng.standard_normal((P, C, T))),
            np.ascontiguousarray(rng.standard_normal((C, T))), K)


def best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels._compiled is None:
        raise SystemExit("compiled extension not available; build with `pip install -e . --no-build-isolation`")
    rng = np.random.default_rng(0)
    cases = [("leapfrog_record", leapfrog_case(rng), kernels.py_leapfrog_record,
              kernels._compiled.leapfrog_record),
             ("ncc_scan", ncc_case(rng), kernels.py_ncc_scan, kernels._compiled.ncc_scan)]
    print(f"{'kernel':<16} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8} {'max |diff|':>11}")
    for name, case, py, cy in cases:
        diff = np.max(np.abs(py(*case) - cy(*case)))
        tp, tc = best(py, case, args.repeat), best(cy, case, args.repeat)
        print(f"{name:<16} {tp:>11.4f} {tc:>11.4f} {tp / tc:>7.1f}x {diff:>11.2e}")


if __name__ == "__main__":
    main()
