"""Compare the compiled and numpy pair-scoring kernels.

    python benchmarks/bench_kernels.py [--pairs N] [--dim D] [--repeat R]
"""
import argparse
import timeit

import numpy as np

from spkback import _pykernels, kernels


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=1_000_000)
    ap.add_argument("--dim", type=int, default=256)
    ap.add_argument("--rows", type=int, default=5000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    U = rng.standard_normal((args.rows, args.dim))
    i = rng.integers(0, args.rows, args.pairs).astype(np.int64)
    j = rng.integers(0, args.rows, args.pairs).astype(np.int64)
    psi = rng.uniform(0.1, 10, args.dim)
    c = -np.log(2 * psi + 1) + 2 * np.log1p(psi)
    m = psi / ((2 * psi + 1) * (psi + 1))
    out = np.empty(args.pairs)

    print(f"compiled backend available: {kernels.BACKEND == 'cython'}")
    print(f"{args.pairs} pairs, dim {args.dim}, best of {args.repeat}")
    impls = {"numpy": _pykernels}
    if kernels.BACKEND == "cython":
        from spkback import _ckernels
        impls["cython"] = _ckernels
    for name, call in (("llr_pairs", lambda k: k.llr_pairs(U, U, i, j, psi, c, m, out)),
                       ("dot_pairs", lambda k: k.dot_pairs(U, U, i, j, out))):
        times = {}
        for impl, mod in impls.items():
            times[impl] = min(timeit.repeat(lambda: call(mod), number=1, repeat=args.repeat))
        line = "  ".join(f"{k}={v * 1e3:8.1f} ms" for k, v in times.items())
        if "cython" in times:
            line += f"  speedup={times['numpy'] / times['cython']:.1f}x"
        print(f"{name:10s} {line}")


if __name__ == "__main__":
    main()
