"""Time the compiled and numpy kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py --sizes 256 1024 --repeat 5
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from fracsparse import kernels
from fracsparse.frac_ops import frac_kernel
from fracsparse.grid import Box


def cases(N: int, rng: np.random.Generator):
    K = frac_kernel(0.5, Box((0.0,), 1.0), N)
    krow = np.ascontiguousarray(K.krow)
    b, f = rng.normal(size=N), rng.normal(size=N)
    u = K.apply(f)
    sizes = [N >> k for k in range(1, 6) if N >> k >= 2]
    qlo = np.array([s * int(rng.integers(0, N // s)) for s in sizes], dtype=np.int64)
    qsz = np.array(sizes, dtype=np.int64)
    wlo, whi = np.maximum(qlo - qsz, 0), np.minimum(qlo + 2 * qsz, N)
    return {
        "toeplitz_apply": lambda m: m.toeplitz_apply(krow, f),
        "commutator_apply m=2": lambda m: m.commutator_apply(krow, b, f, 2),
        "window_apply": lambda m: m.window_apply(krow, f, 0, N // 2, N // 4, N),
        "truncated_max": lambda m: m.truncated_max(krow, f, u, qlo, qsz, wlo, whi),
    }


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    impls = kernels.backends()
    names = sorted(impls)
    print(f"active backend: {kernels.BACKEND}; timing {', '.join(names)} (best of {args.repeat}, ms)")
    print(f"{'kernel':<22}{'N':>6}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    rng = np.random.default_rng(args.seed)
    for N in args.sizes:
        for label, call in cases(N, rng).items():
            best = {}
            for name in names:
                mod = impls[name]
                t = timeit.Timer(lambda: call(mod))
                loops, _ = t.autorange()
                best[name] = min(t.repeat(args.repeat, loops)) / loops * 1e3
            row = f"{label:<22}{N:>6}" + "".join(f"{best[n]:>12.4f}" for n in names)
            if "cython" in best:
                row += f"{best['python'] / best['cython']:>11.1f}x"
            print(row)


if __name__ == "__main__":
    main()
