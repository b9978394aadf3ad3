"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 16384] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from mfstream import _pykernels, traffic
from mfstream.analysis import QGrid, ScalePlan, _fit_basis, mfdfa

try:
    from mfstream import _kernels
except ImportError:
    _kernels = None


def bench(label, fn, repeat):
    fn()  # warm caches and BLAS before timing
    best = min(timeit.repeat(fn, number=1, repeat=repeat))
    print(f"  {label:<10} {best * 1e3:9.2f} ms")
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--n", type=int, default=2**14)
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args()

    x = traffic.gen_cascade(int(np.log2(args.n)), 1.0, 0).values
    profile = np.cumsum(x - x.mean())
    plan = ScalePlan.default(args.n)
    impls = [("python", _pykernels)] + ([("cython", _kernels)] if _kernels is not None else [])
    if _kernels is None:
        print("compiled kernels not built; timing the fallback only")

    print(f"segment variances, all {len(plan.scales)} scales, n={args.n}, order 2")
    times = {}
    for name, mod in impls:
        times[name] = bench(
            name,
            lambda mod=mod: [mod.segment_variances(profile, s, _fit_basis(s, 2)) for s in plan.scales],
            args.repeat,
        )

    print(f"ar1 recursion, n={args.n}")
    z = np.random.default_rng(0).standard_normal(args.n)
    for name, mod in impls:
        bench(name, lambda mod=mod: mod.ar1_filter(z, 0.7, 1.0), args.repeat)

    print("q moments, 41 exponents over every scale's segments")
    log_f2 = [np.log(_pykernels.segment_variances(profile, s, _fit_basis(s, 2))) for s in plan.scales]
    exps = 0.5 * np.array(QGrid.full().values)
    for name, mod in impls:
        bench(name, lambda mod=mod: [mod.log_mean_power(lf, exps, float(lf.size)) for lf in log_f2], args.repeat)

    print(f"full mfdfa, 41 q values, n={args.n} (active backend)")
    bench("mfdfa", lambda: mfdfa(x, QGrid.full(), plan), args.repeat)

    if "cython" in times:
        print(f"segment-variance speedup: {times['python'] / times['cython']:.2f}x")


if __name__ == "__main__":
    main()
