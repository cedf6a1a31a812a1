"""Time the numba kernels against their numpy twins.

    python benchmarks/bench_kernels.py [--n 8 12 16] [--repeat 5]

Each line reports the best-of-``repeat`` wall time of both flavours, the
speed-up, and the largest relative difference between their outputs.
"""
import argparse
import time

import numpy as np

from qwalk import kernels as K
from qwalk.dynamics import chebyshev_coefficients
from qwalk.problems import generate


def best_time(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def cases(n):
    rng = np.random.default_rng(n)
    dim = 1 << n
    inst = generate("SK", n, 1)
    energies = inst.energies.copy()
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    gamma = inst.spread() / (2 * n)
    lo, hi = energies.min(), energies.max() + 2 * n * gamma
    center, radius = 0.5 * (lo + hi), 0.5 * (hi - lo)
    coeffs = chebyshev_coefficients(center, radius, 0.1 / radius, 1e-13)
    scratch = lambda: [np.empty(dim, complex) for _ in range(4)]
    weights = rng.random(dim)

    def hyper(f):
        return lambda: f(v, n, gamma, np.empty(dim, complex))

    def table(f):
        return lambda: f(inst.couplings, inst.fields, n, np.empty(dim))

    def cheb(f):
        def run():
            out, t0, t1, t2 = scratch()
            return f(v, energies, n, gamma, center, radius, coeffs, out, t0, t1, t2)
        return run

    m = min(dim, 2048)

    def pair(f):
        return lambda: np.array([f(energies[:m], weights[:m], 3.0, 2.0)])

    yield "hypercube_apply", hyper(K.hypercube_apply_nb), hyper(K.hypercube_apply_np)
    yield "sk_energy_table", table(K.sk_energy_table_nb), table(K.sk_energy_table_np)
    yield "chebyshev_step", cheb(K.chebyshev_hypercube_nb), cheb(K.chebyshev_hypercube_np)
    yield f"window_pair_sum[{m}]", pair(K.window_pair_sum_nb), pair(K.window_pair_sum_np)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[8, 12, 16])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    print(f"{'kernel':<24}{'n':>4}{'numba [s]':>14}{'numpy [s]':>14}{'speed-up':>10}{'max rel diff':>14}")
    for n in args.n:
        for name, fast, slow in cases(n):
            a, b = np.asarray(fast()), np.asarray(slow())
            diff = float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))
            t_fast, t_slow = best_time(fast, args.repeat), best_time(slow, args.repeat)
            print(f"{name:<24}{n:>4}{t_fast:>14.3e}{t_slow:>14.3e}{t_slow / t_fast:>10.1f}{diff:>14.1e}")


if __name__ == "__main__":
    main()
