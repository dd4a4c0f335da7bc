"""Time the numba kernels against their NumPy fallbacks, then SL against EM.

    python benchmarks/bench_backends.py [--n 100000] [--repeat 5]

The first section calls both kernel variants directly in one process.  The
second runs one SL and one EM-random cell per repetition with whichever
backend SPECTRALHMM_NUMBA selects.
"""

import argparse
import statistics
import time

import numpy as np

from spectralhmm import kernels
from spectralhmm.bench import BenchmarkConfig, run_cell
from spectralhmm.systems import get_example


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(model, n, rng):
    cum_T = kernels.cumulative_columns(model.T)
    cum_O = kernels.cumulative_columns(model.O)
    u = rng.random(n)
    states = rng.integers(0, model.X, n)
    obs = rng.integers(0, model.Y, n)
    T, O, pi = (np.ascontiguousarray(a) for a in (model.T, model.O, model.pi0))
    alpha, beta, c, _ = kernels.forward_backward_numba(T, O, pi, obs)
    return {
        "markov_states": lambda impl: impl(cum_T, 0, u),
        "emit_symbols": lambda impl: impl(cum_O, states, u),
        "count_triplets": lambda impl: impl(obs[:-2], obs[1:-1], obs[2:], model.Y),
        "forward_backward": lambda impl: impl(T, O, pi, obs),
        "accumulate_counts": lambda impl: impl(T, O, obs, alpha, beta, c),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=10**5)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--example", default="low-a")
    args = ap.parse_args()

    model = get_example(args.example).model
    rng = np.random.default_rng(0)
    if kernels.HAVE_NUMBA:
        print(f"kernels, n={args.n} (best of {args.repeat})")
        print(f"{'kernel':<20}{'numba':>12}{'numpy':>12}{'speedup':>10}")
        for name, call in kernel_cases(model, args.n, rng).items():
            nb = getattr(kernels, f"{name}_numba")
            py = getattr(kernels, f"{name}_numpy")
            call(nb)  # compile
            t_nb = best_of(lambda: call(nb), args.repeat)
            t_py = best_of(lambda: call(py), args.repeat)
            print(f"{name:<20}{t_nb * 1e3:>10.2f}ms{t_py * 1e3:>10.2f}ms{t_py / t_nb:>9.1f}x")
    else:
        print("numba not installed, skipping kernel comparison")

    print(f"\nSL vs EM-random on {args.example}, N={args.n} triplets, backend={kernels.BACKEND}")
    run_cell(BenchmarkConfig([args.example], [1000], 1, ("SL", "EM-random"), em_max_iter=2), args.example, 1000, 0)
    cfg = BenchmarkConfig([args.example], [args.n], args.repeat, ("SL", "EM-random"))
    sl, em, iters = [], [], []
    for rep in range(args.repeat):
        r_sl, r_em = run_cell(cfg, args.example, args.n, rep)
        sl.append(r_sl.runtime_s)
        em.append(r_em.runtime_s)
        iters.append(r_em.em_iterations)
    print(f"SL median {statistics.median(sl) * 1e3:.2f} ms")
    print(f"EM median {statistics.median(em):.3f} s, iterations {iters}")
    print(f"ratio {statistics.median(em) / statistics.median(sl):.0f}")


if __name__ == "__main__":
    main()
