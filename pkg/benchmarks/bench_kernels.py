"""Time the numba and numpy variants of the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The grid kernel is run on a table shaped like one pool of the default search
(100 b x 50 tau x 12 budgets, 100 a x 5 d); the RK4 kernel on a step sequence
the size of a 50-epoch single-pool integration at step_fraction 1e-3.
"""

import argparse
import time

import numpy as np

from filterscale import kernels
from filterscale._backend import HAVE_NUMBA


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def grid_case(rng):
    E = rng.uniform(0.05, 1.5, size=(100, 50, 12))
    y = rng.uniform(0.1, 0.9, size=12)
    return E, y, np.linspace(0.001, 1.0, 100), np.array([0.01, 0.02, 0.05, 0.1, 0.2])


def rk4_case(rng, steps=60_000):
    beta = -rng.uniform(0.005, 0.5, size=steps)
    h = rng.uniform(1e-4, 2e-3, size=steps)
    return 0.5, beta, h


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    rng = np.random.default_rng(args.seed)

    cases = [("grid_losses", grid_case(rng), kernels.grid_losses_numpy,
              kernels.grid_losses_numba if HAVE_NUMBA else None),
             ("rk4_product", rk4_case(rng), kernels.rk4_product_numpy,
              kernels.rk4_product_numba if HAVE_NUMBA else None)]

    print(f"{'kernel':<14}{'numpy':>12}{'numba':>12}{'speedup':>10}  agree")
    for name, case, np_fn, nb_fn in cases:
        t_np, out_np = best_of(np_fn, case, args.repeat)
        if nb_fn is None:
            print(f"{name:<14}{t_np * 1e3:>10.2f}ms{'-':>12}{'-':>10}  -")
            continue
        t0 = time.perf_counter()
        nb_fn(*case)  # compile (or load from cache)
        warm = time.perf_counter() - t0
        t_nb, out_nb = best_of(nb_fn, case, args.repeat)
        if isinstance(out_np, tuple):
            agree = all(np.allclose(x, y, rtol=1e-12) for x, y in zip(out_np, out_nb))
        else:
            agree = np.allclose(out_np, out_nb, rtol=1e-12)
        print(f"{name:<14}{t_np * 1e3:>10.2f}ms{t_nb * 1e3:>10.2f}ms{t_np / t_nb:>9.1f}x  {agree}"
              f"   (first call {warm:.2f}s)")


if __name__ == "__main__":
    main()
