"""Benchmark the compiled march kernel against the numpy fallback.

The kernel is the solver's hot loop: density extraction + one RK4 step of
the truncated birth-death chain, repeated tens of thousands of times inside
each bisection iteration.  Run with:

    python benchmarks/bench_march.py
"""

import time

import numpy as np

from arrivalq import backend
from arrivalq._march_py import march as march_pure
from arrivalq.params import ModelParams, SolverConfig


def once(fn, *args, **kwargs):
    start = time.perf_counter()
    out = fn(*args, **kwargs)
    return time.perf_counter() - start, out


def bench_kernel():
    try:
        from arrivalq import _march
    except ImportError:
        print("compiled kernel not built; run `python setup.py build_ext --inplace`")
        return

    cases = [
        ("lam=5  mu=1   te1=4.25 dt=2e-3", (np.eye(1, 21)[0], -4.25, 0.002, 50.0,
                                            5.0, 1.0, 1.0, 1.0, 1.0)),
        ("lam=3  mu=0.3 te1=14.4 dt=1e-3", (np.eye(1, 15)[0], -14.4, 0.001, 60.0,
                                            3.0, 0.3, 1.0, 0.5, 1.0)),
        ("lam=10 mu=1   te1=6.5  dt=1e-3", (np.eye(1, 30)[0], -6.5, 0.001, 60.0,
                                            10.0, 1.0, 1.0, 1.0, 1.0)),
    ]
    print(f"{'case':38s} {'compiled':>10s} {'pure':>10s} {'speedup':>8s}")
    for name, args in cases:
        reps = 5
        tc = min(once(_march.march, *args)[0] for _ in range(reps))
        tp = min(once(march_pure, *args)[0] for _ in range(reps))
        print(f"{name:38s} {tc * 1e3:8.2f}ms {tp * 1e3:8.2f}ms {tp / tc:7.1f}x")


def bench_solver():
    from arrivalq.equilibrium import solve_unconstrained

    params = ModelParams.stochastic(5, 1, 1, 1, 1)
    cfg = SolverConfig(epsilon=1e-3, nmax_tail_prob=1e-6)
    t, sol = once(solve_unconstrained, params, cfg)
    print(f"\nfull solve ({backend.BACKEND} backend): {t * 1e3:.1f} ms "
          f"(te1={sol.te1:.4f}, te2={sol.te2:.4f})")
    print("set ARRIVALQ_BACKEND=pure and re-run to time the fallback end to end")


if __name__ == "__main__":
    print(f"active backend: {backend.BACKEND}\n")
    bench_kernel()
    bench_solver()
