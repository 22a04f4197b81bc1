"""Wall-clock comparison of the numba kernels against the numpy fallbacks.

Run ``python3 benchmarks/bench_kernels.py [--repeat R]``. Each row times one
workload under both backends after a warm-up call (so JIT compilation is not
counted) and checks that both produce the same result.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from arw import exact
from arw._accel import HAS_NUMBA, use_backend
from arw.dynamics import ArwKernel, even_configuration, make_rng, simulate
from arw.graph import complete_graph, grid_graph
from arw.states import StateSpace
from arw.zchain import ZChainParams, simulate_z_occupancy


def _arw(beta, steps):
    g = grid_graph(8, 8)
    kernel = ArwKernel(g, 320, beta)
    x0 = even_configuration(g.k, 320)
    return lambda: simulate(kernel, x0, steps, make_rng(0), stride=1000).final


def _zchain(steps):
    params = ZChainParams.from_model(14, 40.0, 1.0 / 42, 4, 320)
    return lambda: int(simulate_z_occupancy(params, 320, steps, make_rng(0), stride=steps)[-1])


def _cheeger():
    kernel = ArwKernel(complete_graph(2), 19, 1.0, lazy=True)
    space = StateSpace(2, 19)
    M = exact.build_matrix(kernel, space)
    pi = exact.stationary(M)
    return lambda: round(exact.cheeger_constant(M, pi)[0], 12)


WORKLOADS = {
    "arw grid8x8 n=320 beta=0, 2e5 steps": lambda: _arw(0.0, 200_000),
    "arw grid8x8 n=320 beta=-inf, 2e5 steps": lambda: _arw(-np.inf, 200_000),
    "zchain D=14 n=320, 2e5 steps": lambda: _zchain(200_000),
    "cheeger K2 n=19 (|Omega|=20)": _cheeger,
}


def _time(fn, repeat):
    best = np.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = ["numba", "numpy"] if HAS_NUMBA else ["numpy"]
    print(f"{'workload':45s} " + " ".join(f"{b:>10s}" for b in backends) + "   speedup  same")
    for name, make in WORKLOADS.items():
        fn = make()
        times, results = [], []
        for b in backends:
            with use_backend(b):
                fn()  # warm-up / compile
                t, r = _time(fn, args.repeat)
            times.append(t)
            results.append(r)
        speed = times[-1] / times[0] if len(times) == 2 else 1.0
        same = all(r == results[0] for r in results)
        print(f"{name:45s} " + " ".join(f"{t:9.4f}s" for t in times) + f"  {speed:7.1f}x  {same}")


if __name__ == "__main__":
    main()
