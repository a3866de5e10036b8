"""Benchmark: compiled kernels vs the pure-Python fallback.

Times the scalar value solve, the batched risk-tolerance sweep that the
budget integrator hammers, and a full semi-analytic equilibrium path with
each implementation.  Run from the repository root:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from gdaport._kernels import _pure

try:
    from gdaport._kernels import _core
except ImportError:
    _core = None

from gdaport.crra import CrraSpec, equilibrium_path
from gdaport.market import MarketModel
import gdaport.crra as crra_module

SPEC = (1.0, 0.5, 0.9)
XS = np.linspace(1e-4, 1.2, 20000)


def time_it(fn, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_impl(impl, label):
    rho, beta, delta = SPEC
    t_scalar = time_it(
        lambda: [impl.crra_log_benchmark(rho, beta, delta, x) for x in XS[:2000]]
    )
    t_sweep = time_it(lambda: impl.crra_risk_tolerance_many(rho, beta, delta, XS))
    # route the whole semi-analytic pipeline through this implementation
    saved = crra_module.kernels
    crra_module.kernels = impl
    try:
        market = MarketModel.constant(0.06, 0.3, 3.0)
        t_path = time_it(
            lambda: equilibrium_path(CrraSpec(rho, beta, delta), market), repeats=1
        )
    finally:
        crra_module.kernels = saved
    print(
        f"{label:>10}: value solve {t_scalar * 1e3 / 2000 * 1e3:8.2f} us/call | "
        f"tolerance sweep ({XS.size} pts) {t_sweep * 1e3:8.1f} ms | "
        f"equilibrium path {t_path:6.2f} s"
    )
    return t_scalar, t_sweep, t_path


def main():
    print(f"benchmarking CRRA kernels, spec (rho, beta, delta) = {SPEC}")
    pure = bench_impl(_pure, "pure")
    if _core is None:
        print("  compiled extension not built; set it up with pip install -e .")
        return
    fast = bench_impl(_core, "compiled")
    print(
        "  speedups: "
        f"value solve x{pure[0] / fast[0]:.1f}, "
        f"sweep x{pure[1] / fast[1]:.1f}, "
        f"path x{pure[2] / fast[2]:.1f}"
    )


if __name__ == "__main__":
    main()
