"""Time the solver's hot step kernel: numba @njit vs numpy/scipy fallback.

The production path is selected at import time by HJLAB_NUMBA; here both
implementations are imported directly and timed on the same workload (a
graded-mesh linearized-implicit step, the operation that dominates every
solver run).  Run:  python benchmarks/bench_kernels.py [n_nodes]
"""

import sys
import time

import numpy as np

from hjlab._kernels import (
    LEFT_DIRICHLET,
    _step_linearized_np,
    _step_linearized_py,
    USE_NUMBA,
)
from hjlab.grids import Grid
from hjlab.solver import SolverConfig, solve_truncated
from hjlab.grids import GridFunction
from hjlab.steady import make_params


def time_step_impls(n_nodes: int, reps: int = 2000):
    grid = Grid.graded(1.0, h_min=1e-5, ratio=0.97)
    if n_nodes > grid.n:
        grid = Grid.uniform(1.0, n_nodes)
    x = grid.nodes
    u = 0.5 * np.sin(np.pi * x / x[-1])
    du = np.gradient(u, x)
    g = np.abs(du) ** 3
    c = 3.0 * du**2
    impls = {"numpy/scipy": _step_linearized_np}
    if USE_NUMBA:
        try:
            from numba import njit
            fused = njit(cache=True)(_step_linearized_py)
            fused(x, u, g, c, 1e-6, LEFT_DIRICHLET, 0.0, 0.0)  # compile
            impls["numba@njit"] = fused
        except ImportError:
            pass
    else:
        impls["python-loop"] = _step_linearized_py
    print(f"step kernel on {x.size} nodes, {reps} repetitions")
    base = None
    for name, fn in impls.items():
        t0 = time.perf_counter()
        for _ in range(reps):
            out = fn(x, u, g, c, 1e-6, LEFT_DIRICHLET, 0.0, 0.0)
        dt = (time.perf_counter() - t0) / reps
        if base is None:
            base = dt
        print(f"  {name:12s} {dt * 1e6:10.2f} us/step   x{base / dt:5.2f}")
    return out


def time_full_run():
    params = make_params(3.0)
    grid = Grid.graded(1.0, h_min=1e-4, ratio=0.95)
    u0 = GridFunction(grid, 2.0 * np.sin(np.pi * grid.nodes))
    cfg = SolverConfig(params=params, grid=grid, dt_init=1e-6, adaptive=True,
                       rel_change_target=0.02, t_end=0.02)
    t0 = time.perf_counter()
    r = solve_truncated(u0, cfg, M=100.0)
    dt = time.perf_counter() - t0
    path = "numba" if USE_NUMBA else "numpy fallback"
    print(f"full truncated run ({path}): {r.info['steps']} steps in {dt:.3f}s")


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    time_step_impls(n)
    time_full_run()
