"""Hot numeric kernels: one linearized-implicit step on a nonuniform grid.

The time step solves the tridiagonal system

    (I - dt*A - dt*diag(c)*D) u_next = u + dt*(g - c * (D u))

where A is the second-order Laplacian on the (possibly graded) mesh, D the
centered gradient, g the frozen source and c its linearization; boundary
rows encode Dirichlet or reflected-Neumann conditions.  Steady states of
the semi-discrete problem are exact fixed points of the step.

Two implementations are kept in sync: a numba @njit fused
assemble-and-Thomas-solve loop, and a pure numpy/scipy fallback
(vectorized assembly + banded solve).  Selection is by the environment
flag HJLAB_NUMBA: unset/1/auto compiles with numba when available, 0
forces the fallback.  benchmarks/bench_kernels.py times the two paths
against each other.
"""

from __future__ import annotations

import os

import numpy as np

LEFT_DIRICHLET = 0
LEFT_NEUMANN = 1


def _numba_enabled() -> bool:
    flag = os.environ.get("HJLAB_NUMBA", "auto").strip().lower()
    if flag in ("0", "false", "no", "off"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _step_linearized_py(x, u, g, c, dt, left_kind, left_value, right_value):
    n = x.shape[0]
    sub = np.empty(n)
    dia = np.empty(n)
    sup = np.empty(n)
    rhs = np.empty(n)
    for i in range(1, n - 1):
        hm = x[i] - x[i - 1]
        hp = x[i + 1] - x[i]
        den = hm + hp
        a_im = 2.0 / (hm * den)
        a_ip = 2.0 / (hp * den)
        du = (u[i + 1] - u[i - 1]) / den
        sub[i] = -dt * a_im + dt * c[i] / den
        dia[i] = 1.0 + dt * (a_im + a_ip)
        sup[i] = -dt * a_ip - dt * c[i] / den
        rhs[i] = u[i] + dt * (g[i] - c[i] * du)
    if left_kind == LEFT_NEUMANN:
        h0 = x[1] - x[0]
        dia[0] = 1.0 + 2.0 * dt / (h0 * h0)
        sup[0] = -2.0 * dt / (h0 * h0)
        rhs[0] = u[0]
    else:
        dia[0] = 1.0
        sup[0] = 0.0
        rhs[0] = left_value
    sub[0] = 0.0
    dia[n - 1] = 1.0
    sub[n - 1] = 0.0
    sup[n - 1] = 0.0
    rhs[n - 1] = right_value
    # Thomas sweep
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = sup[0] / dia[0]
    dp[0] = rhs[0] / dia[0]
    for i in range(1, n):
        m = dia[i] - sub[i] * cp[i - 1]
        cp[i] = sup[i] / m
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m
    out = np.empty(n)
    out[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        out[i] = dp[i] - cp[i] * out[i + 1]
    return out


def _step_linearized_np(x, u, g, c, dt, left_kind, left_value, right_value):
    from scipy.linalg import solve_banded

    n = x.shape[0]
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    den = hm + hp
    a_im = 2.0 / (hm * den)
    a_ip = 2.0 / (hp * den)
    du = (u[2:] - u[:-2]) / den
    ci = c[1:-1]
    sub = np.zeros(n)
    dia = np.ones(n)
    sup = np.zeros(n)
    rhs = np.empty(n)
    sub[1:-1] = -dt * a_im + dt * ci / den
    dia[1:-1] = 1.0 + dt * (a_im + a_ip)
    sup[1:-1] = -dt * a_ip - dt * ci / den
    rhs[1:-1] = u[1:-1] + dt * (g[1:-1] - ci * du)
    if left_kind == LEFT_NEUMANN:
        h0 = x[1] - x[0]
        dia[0] = 1.0 + 2.0 * dt / (h0 * h0)
        sup[0] = -2.0 * dt / (h0 * h0)
        rhs[0] = u[0]
    else:
        rhs[0] = left_value
    rhs[-1] = right_value
    ab = np.zeros((3, n))
    ab[0, 1:] = sup[:-1]
    ab[1, :] = dia
    ab[2, :-1] = sub[1:]
    return solve_banded((1, 1), ab, rhs)


def _explicit_step_py(x, u, g, dt, left_kind, left_value, right_value):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(1, n - 1):
        hm = x[i] - x[i - 1]
        hp = x[i + 1] - x[i]
        den = hm + hp
        lap = 2.0 * ((u[i + 1] - u[i]) / hp - (u[i] - u[i - 1]) / hm) / den
        out[i] = u[i] + dt * (lap + g[i])
    if left_kind == LEFT_NEUMANN:
        h0 = x[1] - x[0]
        out[0] = u[0] + dt * 2.0 * (u[1] - u[0]) / (h0 * h0)
    else:
        out[0] = left_value
    out[n - 1] = right_value
    return out


def _explicit_step_np(x, u, g, dt, left_kind, left_value, right_value):
    n = x.shape[0]
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    den = hm + hp
    lap = 2.0 * ((u[2:] - u[1:-1]) / hp - (u[1:-1] - u[:-2]) / hm) / den
    out = np.empty(n)
    out[1:-1] = u[1:-1] + dt * (lap + g[1:-1])
    if left_kind == LEFT_NEUMANN:
        h0 = x[1] - x[0]
        out[0] = u[0] + dt * 2.0 * (u[1] - u[0]) / (h0 * h0)
    else:
        out[0] = left_value
    out[-1] = right_value
    return out


USE_NUMBA = _numba_enabled()

if USE_NUMBA:
    from numba import njit

    step_linearized = njit(cache=True)(_step_linearized_py)
    explicit_step = njit(cache=True)(_explicit_step_py)
else:
    step_linearized = _step_linearized_np
    explicit_step = _explicit_step_np
