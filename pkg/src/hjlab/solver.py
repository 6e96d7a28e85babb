"""Finite-difference solvers for u_t = u_xx + |u_x|^p and its singular form.

Three front ends share one stepping loop:

* solve_classical -- Dirichlet problem for smooth data; stops at t_end or
  when the boundary gradient exceeds a configured threshold (GBU flag).
* solve_truncated -- nonlinearity replaced by f_M(s) = min(|s|, M)^p, so
  runs are global in time and increase monotonically with M toward the
  viscosity solution.
* solve_singular -- the shifted problem for z = u - U with regularization
  U -> U_a:  z_t = z_xx + |U_a' + z_x|^p - |U_a'|^p, Neumann z_x(0) = 0,
  z(R) fixed.  The reconstructed u = z + U keeps the gradient singularity
  at x = 0 and z(0, t) reads off the boundary value directly.

Spatial discretization is second-order centered on a (graded) mesh, the
gradient source is evaluated centered (it acts as a source, not
advection).  Time stepping treats diffusion implicitly; the source is
taken through one linearized-implicit sweep (a single Newton step of
implicit Euler) rather than fully explicitly: near the singular regimes
the source Lipschitz constant reaches ~p M^{p-1} ~ 1e8 and an explicit
treatment would force dt below 1e-12, while the linearized solve stays
tridiagonal and keeps discrete steady states exact fixed points.  A fully
explicit mode remains available for small cross-check runs.

The wall gradient is reported two ways: m_raw = first-cell one-sided
difference, and m_bubble = slope U'(a) of the regular steady profile
fitted through the first cell (invert U_a(h) = u(h) - u(0) for a).  The
one-sided difference saturates at ~ (2 h / (p-1))^{-1/(p-1)} once the
quasi-steady profile bends inside the first cell, so the bubble-calibrated
value is the one that can track the GBU window; both are stored.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .grids import Grid, GridFunction
from .spectral import WeightedSpace, eigenpoly
from .steady import ModelParams, steady_U, steady_U_a, steady_U_a_prime
from .zeros import zero_positions


@dataclass(frozen=True)
class SolverConfig:
    params: ModelParams
    grid: Grid
    mode: str = "imex"               # "imex" | "explicit"
    dt_init: float = 1e-6
    dt_safety: float = 0.5           # explicit-mode CFL fraction
    adaptive: bool = True
    rel_change_target: float = 0.02  # per-step relative motion of the monitor
    dt_min: float = 1e-15
    dt_max: float = math.inf
    newton_sweeps: int = 1
    t_end: float | None = None
    gradient_threshold: float | None = None
    max_steps: int = 2_000_000
    snapshot_times: tuple = ()
    snapshot_factor: float | None = None  # also snapshot when monitor moves by this factor
    stop_on_vanish_below: float | None = None
    vanish_check_every: int = 20
    vanish_capture: float | None = None   # arm the annihilation stop below this
    stop_after_crossing: float | None = None  # singular runs: stop once z(0) < -this

    def with_(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass
class SolveResult:
    snapshots: list
    t: np.ndarray                 # trace times
    boundary: np.ndarray          # u(0,t) (Dirichlet runs) or z(0,t) (singular)
    m_raw: np.ndarray             # one-sided wall gradient
    m_bubble: np.ndarray          # steady-profile-calibrated wall gradient
    events: list
    final: GridFunction
    kind: str
    config: SolverConfig
    info: dict = field(default_factory=dict)

    def snapshot_nearest(self, t: float) -> GridFunction:
        return min(self.snapshots, key=lambda s: abs(s.t - t))


class NumericalFailure(RuntimeError):
    """Non-finite values or step-size collapse; carries diagnostics."""


def _m_bubble(params: ModelParams, h1: float, du: float) -> float:
    """Wall gradient via the quasi-steady profile through the first cell.

    Solves U_a(h1) = du for the shift a and reports U'(a); falls back to
    the raw slope when du is not below the steady increment U(h1).
    """
    if du <= 0:
        return 0.0
    cap = steady_U(params, h1)
    if du >= cap * (1.0 - 1e-12):
        return float("inf")

    def f(log_a):
        return steady_U_a(params, math.exp(log_a), h1) - du

    lo, hi = math.log(1e-30), math.log(1e12)
    try:
        root = brentq(f, lo, hi, xtol=1e-13)
    except ValueError:
        return du / h1
    return steady_U_a_prime(params, math.exp(root), 0.0)


def _raw_slope(x, u) -> float:
    return (u[1] - u[0]) / (x[1] - x[0])


def _source_power(params: ModelParams, du: np.ndarray, M: float | None):
    """g = f_M(du) and its linearization c = f_M'(du)."""
    p = params.p
    a = np.abs(du)
    if M is None:
        g = a**p
        c = p * a ** (p - 2.0) * du
    else:
        am = np.minimum(a, M)
        g = am**p
        c = np.where(a < M, p * a ** (p - 2.0) * du, 0.0)
    return g, c


def _source_shifted(params: ModelParams, du: np.ndarray, V: np.ndarray):
    """g = |V + z_x|^p - V^p and linearization for the singular solver."""
    p = params.p
    w = V + du
    aw = np.abs(w)
    g = aw**p - V**p
    c = p * aw ** (p - 2.0) * w
    return g, c


def _centered_gradient(x, u):
    du = np.empty_like(u)
    du[1:-1] = (u[2:] - u[:-2]) / (x[2:] - x[:-2])
    du[0] = (u[1] - u[0]) / (x[1] - x[0])
    du[-1] = (u[-1] - u[-2]) / (x[-1] - x[-2])
    return du


def _run(u0: GridFunction, cfg: SolverConfig, kind: str,
         M: float | None = None, a_shift: float | None = None) -> SolveResult:
    params = cfg.params
    x = cfg.grid.nodes
    u = np.array(u0.values, dtype=float)
    t = float(u0.t)
    singular = kind == "singular"
    left_kind = _kernels.LEFT_NEUMANN if singular else _kernels.LEFT_DIRICHLET
    left_value = 0.0 if not singular else u[0]
    right_value = float(u[-1])
    V = steady_U_a_prime(params, a_shift, x) if singular else None
    U_ref = steady_U(params, x)
    h1 = x[1] - x[0]

    if cfg.mode == "explicit":
        h2min = float(np.min(np.diff(x)) ** 2)
        dt_stable = cfg.dt_safety * 0.5 * h2min
        if not cfg.adaptive and cfg.dt_init > dt_stable:
            raise NumericalFailure(
                f"explicit diffusion CFL violated: dt={cfg.dt_init} > {dt_stable}")
        dt = min(cfg.dt_init, dt_stable)
    else:
        dt = cfg.dt_init
    dt = min(dt, cfg.dt_max)

    traces = {"t": [], "boundary": [], "m_raw": [], "m_bubble": []}
    events = []
    snapshots = [GridFunction(cfg.grid, u.copy(), t=t)]
    pending = sorted(tt for tt in cfg.snapshot_times if tt > t)
    monitor_at_snapshot = None
    crossing_seen = False
    boundary0 = abs(u[0]) if singular else None
    prev_low = None
    vanish_capture = None

    def record():
        traces["t"].append(t)
        if singular:
            traces["boundary"].append(u[0])
            mr = _raw_slope(x, u + U_ref)
            traces["m_raw"].append(mr)
            traces["m_bubble"].append(mr)
        else:
            # two-innermost-node extrapolation of the boundary value; the
            # Dirichlet-truncated approximation carries a boundary layer,
            # so the singular solver is the instrument for boundary values
            extrap = u[1] - x[1] * (u[2] - u[1]) / (x[2] - x[1])
            traces["boundary"].append(extrap)
            traces["m_raw"].append(_raw_slope(x, u))
            traces["m_bubble"].append(_m_bubble(params, h1, u[1] - u[0]))

    def monitor_value():
        if singular:
            return abs(u[0])
        return max(traces["m_raw"][-1] if traces["m_raw"] else _raw_slope(x, u), 1e-300)

    record()
    monitor_at_snapshot = monitor_value()
    steps = 0
    while True:
        if cfg.t_end is not None and t >= cfg.t_end - 1e-18:
            events.append({"type": "t_end", "t": t})
            break
        if steps >= cfg.max_steps:
            events.append({"type": "max_steps", "t": t})
            break
        if cfg.t_end is not None:
            dt = min(dt, cfg.t_end - t)

        u_old = u
        for attempt in range(8):
            u_new = _one_step(x, u_old, dt, params, M, V, cfg, left_kind,
                              left_value, right_value, singular)
            if not np.all(np.isfinite(u_new)):
                dt *= 0.25
                if dt < cfg.dt_min:
                    raise NumericalFailure(
                        f"non-finite state at t={t}, dt collapsed below {cfg.dt_min}")
                continue
            rel = _relative_motion(u_old, u_new, singular, boundary0)
            if cfg.adaptive and rel > 4.0 * cfg.rel_change_target and dt > cfg.dt_min:
                dt = max(dt * 0.3, cfg.dt_min)
                continue
            break
        else:
            raise NumericalFailure(f"step rejected 8 times at t={t}")

        u = u_new
        dt_used = dt
        t += dt_used
        steps += 1
        record()

        if cfg.adaptive:
            scale = cfg.rel_change_target / max(rel, 1e-12)
            dt = float(np.clip(dt * min(max(scale, 0.3), 1.4), cfg.dt_min, cfg.dt_max))
            if cfg.mode == "explicit":
                dt = min(dt, cfg.dt_safety * 0.5 * float(np.min(np.diff(x)) ** 2))

        while pending and t >= pending[0]:
            t_req = pending.pop(0)
            frac = (t_req - (t - dt_used)) / dt_used
            u_req = u_old + frac * (u - u_old)
            snapshots.append(GridFunction(cfg.grid, u_req, t=t_req))
        if cfg.snapshot_factor is not None:
            mv = monitor_value()
            if mv > 0 and monitor_at_snapshot > 0:
                moved = max(mv / monitor_at_snapshot, monitor_at_snapshot / mv)
                if moved >= cfg.snapshot_factor:
                    snapshots.append(GridFunction(cfg.grid, u.copy(), t=t))
                    monitor_at_snapshot = mv

        if cfg.gradient_threshold is not None and traces["m_bubble"][-1] >= cfg.gradient_threshold:
            events.append({"type": "gbu_flag", "t": t,
                           "m_raw": traces["m_raw"][-1],
                           "m_bubble": traces["m_bubble"][-1]})
            break
        if singular and not crossing_seen and u[0] <= 0.0:
            crossing_seen = True
            events.append({"type": "boundary_crossing", "t": t})
        if singular and cfg.stop_after_crossing is not None and crossing_seen:
            if u[0] <= -cfg.stop_after_crossing * boundary0:
                events.append({"type": "post_crossing_stop", "t": t})
                break
        if cfg.stop_on_vanish_below is not None and steps % cfg.vanish_check_every == 0:
            diff = u if singular else u - U_ref  # z is already u - U
            zs = zero_positions(GridFunction(cfg.grid, diff, t=t), tol=0.0)
            # zeros inside the wall-noise band are regularization artifacts
            noise_floor = 4.0 * cfg.stop_on_vanish_below
            structure = zs[zs > noise_floor]
            low = float(structure[0]) if structure.size else None
            if vanish_capture is None and low is not None:
                vanish_capture = (cfg.vanish_capture if cfg.vanish_capture is not None
                                  else 0.12 * low)
            if low is not None and prev_low is not None and (
                    low / prev_low >= 1.15 or prev_low / low >= 1.15):
                snapshots.append(GridFunction(cfg.grid, u.copy(), t=t))
            if low is not None and low <= cfg.stop_on_vanish_below:
                events.append({"type": "vanish_stop", "t": t, "x_lowest": low})
                break
            armed = prev_low is not None and vanish_capture is not None \
                and prev_low <= vanish_capture
            if armed and (low is None or low >= 3.0 * prev_low):
                events.append({"type": "vanish_annihilation", "t": t,
                               "x_last_seen": prev_low})
                break
            prev_low = low

    snapshots.append(GridFunction(cfg.grid, u.copy(), t=t))
    return SolveResult(
        snapshots=snapshots,
        t=np.asarray(traces["t"]),
        boundary=np.asarray(traces["boundary"]),
        m_raw=np.asarray(traces["m_raw"]),
        m_bubble=np.asarray(traces["m_bubble"]),
        events=events,
        final=GridFunction(cfg.grid, u.copy(), t=t),
        kind=kind,
        config=cfg,
        info={"steps": steps, "M": M, "a": a_shift},
    )


def _relative_motion(u_old, u_new, singular, boundary0):
    scale = float(np.max(np.abs(u_new))) + 1e-300
    rel = float(np.max(np.abs(u_new - u_old))) / scale
    if singular and boundary0:
        rel = max(rel, abs(u_new[0] - u_old[0]) / (abs(u_new[0]) + 1e-3 * boundary0))
    else:
        # wall-local motion: the global norm misses the thin gradient layer
        rel = max(rel, abs(u_new[1] - u_old[1]) / (abs(u_new[1]) + 1e-6 * scale))
    return rel


def _one_step(x, u, dt, params, M, V, cfg, left_kind, left_value, right_value,
              singular):
    v = u
    for _ in range(max(1, cfg.newton_sweeps)):
        du = _centered_gradient(x, v)
        if singular:
            g, c = _source_shifted(params, du, V)
        else:
            g, c = _source_power(params, du, M)
        if cfg.mode == "explicit":
            return _kernels.explicit_step(x, u, g, dt, left_kind, left_value,
                                          right_value)
        v = _kernels.step_linearized(x, u, g, c, dt, left_kind, left_value,
                                     right_value)
    return v


def solve_classical(u0: GridFunction, cfg: SolverConfig) -> SolveResult:
    """Dirichlet run of the full equation; flags GBU at the gradient threshold."""
    _check_data(u0, allow_negative=False)
    return _run(u0, cfg, kind="classical")


def solve_truncated(u0: GridFunction, cfg: SolverConfig, M: float) -> SolveResult:
    """Global run with the truncated nonlinearity f_M(s) = min(|s|, M)^p."""
    if not (M > 0):
        raise ValueError("truncation level must be positive")
    _check_data(u0, allow_negative=False)
    return _run(u0, cfg, kind="truncated", M=M)


def solve_singular(z0: GridFunction, cfg: SolverConfig, a: float) -> SolveResult:
    """Neumann-reformulated run for z = u - U with regularization shift a."""
    if not (a > 0):
        raise ValueError("regularization shift must be positive")
    h0 = z0.grid.nodes[1] - z0.grid.nodes[0]
    if a < h0:
        warnings.warn(f"shift a={a} below the finest cell {h0}: under-resolved",
                      stacklevel=2)
    return _run(z0, cfg, kind="singular", a_shift=a)


def _check_data(u0: GridFunction, allow_negative: bool):
    if not allow_negative and np.any(u0.values < -1e-14):
        raise ValueError("initial data must be nonnegative")


# ---------------------------------------------------------------------------
# special initial data


def _smooth_cutoff(z):
    """C^inf transition: 1 for z <= 1, 0 for z >= 2."""
    z = np.asarray(z, dtype=float)
    t = np.clip(z - 1.0, 0.0, 1.0)
    with np.errstate(over="ignore", divide="ignore"):
        fa = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
        fb = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
    out = fa / (fa + fb)
    return out if out.ndim else float(out)


def seed_constants(ell: int, params: ModelParams) -> dict:
    """lambda, eta, gamma, a_* for the mode-ell seed constructions."""
    sp = WeightedSpace(params.alpha)
    phi = eigenpoly(ell, sp, params)
    lam = phi.lam
    eta = lam / (1.0 - params.beta)
    gamma = params.beta * eta / (params.beta + 2.0)
    a_star = (phi.b0 / params.c_p) ** (1.0 / (1.0 - params.beta))
    return {"lam": lam, "eta": eta, "gamma": gamma, "a_star": a_star, "phi": phi,
            "space": sp}


def build_gbu_data(ell: int, eps: float, s0: float, d, params: ModelParams,
                   R: float, grid: Grid | None = None, sigma: float | None = None,
                   glue_y: float | None = None) -> GridFunction:
    """Quasi-stationary inner profile glued to the mode-ell outer expansion.

    In similarity variables at s0 the data is
      e^{-lam s0} U_a(e^{eta s0} y)                     for y <= glue_y,
      Theta(y) { U(y) - e^{-lam s0} phi_ell(y) + sum d_j phi_j(y) }   beyond,
    with the shift a solved from continuity at the glue point and Theta a
    smooth cutoff supported in physical x <= 4 sigma.  The paper-regime
    constants K, sigma are existence-level, so glue_y and sigma are
    empirical knobs with working defaults.  Returned in physical
    variables u0(x) = e^{-k s0} w0(x e^{s0/2}), with construction details
    in meta.
    """
    if ell < 1:
        raise ValueError("mode index ell must be >= 1")
    d = np.zeros(ell) if d is None else np.asarray(d, dtype=float)
    if d.shape != (ell,):
        raise ValueError(f"d must have length ell={ell}")
    cs = seed_constants(ell, params)
    lam, eta = cs["lam"], cs["eta"]
    phi = cs["phi"]
    if np.sum(np.abs(d)) > eps * math.exp(-lam * s0) + 1e-18:
        raise ValueError("mode corrections violate sum |d_j| <= eps * e^(-lam s0)")
    sigma = sigma if sigma is not None else 0.22 * R
    if 4.0 * sigma >= R:
        raise ValueError(f"cutoff support 4*sigma={4 * sigma} must fit inside R={R}")
    root_scale = math.exp(s0 / 2.0)
    glue_y = glue_y if glue_y is not None else min(0.3, 0.2 * sigma * root_scale)
    lower_modes = [eigenpoly(j, cs["space"], params) for j in range(ell)]

    def outer_w(y):
        acc = steady_U(params, y) - math.exp(-lam * s0) * phi(y)
        for dj, pj in zip(d, lower_modes):
            acc = acc + dj * pj(y)
        return acc

    # continuity at the glue point fixes the inner shift a:
    # U_a(Y) - U(Y) + phi(yh) - e^{lam s0} sum d_j phi_j(yh) = 0, Y = e^{eta s0} yh
    Y = math.exp(eta * s0) * glue_y
    dsum = float(sum(dj * pj(glue_y) for dj, pj in zip(d, lower_modes)))

    def h_of_a(a):
        return (steady_U_a(params, a, Y) - steady_U(params, Y)
                + phi(glue_y) - math.exp(lam * s0) * dsum)

    lo, hi = 1e-14, 1e6
    if h_of_a(lo) <= 0 or h_of_a(hi) >= 0:
        raise RuntimeError(
            "glue equation h(a)=0 has no bracketed root; increase s0 or move glue_y")
    a = brentq(h_of_a, lo, hi, xtol=1e-15, rtol=1e-14)
    glue_residual = h_of_a(a)

    if grid is None:
        grid = Grid.graded(R, h_min=1e-5 * R, ratio=0.97)
    x = grid.nodes
    y = x * root_scale
    inner = math.exp(-lam * s0) * steady_U_a(params, a, y * math.exp(eta * s0))
    outer = _smooth_cutoff(x / (2.0 * sigma)) * outer_w(y)
    w0 = np.where(y <= glue_y, inner, outer)
    u0 = math.exp(-params.k * s0) * w0
    if np.min(u0) < -1e-12 * np.max(u0):
        raise RuntimeError(
            f"seed went negative (min {np.min(u0)}): decrease sigma or increase s0")
    u0 = np.maximum(u0, 0.0)
    sim_zeros = _count_seed_intersections(y, w0, steady_U(params, y),
                                          y_max=sigma * root_scale)
    out = GridFunction(grid, u0, t=0.0, meta={
        "a": float(a), "a_star": cs["a_star"], "glue_residual": float(glue_residual),
        "glue_y": glue_y, "sigma": sigma, "s0": s0, "ell": ell,
        "T_ref": math.exp(-s0), "intersections_inner": sim_zeros,
    })
    return out


def _count_seed_intersections(y, w, U_vals, y_max) -> int:
    sel = (y > 0) & (y < y_max)
    diff = w[sel] - U_vals[sel]
    sig = diff[np.abs(diff) > 1e-13 * max(float(np.max(np.abs(diff))), 1e-300)]
    if sig.size < 2:
        return 0
    s = np.sign(sig)
    return int(np.count_nonzero(s[:-1] * s[1:] < 0))


def build_rbc_data(ell: int, eps: float, s0: float, d, params: ModelParams,
                   R: float, grid: Grid | None = None,
                   sigma: float | None = None) -> GridFunction:
    """Positive-sign eigenmode data for the singular solver, as z0 = u0 - U.

    z0(x) = e^{-k s0} Theta { e^{-lam s0} phi_ell + sum d_j phi_j }(x e^{s0/2})
            + (Theta - 1) U(x),
    so u0 = U + z0 >= 0, u0(0) = e^{-(k+lam) s0} phi_ell(0) + ... > 0 and
    u0 vanishes beyond x = 4 sigma.  Needs eps < phi_ell(0).
    """
    if ell < 1:
        raise ValueError("mode index ell must be >= 1")
    cs = seed_constants(ell, params)
    phi = cs["phi"]
    lam = cs["lam"]
    if not (eps < phi.b0):
        raise ValueError(f"eps={eps} must stay below phi_ell(0)={phi.b0}")
    d = np.zeros(ell) if d is None else np.asarray(d, dtype=float)
    if d.shape != (ell,):
        raise ValueError(f"d must have length ell={ell}")
    if np.sum(np.abs(d)) > eps * math.exp(-lam * s0) + 1e-18:
        raise ValueError("mode corrections violate sum |d_j| <= eps * e^(-lam s0)")
    sigma = sigma if sigma is not None else 0.12 * R
    if 4.0 * sigma >= R:
        raise ValueError(f"cutoff support 4*sigma={4 * sigma} must fit inside R={R}")
    if grid is None:
        grid = Grid.graded(R, h_min=1e-5 * R, ratio=0.97)
    x = grid.nodes
    y = x * math.exp(s0 / 2.0)
    lower_modes = [eigenpoly(j, cs["space"], params) for j in range(ell)]
    mode_part = math.exp(-lam * s0) * phi(y)
    for dj, pj in zip(d, lower_modes):
        mode_part = mode_part + dj * pj(y)
    theta = _smooth_cutoff(x / (2.0 * sigma))
    U_vals = steady_U(params, x)
    z0 = math.exp(-params.k * s0) * theta * mode_part + (theta - 1.0) * U_vals
    u0 = U_vals + z0
    if np.min(u0) < -1e-12 * max(float(np.max(u0)), 1e-300):
        raise RuntimeError("u0 = U + z0 went negative: shrink sigma or eps, or raise s0")
    sim_zeros = _count_seed_intersections(x, z0, np.zeros_like(z0), y_max=sigma)
    return GridFunction(grid, z0, t=0.0, meta={
        "s0": s0, "ell": ell, "sigma": sigma, "T_ref": math.exp(-s0),
        "u0_at_0": float(u0[0]), "intersections_inner": sim_zeros,
    })


def detect_rbc_time(result: SolveResult) -> float | None:
    """First down-crossing of the boundary trace through zero, or None."""
    b = result.boundary
    t = result.t
    if b.size == 0 or b[0] <= 0:
        raise ValueError("recovery detection needs a run with u(0,0) > 0")
    below = np.nonzero(b <= 0.0)[0]
    if below.size == 0:
        return None
    k = below[0]
    if b[k] == 0.0:
        return float(t[k])
    # secant refinement between the stored steps bracketing the crossing
    t0, t1 = t[k - 1], t[k]
    b0, b1 = b[k - 1], b[k]
    return float(t0 + (t1 - t0) * b0 / (b0 - b1))
