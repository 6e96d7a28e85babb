import math

import numpy as np
import pytest

from hjlab import _kernels
from hjlab.grids import Grid, GridFunction
from hjlab.solver import (
    NumericalFailure,
    SolverConfig,
    build_gbu_data,
    build_rbc_data,
    detect_rbc_time,
    solve_classical,
    solve_singular,
    solve_truncated,
)
from hjlab.spectral import WeightedSpace, eigenpoly
from hjlab.steady import make_params, steady_U, steady_U_a
from hjlab.zeros import sign_changes

P3 = make_params(3.0)


def base_cfg(grid, **kw):
    defaults = dict(params=P3, grid=grid, dt_init=1e-4, adaptive=False, t_end=0.02)
    defaults.update(kw)
    return SolverConfig(**defaults)


def test_zero_data_stays_zero():
    g = Grid.uniform(1.0, 101)
    r = solve_classical(GridFunction(g, np.zeros(101)), base_cfg(g))
    assert np.max(np.abs(r.final.values)) == 0.0


def test_max_principle_all_snapshots():
    g = Grid.uniform(1.0, 201)
    u0 = 0.4 * np.sin(np.pi * g.nodes)
    cfg = base_cfg(g, t_end=0.05, snapshot_times=tuple(np.linspace(0.01, 0.05, 5)))
    r = solve_classical(GridFunction(g, u0), cfg)
    for s in r.snapshots:
        assert np.max(s.values) <= np.max(u0) + 1e-12


def test_steady_state_preserved_at_truncation_error():
    g = Grid.uniform(1.0, 201)
    vals = steady_U_a(P3, 0.5, g.nodes)
    r = solve_classical(GridFunction(g, vals), base_cfg(g, t_end=0.05))
    assert np.max(np.abs(r.final.values - vals)) < 5e-7


def test_steady_residual_second_order_in_h():
    # drift from the exact steady state shrinks ~4x per mesh halving
    drifts = []
    for n in (101, 201, 401):
        g = Grid.uniform(1.0, n)
        vals = steady_U_a(P3, 0.5, g.nodes)
        r = solve_classical(GridFunction(g, vals), base_cfg(g, dt_init=2e-5, t_end=0.02))
        drifts.append(np.max(np.abs(r.final.values - vals)))
    assert drifts[0] / drifts[1] == pytest.approx(4.0, rel=0.25)
    assert drifts[1] / drifts[2] == pytest.approx(4.0, rel=0.25)


def test_first_order_in_dt():
    g = Grid.uniform(1.0, 151)
    u0 = 0.4 * np.sin(np.pi * g.nodes) + 0.1 * np.sin(3 * np.pi * g.nodes)
    finals = {}
    for dt in (4e-4, 2e-4, 1e-4, 2.5e-5):
        r = solve_classical(GridFunction(g, u0), base_cfg(g, dt_init=dt, t_end=0.02))
        finals[dt] = r.final.values
    e1 = np.max(np.abs(finals[4e-4] - finals[2.5e-5]))
    e2 = np.max(np.abs(finals[2e-4] - finals[2.5e-5]))
    e3 = np.max(np.abs(finals[1e-4] - finals[2.5e-5]))
    assert e1 / e2 == pytest.approx(2.0, rel=0.35)
    assert e2 / e3 == pytest.approx(2.77, rel=0.35)  # (2e-4 - ref)/(1e-4 - ref) for O(dt)


def test_discrete_comparison_ordered_data():
    g = Grid.uniform(1.0, 201)
    lo = 0.3 * np.sin(np.pi * g.nodes)
    hi = lo + 0.2 * np.sin(np.pi * g.nodes) ** 2 + 0.05
    hi[0] = hi[-1] = 0.0
    hi = np.maximum(hi, lo)
    cfg = base_cfg(g, t_end=0.04, snapshot_times=tuple(np.linspace(0.005, 0.04, 6)))
    r_lo = solve_classical(GridFunction(g, lo), cfg)
    r_hi = solve_classical(GridFunction(g, hi), cfg)
    for s_lo, s_hi in zip(r_lo.snapshots, r_hi.snapshots):
        assert s_lo.t == s_hi.t
        assert np.all(s_lo.values <= s_hi.values + 1e-10)


def test_zero_number_of_difference_nonincreasing():
    g = Grid.uniform(1.0, 301)
    u1 = 0.4 * np.sin(np.pi * g.nodes)
    u2 = 0.4 * np.sin(np.pi * g.nodes) + 0.08 * np.sin(4 * np.pi * g.nodes)
    cfg = base_cfg(g, t_end=0.03, snapshot_times=tuple(np.linspace(0.002, 0.03, 10)))
    r1 = solve_classical(GridFunction(g, u1), cfg)
    r2 = solve_classical(GridFunction(g, u2), cfg)
    counts = []
    for s1, s2 in zip(r1.snapshots, r2.snapshots):
        diff = s1.values - s2.values
        counts.append(sign_changes(diff, tol=1e-9 * np.max(np.abs(diff) + 1e-300)))
    assert counts[0] >= 3
    assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_gbu_flag_on_steep_data():
    g = Grid.graded(1.0, h_min=1e-4, ratio=0.95)
    u0 = 2.0 * np.sin(np.pi * g.nodes) ** 0.75
    cfg = SolverConfig(params=P3, grid=g, dt_init=1e-6, adaptive=True,
                       rel_change_target=0.02, t_end=2.0, gradient_threshold=50.0)
    r = solve_classical(GridFunction(g, u0), cfg)
    assert any(e["type"] == "gbu_flag" for e in r.events)
    assert r.m_bubble[-1] >= 50.0


def test_truncated_small_M_runs_globally():
    g = Grid.uniform(1.0, 101)
    u0 = 2.0 * np.sin(np.pi * g.nodes)
    cfg = base_cfg(g, t_end=0.3, dt_init=5e-4, gradient_threshold=1e6)
    r = solve_truncated(GridFunction(g, u0), cfg, M=3.0)
    assert not any(e["type"] == "gbu_flag" for e in r.events)
    assert r.final.t == pytest.approx(0.3, abs=1e-9)


def test_truncated_monotone_in_M():
    g = Grid.uniform(1.0, 81)
    u0 = 3.0 * np.sin(np.pi * g.nodes)
    cfg = base_cfg(g, t_end=0.05, dt_init=2e-4,
                   snapshot_times=tuple(np.linspace(0.01, 0.05, 5)))
    runs = {M: solve_truncated(GridFunction(g, u0), cfg, M=M) for M in (5, 10, 20)}
    for Ma, Mb in [(5, 10), (10, 20)]:
        for sa, sb in zip(runs[Ma].snapshots, runs[Mb].snapshots):
            assert np.all(sa.values <= sb.values + 1e-9)


def test_truncated_agrees_with_classical_before_flag():
    g = Grid.uniform(1.0, 101)
    u0 = 1.0 * np.sin(np.pi * g.nodes)
    cfg = base_cfg(g, t_end=0.05, dt_init=2e-4)
    rc = solve_classical(GridFunction(g, u0), cfg)
    rt = solve_truncated(GridFunction(g, u0), cfg, M=1e4)
    assert np.max(np.abs(rc.final.values - rt.final.values)) < 1e-12


def test_singular_boundary_continuity():
    # z0(0) = c > 0: the boundary value is continuous down to t = 0+
    g = Grid.graded(1.0, h_min=1e-4, ratio=0.95)
    c = 0.05
    z0 = c * (1 - g.nodes) ** 2 - steady_U(P3, 1.0) * g.nodes**2
    devs = []
    for t_end in (2e-4, 2e-5, 2e-6):
        cfg = SolverConfig(params=P3, grid=g, dt_init=1e-9, adaptive=True,
                           rel_change_target=0.02, t_end=t_end)
        r = solve_singular(GridFunction(g, z0), cfg, a=1e-3)
        devs.append(abs(r.boundary[-1] - c))
    assert devs[0] < 0.15 * c
    assert devs[1] < devs[0] and devs[2] < devs[1]
    assert devs[2] < 0.005 * c


def test_singular_sign_preserved_below_U():
    # u0 <= U means z0 <= 0, preserved along the run
    g = Grid.graded(1.0, h_min=1e-4, ratio=0.95)
    z0 = -0.3 * (0.2 + 0.8 * g.nodes)
    cfg = SolverConfig(params=P3, grid=g, dt_init=1e-7, adaptive=True,
                       rel_change_target=0.02, t_end=0.01,
                       snapshot_times=(0.003, 0.006, 0.009))
    r = solve_singular(GridFunction(g, z0), cfg, a=1e-3)
    for s in r.snapshots:
        assert np.all(s.values <= 1e-10)


def test_singular_contraction():
    g = Grid.graded(1.0, h_min=1e-4, ratio=0.95)
    rng = np.random.default_rng(2)
    base = -0.2 * g.nodes - 0.01
    z1 = base + 0.05 * np.sin(2 * np.pi * g.nodes)
    z2 = base + 0.05 * np.cos(3 * np.pi * g.nodes) * g.nodes
    cfg = SolverConfig(params=P3, grid=g, dt_init=1e-6, adaptive=False, t_end=0.01)
    r1 = solve_singular(GridFunction(g, z1), cfg, a=1e-3)
    r2 = solve_singular(GridFunction(g, z2), cfg, a=1e-3)
    gap0 = np.max(np.abs(z1 - z2))
    gapT = np.max(np.abs(r1.final.values - r2.final.values))
    assert gapT <= gap0 * (1 + 1e-10)


def test_singular_zx_bounded_stabilizes_under_refinement():
    # discrete form of u_x - U_x staying bounded: max |z_x| settles
    sup_zx = []
    for h_min in (4e-4, 2e-4, 1e-4):
        g = Grid.graded(1.0, h_min=h_min, ratio=0.95)
        z0 = 0.02 * (1 - g.nodes) - steady_U(P3, 1.0) * g.nodes**2
        cfg = SolverConfig(params=P3, grid=g, dt_init=1e-7, adaptive=True,
                           rel_change_target=0.02, t_end=2e-3)
        r = solve_singular(GridFunction(g, z0), cfg, a=1e-3)
        zx = np.gradient(r.final.values, g.nodes)
        sup_zx.append(np.max(np.abs(zx)))
    assert abs(sup_zx[-1] - sup_zx[-2]) < 0.1 * abs(sup_zx[-1])


def test_singular_warns_underresolved_shift():
    g = Grid.graded(1.0, h_min=1e-3, ratio=0.95)
    z0 = -0.1 * g.nodes
    cfg = SolverConfig(params=P3, grid=g, dt_init=1e-7, t_end=1e-5)
    with pytest.warns(UserWarning, match="under-resolved"):
        solve_singular(GridFunction(g, z0), cfg, a=1e-5)


def test_explicit_mode_matches_imex():
    g = Grid.uniform(1.0, 101)
    u0 = 0.3 * np.sin(np.pi * g.nodes)
    cfg_i = base_cfg(g, dt_init=1e-5, t_end=0.005)
    cfg_e = base_cfg(g, dt_init=1e-5, t_end=0.005, mode="explicit")
    ri = solve_classical(GridFunction(g, u0), cfg_i)
    re = solve_classical(GridFunction(g, u0), cfg_e)
    assert np.max(np.abs(ri.final.values - re.final.values)) < 2e-5


def test_explicit_cfl_violation_raises():
    g = Grid.uniform(1.0, 101)
    cfg = base_cfg(g, mode="explicit", dt_init=1.0, adaptive=False)
    with pytest.raises(NumericalFailure):
        solve_classical(GridFunction(g, 0.1 * np.sin(np.pi * g.nodes)), cfg)


def test_kernel_paths_agree():
    # numba-compiled and numpy fallback implementations are interchangeable
    rng = np.random.default_rng(0)
    x = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0.001, 0.999, 60)]))
    u = np.sin(np.pi * x) * 0.3
    g = np.abs(np.gradient(u, x)) ** 3
    c = 3 * np.gradient(u, x) ** 2
    for kind, lv, rv in [(_kernels.LEFT_DIRICHLET, 0.0, 0.0),
                         (_kernels.LEFT_NEUMANN, 0.0, -1.0)]:
        a = _kernels._step_linearized_py(x, u, g, c, 1e-5, kind, lv, rv)
        b = _kernels._step_linearized_np(x, u, g, c, 1e-5, kind, lv, rv)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
        ea = _kernels._explicit_step_py(x, u, g, 1e-7, kind, lv, rv)
        eb = _kernels._explicit_step_np(x, u, g, 1e-7, kind, lv, rv)
        assert np.allclose(ea, eb, rtol=1e-12, atol=1e-14)


# --- seed builders ----------------------------------------------------------


def test_gbu_seed_structure():
    seed = build_gbu_data(1, 0.1, 1.9, None, P3, R=5.0)
    assert seed.values[0] == 0.0
    assert np.all(seed.values >= 0)
    assert seed.meta["glue_residual"] < 1e-10
    assert seed.meta["intersections_inner"] == 1
    # support inside the cutoff
    x = seed.x
    assert np.all(seed.values[x >= 4 * seed.meta["sigma"]] == 0.0)
    # the single crossing sits near the eigen-zero sqrt(5) in similarity units
    U = steady_U(P3, x)
    diff = seed.values - U
    crossings = x[:-1][np.sign(diff[:-1]) * np.sign(diff[1:]) < 0]
    y_cross = crossings[0] * math.exp(1.9 / 2)
    assert y_cross == pytest.approx(math.sqrt(5.0), rel=0.05)


def test_gbu_seed_rejects_oversized_d():
    with pytest.raises(ValueError):
        build_gbu_data(1, 0.001, 5.0, [1.0], P3, R=5.0)


def test_rbc_seed_structure():
    sp = WeightedSpace(P3.alpha)
    phi1 = eigenpoly(1, sp, P3)
    s0 = 6.0
    seed = build_rbc_data(1, 0.1, s0, None, P3, R=1.0)
    expect = math.exp(-(P3.k + phi1.lam) * s0) * phi1.b0
    assert seed.values[0] == pytest.approx(expect, rel=1e-12)
    x = seed.x
    sigma = seed.meta["sigma"]
    U = steady_U(P3, x)
    assert np.all(U[x >= 4 * sigma] + seed.values[x >= 4 * sigma] == 0.0)
    assert seed.meta["intersections_inner"] == 1


def test_rbc_seed_rejects_large_eps():
    sp = WeightedSpace(P3.alpha)
    phi1 = eigenpoly(1, sp, P3)
    with pytest.raises(ValueError):
        build_rbc_data(1, phi1.b0 + 0.1, 6.0, None, P3, R=1.0)


def test_detect_rbc_time_synthetic():
    class FakeResult:
        boundary = np.array([1.0, 0.6, 0.2, -0.2])
        t = np.array([0.0, 0.4, 0.8, 1.2])

    assert detect_rbc_time(FakeResult()) == pytest.approx(1.0, abs=1e-12)

    class NoCross:
        boundary = np.array([1.0, 0.8, 0.7])
        t = np.array([0.0, 0.5, 1.0])

    assert detect_rbc_time(NoCross()) is None


def test_snapshot_nearest():
    g = Grid.uniform(1.0, 51)
    cfg = base_cfg(g, t_end=0.02, snapshot_times=(0.005, 0.01, 0.015))
    r = solve_classical(GridFunction(g, 0.2 * np.sin(np.pi * g.nodes)), cfg)
    assert r.snapshot_nearest(0.0101).t == pytest.approx(0.01, abs=1e-12)
