import math

import numpy as np
import pytest
from scipy.integrate import quad, solve_ivp

from hjlab.grids import Grid, GridFunction
from hjlab.kernel import (
    KernelParams,
    YFunction,
    apply_semigroup,
    check_normalization,
    g_kernel,
    h_kernel,
    y_eval,
)
from hjlab.spectral import WeightedSpace, eigenpoly
from hjlab.steady import make_params

P3 = make_params(3.0)
KP3 = KernelParams.for_alpha(P3.alpha)


def ode_oracle(alpha, z_grid):
    """Runge-Kutta integration of Y'' + (alpha/z) Y' = Y from a Taylor start."""
    z0 = 1e-4
    c1 = 1.0 / (2.0 * (1.0 + alpha))
    y0 = [1.0 + c1 * z0**2, 2.0 * c1 * z0]  # O(z0^4) accurate
    sol = solve_ivp(lambda z, y: [y[1], y[0] - alpha / z * y[1]],
                    (z0, z_grid[-1]), y0, t_eval=z_grid,
                    rtol=1e-12, atol=1e-14, method="DOP853")
    return sol.y


def test_y_initial_conditions():
    assert y_eval(0.0, 0, 1.5) == 1.0
    assert y_eval(0.0, 1, 1.5) == 0.0


def test_y_series_coefficients_alpha_15():
    yf = YFunction(1.5)
    c = yf.coeffs(3)
    assert c[1] == pytest.approx(0.2, abs=1e-15)          # 1/(2*1*(1+alpha))
    assert c[2] == pytest.approx(0.2 / 18.0, abs=1e-16)   # c1/(2*2*(3+alpha))


def test_y_against_ode_oracle():
    z = np.linspace(0.5, 40.0, 80)
    for alpha in [1.5, 4.0 / 3.0]:
        vals = ode_oracle(alpha, z)
        assert np.allclose(y_eval(z, 0, alpha), vals[0], rtol=1e-10)
        assert np.allclose(y_eval(z, 1, alpha), vals[1], rtol=1e-10)


def test_y_monotone_and_bounded_by_itself():
    z = np.linspace(0, 40, 500)
    y = y_eval(z, 0, 1.5)
    yp = y_eval(z, 1, 1.5)
    assert np.all(np.diff(y) > 0)
    assert np.all(yp <= y + 1e-12)


def test_y_growth_bound():
    # Y(z) * (1+z)^(alpha/2) * e^{-z} bounded on [0, 60]
    z = np.linspace(0, 60, 600)
    yf = YFunction(1.5)
    vals = yf.scaled(z) * (1 + z) ** 0.75
    assert np.max(vals) < 10.0


def test_y_rejects_out_of_range():
    with pytest.raises(ValueError):
        y_eval(61.0, 0, 1.5)
    with pytest.raises(ValueError):
        y_eval(-1.0, 0, 1.5)


def test_scaled_matches_series_on_both_branches():
    # the Bessel representation used for z > 45 must agree with the series
    from scipy.special import ive
    yf = YFunction(1.5)
    nu = (1.5 - 1.0) / 2.0
    pref = 2.0**nu * math.gamma(nu + 1.0)
    for z in [0.3, 5.0, 20.0, 44.9, 45.1, 52.0, 59.5]:
        series = y_eval(z, 0, 1.5) * math.exp(-z)
        bessel = pref * z**-nu * ive(nu, z)
        assert series == pytest.approx(bessel, rel=1e-12)
        assert yf.scaled(z) == pytest.approx(series, rel=1e-12)
        series1 = y_eval(z, 1, 1.5) * math.exp(-z)
        bessel1 = pref * z**-nu * ive(nu + 1, z)
        assert series1 == pytest.approx(bessel1, rel=1e-12)


def test_c_alpha_closed_form():
    # C_alpha = [2^alpha Gamma((alpha+1)/2)]^(-1), read off the defining moment
    assert KP3.C_alpha == pytest.approx(1.0 / (2**1.5 * math.gamma(1.25)), rel=1e-14)


def test_h_kernel_at_xi_zero():
    for t, x in [(0.5, 1.0), (2.0, 3.0)]:
        expected = KP3.C_alpha * t ** (-1.25) * math.exp(-x * x / (4 * t))
        assert h_kernel(0, t, x, 0.0, KP3) == pytest.approx(expected, rel=1e-13)
        assert h_kernel(1, t, x, 0.0, KP3) == 0.0


def test_h1_below_h0_random_sample():
    rng = np.random.default_rng(0)
    for _ in range(200):
        t = rng.uniform(0.05, 3)
        x, xi = rng.uniform(0, 8, 2)
        h0 = h_kernel(0, t, x, xi, KP3)
        h1 = h_kernel(1, t, x, xi, KP3)
        assert 0.0 <= h1 <= h0 + 1e-15


def test_h0_symmetric():
    rng = np.random.default_rng(1)
    for _ in range(50):
        t = rng.uniform(0.1, 2)
        x, xi = rng.uniform(0, 6, 2)
        assert h_kernel(0, t, x, xi, KP3) == pytest.approx(
            h_kernel(0, t, xi, x, KP3), rel=1e-13)


def test_h_kernel_rejects_bad_t():
    with pytest.raises(ValueError):
        h_kernel(0, 0.0, 1.0, 1.0, KP3)
    with pytest.raises(ValueError):
        h_kernel(0, -1.0, 1.0, 1.0, KP3)


def test_normalization_at_origin():
    # reduces to the defining moment of C_alpha
    assert check_normalization(1.0, 0.0, KP3) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("t,x", [(0.3, 2.0), (2.0, 10.0), (0.1, 0.0), (5.0, 7.0)])
def test_normalization_off_origin(t, x):
    assert check_normalization(t, x, KP3) == pytest.approx(1.0, abs=1e-8)


def test_normalization_other_alpha():
    kp = KernelParams.for_alpha(4.0 / 3.0)
    for t, x in [(0.5, 1.0), (1.0, 4.0)]:
        assert check_normalization(t, x, kp) == pytest.approx(1.0, abs=1e-8)


def test_semigroup_eigen_action():
    sp = WeightedSpace(P3.alpha)
    y = Grid(np.linspace(0, 6, 31))
    for j in [0, 1, 3]:
        phi = eigenpoly(j, sp, P3)
        for s in [0.5, 1.0]:
            W = apply_semigroup(s, phi, KP3, P3, y, growth=(2 * j, 0.0))
            expected = math.exp(-phi.lam * s) * phi(y.nodes)
            err = np.max(np.abs(W.values - expected)) / np.max(np.abs(expected))
            assert err < 1e-6


def test_semigroup_on_constant():
    # f = 1 is the phi_0 direction: e^{-sL} 1 = e^{ks}
    y = Grid(np.linspace(0, 4, 9))
    for s in [0.25, 1.0]:
        W = apply_semigroup(s, lambda xi: 1.0, KP3, P3, y)
        assert np.allclose(W.values, math.exp(P3.k * s), rtol=1e-9)


def test_semigroup_short_time_limit():
    # s -> 0+ recovers continuous bounded data pointwise
    f = lambda xi: 1.0 / (1.0 + xi * xi)
    y = Grid(np.array([0.0, 0.5, 1.5, 3.0]))
    W = apply_semigroup(1e-4, f, KP3, P3, y)
    assert np.allclose(W.values, f(y.nodes), atol=2e-3)


def test_semigroup_composition():
    sp = WeightedSpace(P3.alpha)
    phi = eigenpoly(2, sp, P3)
    f = lambda xi: phi(xi) + 0.3 / (1 + xi)  # not an eigenfunction
    s1, s2 = 0.4, 0.7
    dense = Grid(np.linspace(0.0, 60.0, 1201))
    mid = apply_semigroup(s2, f, KP3, P3, dense, growth=(4, 0))
    from scipy.interpolate import PchipInterpolator
    mid_f = PchipInterpolator(dense.nodes, mid.values)
    y = Grid(np.linspace(0, 5, 11))
    W12 = apply_semigroup(s1, mid_f, KP3, P3, y, growth=(4, 0))
    W_direct = apply_semigroup(s1 + s2, f, KP3, P3, y, growth=(4, 0))
    assert np.max(np.abs(W12.values - W_direct.values)) < 1e-5


def test_semigroup_rejects_inadmissible_growth():
    y = Grid(np.linspace(0, 2, 5))
    with pytest.raises(ValueError):
        apply_semigroup(1.0, lambda xi: xi**-3, KP3, P3, y, growth=(0, 3.0))


def test_g1_submarkov_bound():
    # int G_1 xi^alpha dxi <= e^{(k-1/2)s}
    for s, y in [(0.5, 1.0), (1.0, 3.0)]:
        val, _ = quad(lambda xi: g_kernel(1, s, y, xi, KP3, P3) * xi**KP3.alpha,
                      0, 30, limit=200)
        assert val <= math.exp((P3.k - 0.5) * s) + 1e-9


def test_kernel_matches_linearized_solver():
    # dual route: for tiny data the singular solver's equation linearizes
    # to z_t = z_xx + (alpha/x) z_x exactly (p U'^(p-1) = alpha/x), whose
    # solution is the H0 integral; compare the two after a short run
    from hjlab.solver import SolverConfig, solve_singular

    eps = 1e-5
    grid = Grid(np.concatenate([[0.0],
                                np.geomspace(1e-4, 1.0, 500)]))
    x = grid.nodes
    bump = np.where((x > 0.05) & (x < 0.35),
                    np.sin(np.pi * (x - 0.05) / 0.3) ** 2, 0.0)
    z0 = eps * bump
    t_end = 0.008
    cfg = SolverConfig(params=P3, grid=grid, dt_init=1e-7, adaptive=True,
                       rel_change_target=0.005, t_end=t_end)
    run = solve_singular(GridFunction(grid, z0), cfg, a=1e-4)

    from scipy.interpolate import PchipInterpolator
    f = PchipInterpolator(x, bump)
    targets = x[(x >= 0.03) & (x <= 0.5)][::25]
    for xt in targets:
        pred, _ = quad(lambda xi: h_kernel(0, t_end, float(xt), xi, KP3)
                       * (f(xi) if xi <= 1.0 else 0.0) * xi**KP3.alpha,
                       0.0, 1.0, points=[float(xt)], limit=200,
                       epsabs=1e-12, epsrel=1e-10)
        got = float(np.interp(xt, x, run.final.values)) / eps
        assert got == pytest.approx(pred, rel=0.02, abs=2e-4)


def test_g0_positive():
    rng = np.random.default_rng(2)
    for _ in range(100):
        s = rng.uniform(0.05, 2)
        y, xi = rng.uniform(0, 6, 2)
        assert g_kernel(0, s, y, xi, KP3, P3) >= 0.0
