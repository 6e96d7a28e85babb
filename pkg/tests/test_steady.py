import math

import numpy as np
import pytest

from hjlab.grids import Grid, GridFunction
from hjlab.steady import (
    SimilarityFrame,
    from_similarity,
    make_params,
    steady_U,
    steady_U_a,
    steady_U_a_prime,
    to_similarity,
)


def test_params_p3():
    pr = make_params(3.0)
    assert pr.beta == pytest.approx(0.5, abs=1e-15)
    assert pr.k == pytest.approx(0.25, abs=1e-15)
    assert pr.alpha == pytest.approx(1.5, abs=1e-15)
    assert pr.c_p == pytest.approx(math.sqrt(2.0), abs=1e-14)
    assert pr.d_p == pytest.approx(math.sqrt(0.5), abs=1e-14)


def test_params_p4():
    pr = make_params(4.0)
    assert pr.beta == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert pr.k == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert pr.alpha == pytest.approx(4.0 / 3.0, abs=1e-15)


@pytest.mark.parametrize("p", [2.0, 1.5, -1.0])
def test_params_rejects_p_le_2(p):
    with pytest.raises(ValueError):
        make_params(p)


def test_params_identities_random_p():
    rng = np.random.default_rng(7)
    for p in 2.0 + rng.uniform(0.01, 8, size=20):
        pr = make_params(p)
        assert abs(pr.k - (1 - pr.beta) / 2) < 1e-15
        assert abs(pr.d_p - pr.c_p * (1 - pr.beta)) < 1e-13
        assert abs(pr.d_p ** (p - 1) - pr.beta) < 1e-13


def test_steady_U_values():
    pr = make_params(3.0)
    assert steady_U(pr, 0.0) == 0.0
    assert steady_U(pr, 1.0) == pytest.approx(math.sqrt(2.0), rel=1e-14)
    assert steady_U(pr, 4.0) == pytest.approx(2.0 * math.sqrt(2.0), rel=1e-14)


def test_steady_U_scaling_identity():
    # U(lam*x) = lam^(1-beta) U(x)
    rng = np.random.default_rng(3)
    for p in [2.5, 3.0, 4.0, 5.5]:
        pr = make_params(p)
        for _ in range(10):
            lam, x = rng.uniform(0.1, 10, 2)
            lhs = steady_U(pr, lam * x)
            rhs = lam ** (1 - pr.beta) * steady_U(pr, x)
            assert lhs == pytest.approx(rhs, rel=1e-13)


def test_steady_U_monotone_concave():
    pr = make_params(3.5)
    x = np.linspace(0.01, 5, 200)
    u = steady_U(pr, x)
    assert np.all(np.diff(u) > 0)
    assert np.all(np.diff(u, 2) < 0)


def test_U_discrete_residual_second_order():
    # centered residual of U'' + (U')^p vanishes at O(h^2) on [1, 2]
    pr = make_params(3.0)

    def residual(h):
        x = np.arange(1.0, 2.0, h)
        u = steady_U(pr, x)
        lap = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
        grad = (u[2:] - u[:-2]) / (2 * h)
        return np.max(np.abs(lap + grad**pr.p))

    r1, r2 = residual(1e-2), residual(5e-3)
    assert r1 / r2 == pytest.approx(4.0, rel=0.05)


def test_steady_U_a():
    pr = make_params(3.0)
    assert steady_U_a(pr, 1.0, 0.0) == 0.0
    assert steady_U_a(pr, 1.0, 3.0) == pytest.approx(math.sqrt(2.0), rel=1e-14)
    x = np.linspace(0.1, 4, 50)
    assert np.all(steady_U_a(pr, 0.5, x) < steady_U(pr, x))
    # a -> 0 recovers U
    assert steady_U_a(pr, 1e-12, 2.0) == pytest.approx(steady_U(pr, 2.0), rel=1e-5)
    # slope at 0
    assert steady_U_a_prime(pr, 1.0, 0.0) == pytest.approx(pr.d_p, rel=1e-14)
    with pytest.raises(ValueError):
        steady_U_a(pr, -0.1, 1.0)


def test_similarity_frame():
    fr = SimilarityFrame(T=1.0)
    assert fr.s_of_t(1.0 - math.exp(-1.0)) == pytest.approx(1.0, abs=1e-14)
    assert fr.t_of_s(fr.s_of_t(0.3)) == pytest.approx(0.3, abs=1e-14)
    with pytest.raises(ValueError):
        fr.s_of_t(1.0)


def test_U_fixed_point_of_transform():
    pr = make_params(3.0)
    grid = Grid.uniform(2.0, 400)
    u = GridFunction(grid, steady_U(pr, grid.nodes), t=0.6)
    w = to_similarity(u, T=1.0, params=pr)
    assert np.allclose(w.values, steady_U(pr, w.x), rtol=1e-12, atol=1e-12)
    back = from_similarity(w, T=1.0, params=pr)
    assert np.allclose(back.values, u.values, rtol=1e-12, atol=1e-14)
    assert back.t == pytest.approx(0.6, abs=1e-14)


def test_round_trip_with_interpolation():
    pr = make_params(3.0)
    grid = Grid.uniform(1.0, 800)
    rng = np.random.default_rng(11)
    coef = rng.normal(size=4)
    smooth = sum(c * np.sin((i + 1) * np.pi * grid.nodes) for i, c in enumerate(coef))
    u = GridFunction(grid, smooth, t=0.75)
    inner = slice(1, 500)  # overlap region, away from the clipped tail

    def round_trip_err(n_mid):
        w = to_similarity(u, T=1.0, params=pr, y_grid=Grid.uniform(2.0, n_mid))
        back = from_similarity(w, T=1.0, params=pr, x_grid=grid)
        return np.max(np.abs(back.values[inner] - u.values[inner]))

    e600 = round_trip_err(600)
    assert e600 < 1e-4  # cubic interpolation error through a 600-node detour
    assert round_trip_err(1200) < 0.3 * e600  # and it shrinks under refinement


def test_to_similarity_rejects_t_after_T():
    pr = make_params(3.0)
    grid = Grid.uniform(1.0, 10)
    u = GridFunction(grid, np.zeros(10), t=2.0)
    with pytest.raises(ValueError):
        to_similarity(u, T=1.0, params=pr)


def test_graded_grid():
    g = Grid.graded(1.0, h_min=1e-5, ratio=0.97)
    assert g.nodes[0] == 0.0
    assert g.nodes[-1] == pytest.approx(1.0, abs=1e-12)
    h = g.spacing
    assert h[0] == pytest.approx(1e-5, rel=1e-12)
    assert np.all(h > 0)
    assert np.max(h) <= 1.0 / 50 + 1e-12


def test_gridfunction_conveniences():
    pr = make_params(3.0)
    g = Grid.uniform(1.0, 11)
    f = GridFunction.sample(g, lambda x: steady_U(pr, x), t=0.2)
    assert f.values[10] == pytest.approx(steady_U(pr, 1.0), rel=1e-14)
    f2 = f.with_values(f.values * 2.0, t=0.5)
    assert f2.t == 0.5
    assert f2.values[5] == pytest.approx(2 * f.values[5])
