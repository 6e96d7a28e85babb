"""Heat kernels of the alpha-Bessel operator and the linearized semigroup.

The building block is the entire solution Y(z) of

    Y'' + (alpha/z) Y' = Y,   Y(0) = 1,  Y'(0) = 0,

whose power series Y = sum c_m z^(2m) has the positive-term recursion
c_{m+1} = c_m / (2 (m+1) (2m+1+alpha)).  Out of it the heat kernels of
d_t - d_xx - (alpha/x) d_x are

    H_i(t, x, xi) = C_alpha t^(-(alpha+1)/2) exp(-(x^2+xi^2)/4t) Y^(i)(x xi / 2t)

for i in {0, 1}, with C_alpha = [2^alpha Gamma((alpha+1)/2)]^(-1) fixing
int_0^inf H_0 xi^alpha dxi = 1.  The semigroup e^{-sL} of the linearized
operator acts through

    G_0(s, y, xi) = e^{k s} H_0(1 - e^{-s}, e^{-s/2} y, xi).

Y grows like z^(-alpha/2) e^z, so H_0 is evaluated in the displaced
Gaussian form  C_alpha t^(..) exp(-(x-xi)^2/4t) * [e^{-z} Y(z)]; the
bracket is O(1).  For large z the bracket uses the classical Bessel
representation Y(z) = 2^nu Gamma(nu+1) z^(-nu) I_nu(z), nu = (alpha-1)/2,
through the exponentially scaled scipy Bessel (the identity is
cross-checked against the series in the tests).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ive

from .grids import Grid, GridFunction
from .spectral import gauss_moment
from .steady import ModelParams

_SCALED_SWITCH = 45.0  # below: scaled series; above: scaled Bessel form


@dataclass(frozen=True)
class YFunction:
    """Series evaluator for Y; valid up to z_max (growth ~ e^z beyond 60
    starts to squeeze the float range when unscaled)."""

    alpha: float
    z_max: float = 60.0

    def coeffs(self, m_max: int) -> np.ndarray:
        c = np.empty(m_max + 1)
        c[0] = 1.0
        for m in range(m_max):
            c[m + 1] = c[m] / (2.0 * (m + 1) * (2 * m + 1 + self.alpha))
        return c

    def __call__(self, z, order: int = 0):
        return y_eval(z, order, self.alpha, self.z_max)

    def scaled(self, z, order: int = 0):
        """e^{-z} Y^{(order)}(z), safe for any z >= 0."""
        return _y_scaled(z, order, self.alpha)


def y_eval(z, order: int, alpha: float, z_max: float = 60.0):
    """Y(z) (order=0) or Y'(z) (order=1) by the positive-term series.

    Truncation is adaptive: terms stop once below 1e-16 of the partial sum
    (no cancellation, every term positive).  Rejects z > z_max.
    """
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    zx = np.asarray(z, dtype=float)
    if np.any(zx < 0):
        raise ValueError("Y is evaluated for z >= 0")
    if np.any(zx > z_max):
        raise ValueError(f"series evaluation limited to z <= {z_max}")
    out = _series(zx, order, alpha)
    return out if out.ndim else float(out)


def _series_scalar(z: float, order: int, alpha: float) -> float:
    z2 = z * z
    if order == 0:
        term, acc, m = 1.0, 1.0, 0
        while True:
            term *= z2 / (2.0 * (m + 1) * (2 * m + 1 + alpha))
            acc += term
            m += 1
            if term <= 1e-16 * acc or m > 400:
                return acc
    c = 1.0 / (2.0 * (1.0 + alpha))  # c_1
    term = 2.0 * c * z
    acc, m, zpow = term, 1, z
    while True:
        c = c / (2.0 * (m + 1) * (2 * m + 1 + alpha))
        zpow *= z2
        term = (2.0 * (m + 1)) * c * zpow
        acc += term
        m += 1
        if term <= 1e-16 * (acc + 1e-300) or m > 400:
            return acc


def _series(z: np.ndarray, order: int, alpha: float) -> np.ndarray:
    if z.ndim == 0:
        return np.float64(_series_scalar(float(z), order, alpha))
    z2 = z * z
    if order == 0:
        term = np.ones_like(z)
        acc = term.copy()
        m = 0
        while True:
            term = term * z2 / (2.0 * (m + 1) * (2 * m + 1 + alpha))
            acc += term
            m += 1
            if np.all(term <= 1e-16 * acc) or m > 400:
                return acc
    # Y'(z) = sum_m 2m c_m z^(2m-1)
    c = 1.0 / (2.0 * (1.0 + alpha))  # c_1
    term = 2.0 * c * z
    acc = term.copy()
    m = 1
    while True:
        c = c / (2.0 * (m + 1) * (2 * m + 1 + alpha))
        term = (2.0 * (m + 1)) * c * z * z2**m
        acc += term
        m += 1
        if np.all(term <= 1e-16 * (acc + 1e-300)) or m > 400:
            return acc


def _y_scaled(z, order: int, alpha: float):
    """e^{-z} Y^{(order)}(z) without overflow.

    Small z: scaled series.  Large z: Y = 2^nu Gamma(nu+1) z^(-nu) I_nu(z)
    with nu = (alpha-1)/2 and d/dz [z^(-nu) I_nu] = z^(-nu) I_{nu+1},
    evaluated through the exponentially scaled Bessel function.
    """
    zx = np.asarray(z, dtype=float)
    if zx.ndim == 0:
        zf = float(zx)
        if zf <= _SCALED_SWITCH:
            return _series_scalar(zf, order, alpha) * math.exp(-zf)
        nu = (alpha - 1.0) / 2.0
        return (2.0**nu * math.gamma(nu + 1.0)) * zf ** (-nu) * float(ive(nu + order, zf))
    out = np.empty_like(zx)
    small = zx <= _SCALED_SWITCH
    if np.any(small):
        zs = zx[small]
        out[small] = _series(zs, order, alpha) * np.exp(-zs)
    if np.any(~small):
        zl = zx[~small]
        nu = (alpha - 1.0) / 2.0
        pref = 2.0**nu * math.gamma(nu + 1.0)
        out[~small] = pref * zl ** (-nu) * ive(nu + order, zl)
    return out


@dataclass(frozen=True)
class KernelParams:
    """alpha plus the normalization making int H_0 xi^alpha dxi = 1."""

    alpha: float
    C_alpha: float

    @staticmethod
    def for_alpha(alpha: float) -> "KernelParams":
        if not (alpha >= 1.0):
            raise ValueError("kernel normalization derived for alpha >= 1")
        return KernelParams(alpha=alpha, C_alpha=1.0 / gauss_moment(alpha))


def h_kernel(i: int, t: float, x, xi, kp: KernelParams):
    """H_i(t, x, xi); i = 0 is the heat kernel, i = 1 its gradient mate."""
    if i not in (0, 1):
        raise ValueError("kernel index must be 0 or 1")
    if not (t > 0):
        raise ValueError(f"kernel needs t > 0, got t = {t}")
    pref = kp.C_alpha * t ** (-(kp.alpha + 1.0) / 2.0)
    if np.ndim(x) == 0 and np.ndim(xi) == 0:  # scalar fast path for quadrature
        xf, xif = float(x), float(xi)
        z = xf * xif / (2.0 * t)
        return pref * math.exp(-((xf - xif) ** 2) / (4.0 * t)) * _y_scaled(z, i, kp.alpha)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    z = x * xi / (2.0 * t)
    out = pref * np.exp(-((x - xi) ** 2) / (4.0 * t)) * _y_scaled(z, i, kp.alpha)
    return out if out.ndim else float(out)


def check_normalization(t: float, x: float, kp: KernelParams,
                        tol: float = 1e-11) -> float:
    """Quadrature value of int_0^inf H_0(t, x, xi) xi^alpha dxi (target 1).

    The integrand is a displaced Gaussian peaked at xi ~ x; integration is
    split there and truncated where the Gaussian tail is < 1e-14.
    """
    if not (t > 0):
        raise ValueError("normalization check needs t > 0")
    width = math.sqrt(4.0 * t)
    upper = x + 18.0 * width + 1.0

    def f(xi):
        return h_kernel(0, t, x, xi, kp) * xi**kp.alpha

    pts = [x] if 0.0 < x < upper else None
    val, err = quad(f, 0.0, upper, points=pts, limit=300,
                    epsabs=tol, epsrel=tol)
    if err > 100 * tol * max(1.0, abs(val)):
        raise RuntimeError(f"normalization quadrature did not converge: err={err}")
    return val


def g_kernel(i: int, s: float, y, xi, kp: KernelParams, params: ModelParams):
    """Semigroup kernels: G_0 = e^{ks} H_0(1-e^{-s}, e^{-s/2} y, xi) and its
    gradient mate G_1 = e^{(k-1/2)s} H_1(same arguments)."""
    if not (s > 0):
        raise ValueError("semigroup kernel needs s > 0")
    t_eff = -math.expm1(-s)
    x_eff = math.exp(-s / 2.0) * np.asarray(y, dtype=float)
    return math.exp((params.k - i / 2.0) * s) * h_kernel(i, t_eff, x_eff, xi, kp)


def apply_semigroup(s: float, f, kp: KernelParams, params: ModelParams,
                    y_out, growth: tuple[float, float] = (0.0, 0.0),
                    tol: float = 1e-11) -> GridFunction:
    """W(., s) = e^{-sL} f by quadrature against G_0.

    f is a callable on [0, inf); growth = (q, m) tags |f(xi)| <=
    C (xi^q + xi^-m).  The kernel representation requires m < (alpha+3)/2;
    inadmissible tags are rejected.  Output is sampled on y_out (array or
    Grid) and stamped with s.
    """
    if not (s > 0):
        raise ValueError("semigroup application needs s > 0")
    q, m = growth
    if not (m < (kp.alpha + 3.0) / 2.0):
        raise ValueError(
            f"growth tag m={m} inadmissible: needs m < (alpha+3)/2 = {(kp.alpha + 3) / 2}")
    grid = y_out if isinstance(y_out, Grid) else Grid(np.asarray(y_out, dtype=float))
    t_eff = -math.expm1(-s)
    scale = math.exp(params.k * s)
    width = math.sqrt(4.0 * t_eff)
    vals = np.empty(grid.n)
    for idx, y in enumerate(grid.nodes):
        x_eff = math.exp(-s / 2.0) * y

        def integrand(xi):
            return h_kernel(0, t_eff, x_eff, xi, kp) * f(xi) * xi**kp.alpha

        upper = x_eff + (18.0 + math.sqrt(2.0 * max(q, 1.0))) * width + 1.0
        pts = [x_eff] if 0.0 < x_eff < upper else None
        v, _ = quad(integrand, 0.0, upper, points=pts, limit=300,
                    epsabs=tol, epsrel=tol)
        vals[idx] = scale * v
    return GridFunction(grid, vals, t=s)
