"""Model constants, singular/regular steady states, similarity transforms.

Everything downstream is driven by the exponent p > 2 through a handful of
derived constants.  With beta = 1/(p-1) the singular steady profile is

    U(x) = c_p * x**(1 - beta),      c_p = (1 - beta)**(-1) * beta**beta,

whose gradient d_p * x**(-beta) (d_p = beta**beta) blows up at x = 0; the
identity d_p**(p-1) = beta is exactly what makes U a steady state of
u_t = u_xx + |u_x|**p.  The regular states are the shifts
U_a(x) = U(a + x) - U(a).

The similarity frame maps (x, t) near a reference time T to
y = x / sqrt(T - t), s = -log(T - t), and rescales values by e**(k s)
with k = (p-2)/(2(p-1)); U is a fixed point of this rescaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .grids import Grid, GridFunction

_IDENTITY_TOL = 1e-13


@dataclass(frozen=True)
class ModelParams:
    p: float
    beta: float
    k: float
    alpha: float
    c_p: float
    d_p: float

    def __post_init__(self):
        # every downstream module leans on these being exact
        checks = (
            abs(self.beta - 1.0 / (self.p - 1.0)),
            abs(self.k - (1.0 - self.beta) / 2.0),
            abs(self.alpha - (self.beta + 1.0)),
            abs(self.d_p - self.c_p * (1.0 - self.beta)),
            abs(self.d_p ** (self.p - 1.0) - self.beta),
        )
        if max(checks) > _IDENTITY_TOL:
            raise AssertionError(f"parameter identities violated: {checks}")


def make_params(p: float) -> ModelParams:
    """Derive all p-dependent constants; rejects p <= 2."""
    p = float(p)
    if not (p > 2.0):
        raise ValueError(f"exponent must satisfy p > 2, got p = {p}")
    beta = 1.0 / (p - 1.0)
    k = (p - 2.0) / (2.0 * (p - 1.0))
    alpha = p / (p - 1.0)
    c_p = beta**beta / (1.0 - beta)
    d_p = beta**beta
    return ModelParams(p=p, beta=beta, k=k, alpha=alpha, c_p=c_p, d_p=d_p)


def steady_U(params: ModelParams, x):
    """Singular steady profile c_p * x**(1-beta); U(0) = 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("U is defined for x >= 0")
    out = params.c_p * np.power(x, 1.0 - params.beta)
    return out if out.ndim else float(out)


def steady_U_prime(params: ModelParams, x):
    """U'(x) = d_p * x**(-beta), infinite at x = 0."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = params.d_p * np.power(x, -params.beta)
    return out if out.ndim else float(out)


def steady_U_a(params: ModelParams, a: float, x):
    """Regular steady state U_a(x) = U(a+x) - U(a); requires a > 0."""
    if not (a > 0):
        raise ValueError(f"shift must be positive, got a = {a}")
    x = np.asarray(x, dtype=float)
    out = steady_U(params, a + x) - steady_U(params, a)
    return out if np.ndim(out) else float(out)


def steady_U_a_prime(params: ModelParams, a: float, x):
    """U_a'(x) = d_p * (a+x)**(-beta); finite slope d_p * a**(-beta) at 0."""
    if not (a > 0):
        raise ValueError(f"shift must be positive, got a = {a}")
    x = np.asarray(x, dtype=float)
    out = params.d_p * np.power(a + x, -params.beta)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class SimilarityFrame:
    """Reference time T of the frame y = x/sqrt(T-t), s = -log(T-t)."""

    T: float

    def s_of_t(self, t: float) -> float:
        if t >= self.T:
            raise ValueError(f"similarity frame needs t < T = {self.T}")
        return -math.log(self.T - t)

    def t_of_s(self, s: float) -> float:
        return self.T - math.exp(-s)


def to_similarity(u: GridFunction, T: float, y_grid: Grid | None = None,
                  params: ModelParams | None = None, p: float | None = None) -> GridFunction:
    """Physical snapshot u(., t) -> similarity snapshot w(., s).

    w(y, s) = e**(k s) * u(y e**(-s/2), T - e**(-s)).  When y_grid is given
    the result is resampled there by monotone cubic interpolation (shape
    preserving, so sign patterns used by the zeros module survive).
    """
    pr = params if params is not None else make_params(p)
    frame = SimilarityFrame(T)
    s = frame.s_of_t(u.t)
    scale = math.exp(s / 2.0)
    y_nodes = u.x * scale
    w_vals = math.exp(pr.k * s) * u.values
    if y_grid is None:
        return GridFunction(Grid(y_nodes, ratio=u.grid.ratio), w_vals, t=s)
    interp = PchipInterpolator(y_nodes, w_vals, extrapolate=False)
    vals = interp(np.clip(y_grid.nodes, y_nodes[0], y_nodes[-1]))
    return GridFunction(y_grid, vals, t=s)


def from_similarity(w: GridFunction, T: float, x_grid: Grid | None = None,
                    params: ModelParams | None = None, p: float | None = None) -> GridFunction:
    """Inverse transform: u(x, t) = e**(-k s) * w(x e**(s/2), s)."""
    pr = params if params is not None else make_params(p)
    s = w.t
    if not np.isfinite(s):
        raise ValueError("similarity snapshot needs a finite s stamp")
    t = SimilarityFrame(T).t_of_s(s)
    scale = math.exp(-s / 2.0)
    x_nodes = w.x * scale
    u_vals = math.exp(-pr.k * s) * w.values
    if x_grid is None:
        return GridFunction(Grid(x_nodes, ratio=w.grid.ratio), u_vals, t=t)
    interp = PchipInterpolator(x_nodes, u_vals, extrapolate=False)
    vals = interp(np.clip(x_grid.nodes, x_nodes[0], x_nodes[-1]))
    return GridFunction(x_grid, vals, t=t)
