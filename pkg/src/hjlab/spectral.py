"""Weighted space L^2_rho, eigenpolynomials of the linearized operator.

The operator linearized around the singular steady state,

    L phi = -phi'' + (y/2 - alpha/y) phi' - k phi,   alpha = p/(p-1),

acts on the half-line weighted space with rho(y) = y**alpha * exp(-y^2/4).
Its spectrum is lambda_j = j - k (j = 0, 1, 2, ...) and the eigenfunction
phi_j is an even polynomial of degree 2j whose coefficients b_{j,i} of
y**(2i) obey the downward recursion

    b_{j,i} = -2 (i+1) (2i+1+alpha) / (j-i) * b_{j,i+1},  0 <= i <= j-1.

We run the recursion from b_{j,j} = (-1)**j, so b_{j,0} = phi_j(0) > 0,
then rescale to unit L^2_rho norm.  All inner products reduce to the
half-line Gaussian moments

    gauss_moment(s) = int_0^inf y^s e^{-y^2/4} dy = 2^s Gamma((s+1)/2),

so orthogonality can be checked without quadrature.  When p (hence alpha)
is rational the coefficients are carried as exact fractions, the
eigenrelation is verified as a literal zero polynomial, and Gram matrix
entries are formed over the rationals: the common transcendental factor
2^alpha * Gamma((alpha+1)/2) of all moments cancels in normalized
quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .steady import ModelParams

_MAX_EXACT_DENOM = 10**6


@dataclass(frozen=True)
class WeightedSpace:
    """Half-line space with weight rho(y) = y**alpha * exp(-y^2/4)."""

    alpha: float

    def __post_init__(self):
        if not (1.0 <= self.alpha < 3.0):
            raise ValueError(f"drift exponent must lie in [1, 3), got {self.alpha}")

    def weight(self, y):
        y = np.asarray(y, dtype=float)
        return np.power(y, self.alpha) * np.exp(-y * y / 4.0)

    @property
    def alpha_exact(self) -> Fraction | None:
        frac = Fraction(self.alpha).limit_denominator(_MAX_EXACT_DENOM)
        return frac if float(frac) == self.alpha else None


def gauss_moment(s: float) -> float:
    """Exact half-line Gaussian moment 2**s * Gamma((s+1)/2); needs s > -1."""
    if not (s > -1.0):
        raise ValueError(f"moment diverges for s <= -1, got s = {s}")
    return 2.0**s * math.gamma((s + 1.0) / 2.0)


def _reduced_moment(r: int, alpha: Fraction) -> Fraction:
    """gauss_moment(alpha + 2r) up to the r-independent factor gauss_moment(alpha).

    Rational: 4**r * Pochhammer((alpha+1)/2, r).
    """
    z = (alpha + 1) / 2
    out = Fraction(4) ** r
    for i in range(r):
        out *= z + i
    return out


@dataclass(frozen=True)
class EigenPoly:
    """Normalized eigenpolynomial phi_j: coeffs[i] multiplies y**(2i)."""

    j: int
    lam: float
    coeffs: np.ndarray           # float, unit L^2_rho norm, coeffs[0] > 0
    alpha: float
    coeffs_exact: tuple | None = None   # Fractions, unnormalized, b_{j,j} = (-1)^j

    def __post_init__(self):
        c = np.ascontiguousarray(self.coeffs, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def b0(self) -> float:
        """phi_j(0)."""
        return float(self.coeffs[0])

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        t = y * y
        out = np.zeros_like(t)
        for c in self.coeffs[::-1]:
            out = out * t + c
        return out if out.ndim else float(out)

    def deriv(self, y):
        y = np.asarray(y, dtype=float)
        t = y * y
        out = np.zeros_like(t)
        for i in range(len(self.coeffs) - 1, 0, -1):
            out = out * t + 2 * i * self.coeffs[i]
        out = out * y
        return out if out.ndim else float(out)

    def full_coeffs(self) -> np.ndarray:
        """Coefficients in plain powers of y (odd ones zero)."""
        full = np.zeros(2 * self.j + 1)
        full[::2] = self.coeffs
        return full


def _recursion_coeffs(j: int, alpha):
    """Unnormalized b_{j,i} (i = 0..j) from the downward recursion.

    Works over whatever number type alpha is (Fraction or float); the seed
    b_{j,j} = (-1)**j makes b_{j,0} positive.
    """
    b = [None] * (j + 1)
    b[j] = -1 if j % 2 else 1
    for i in range(j - 1, -1, -1):
        b[i] = -2 * (i + 1) * (2 * i + 1 + alpha) / (j - i) * b[i + 1]
    return b


def eigen_residual(b: list, j: int, alpha) -> list:
    """Coefficients of y * (L phi - lambda_j phi) for phi = sum b_i y^(2i).

    Assembled by explicit polynomial calculus (independent of the
    recursion used to build b):

        y*(L phi - lambda_j phi) = -y phi'' + (y^2/2) phi' - alpha phi' - j y phi,

    where the k-terms of L and lambda_j = j - k cancel.  Multiplying by y
    clears the alpha/y singularity; the result has only odd powers and
    entry r of the returned list is the coefficient of y**(2r+1).  A zero
    list certifies the eigenrelation.
    """
    dphi = [2 * i * b[i] for i in range(j + 1)]            # phi' / y**(2i-1)
    ddphi = [2 * i * (2 * i - 1) * b[i] for i in range(j + 1)]
    res = []
    for r in range(j + 1):
        term = (r - j) * b[r]                               # (y^2/2) phi' - j y phi
        if r + 1 <= j:
            term -= ddphi[r + 1]                            # -y phi''
            term -= alpha * dphi[r + 1]                     # -alpha phi'
        res.append(term)
    return res


def eigenpoly(j: int, space: WeightedSpace, params: ModelParams) -> EigenPoly:
    """Construct normalized phi_j with eigenvalue j - k."""
    if j < 0 or j != int(j):
        raise ValueError("index must be a nonnegative integer")
    j = int(j)
    alpha_frac = space.alpha_exact
    exact = None
    if alpha_frac is not None:
        b_exact = _recursion_coeffs(j, alpha_frac)
        if any(c != 0 for c in eigen_residual(b_exact, j, alpha_frac)):
            raise AssertionError("eigenrelation residual not identically zero")
        exact = tuple(b_exact)
        b = np.array([float(c) for c in b_exact])
    else:
        b = np.array([float(c) for c in _recursion_coeffs(j, float(space.alpha))])
    norm2 = _inner_even(b, b, space)
    coeffs = b / math.sqrt(norm2)
    return EigenPoly(j=j, lam=j - params.k, coeffs=coeffs,
                     alpha=space.alpha, coeffs_exact=exact)


def _inner_even(bp: np.ndarray, bq: np.ndarray, space: WeightedSpace) -> float:
    """Inner product of even polynomials given by y**(2i) coefficients."""
    acc = 0.0
    for i, ci in enumerate(bp):
        for l, cl in enumerate(bq):
            acc += ci * cl * gauss_moment(space.alpha + 2 * (i + l))
    return acc


def inner_product(P, Q, space: WeightedSpace) -> float:
    """int_0^inf rho(y) P(y) Q(y) dy as a finite sum of Gaussian moments.

    P, Q are EigenPoly instances or coefficient sequences in plain powers
    of y (ascending).
    """
    cp = P.full_coeffs() if isinstance(P, EigenPoly) else np.asarray(P, dtype=float)
    cq = Q.full_coeffs() if isinstance(Q, EigenPoly) else np.asarray(Q, dtype=float)
    prod = np.convolve(cp, cq)
    return float(sum(c * gauss_moment(space.alpha + m)
                     for m, c in enumerate(prod) if c != 0.0))


def gram_matrix(jmax: int, space: WeightedSpace, params: ModelParams) -> np.ndarray:
    """Gram matrix of {phi_0..phi_jmax}; exact cancellation when p rational.

    With rational alpha the unnormalized pairings are formed over the
    rationals using reduced moments (the shared factor gauss_moment(alpha)
    divides out of the normalized entries), so off-diagonal entries vanish
    identically, not just to rounding.
    """
    polys = [eigenpoly(j, space, params) for j in range(jmax + 1)]
    alpha_frac = space.alpha_exact
    G = np.eye(jmax + 1)
    if alpha_frac is not None and all(p.coeffs_exact is not None for p in polys):
        raw = {}
        for a in range(jmax + 1):
            for b in range(a, jmax + 1):
                ca, cb = polys[a].coeffs_exact, polys[b].coeffs_exact
                acc = Fraction(0)
                for i, ci in enumerate(ca):
                    for l, cl in enumerate(cb):
                        acc += ci * cl * _reduced_moment(i + l, alpha_frac)
                raw[a, b] = acc
        for a in range(jmax + 1):
            for b in range(a, jmax + 1):
                num = raw[a, b]
                if a == b:
                    G[a, a] = 1.0
                else:
                    val = num * num / (raw[a, a] * raw[b, b])
                    G[a, b] = G[b, a] = math.copysign(math.sqrt(float(val)), float(num))
        return G
    for a in range(jmax + 1):
        for b in range(a, jmax + 1):
            v = _inner_even(polys[a].coeffs, polys[b].coeffs, space)
            G[a, b] = G[b, a] = v
    return G


def positive_zeros(phi: EigenPoly, tol: float = 1e-12) -> np.ndarray:
    """The j simple positive roots of phi_j, strictly increasing.

    Sign-change bracketing on a scan up to the Hermite-type bound
    2*sqrt(2j+alpha)+4 followed by bisection.  A count mismatch signals a
    construction bug and raises.
    """
    j = phi.j
    if j == 0:
        return np.array([])
    ymax = 2.0 * math.sqrt(2 * j + phi.alpha) + 4.0
    npts = 512
    for _ in range(6):
        ys = np.linspace(1e-9, ymax, npts)
        vals = phi(ys)
        sgn = np.sign(vals)
        idx = np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]
        if len(idx) == j:
            break
        npts *= 4
    else:
        raise AssertionError(
            f"found {len(idx)} sign changes for phi_{j}, expected {j}")
    roots = []
    for i in idx:
        lo, hi = ys[i], ys[i + 1]
        flo = phi(lo)
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            fmid = phi(mid)
            if flo * fmid <= 0:
                hi = mid
            else:
                lo, flo = mid, fmid
        roots.append(0.5 * (lo + hi))
    roots = np.array(roots)
    d = phi.deriv(roots)
    if np.any(np.abs(d) < 1e-10 * np.max(np.abs(phi.coeffs))):
        raise AssertionError(f"degenerate root detected for phi_{j}")
    return roots
