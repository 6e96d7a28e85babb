"""hjlab: numerics for gradient blow-up / boundary-condition recovery in the
viscous Hamilton-Jacobi equation u_t = u_xx + |u_x|^p (p > 2), plus the
3-strand positive-braid rewriting engine used to certify intersection
bookkeeping.
"""

__version__ = "0.1.0"

from .steady import make_params, steady_U, steady_U_a, ModelParams  # noqa: F401
from .grids import Grid, GridFunction  # noqa: F401
