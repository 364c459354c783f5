"""Small dense linear-algebra helpers used by the filters and optimizers."""

import warnings

import numpy as np
from scipy import linalg

from .errors import SingularityError

COND_WARN = 1e12


def symmetrize(A):
    return 0.5 * (A + A.T)


def max_abs(A):
    """Largest absolute entry; 0 for empty arrays."""
    A = np.asarray(A)
    return float(np.max(np.abs(A))) if A.size else 0.0


def cho_factor_spd(S, what="matrix"):
    """Cholesky-factor a symmetric positive-definite matrix or raise SingularityError."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    try:
        c = linalg.cho_factor(S, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        cond = _cond(S)
        raise SingularityError(f"{what} is not positive-definite (cond ~ {cond:.3g})",
                               condition=cond) from exc
    # cho_factor accepts tiny pivots; catch the numerically singular case explicitly
    d = np.abs(np.diag(c[0]))
    if S.size and (d.min() == 0.0 or (d.min() / d.max()) ** 2 < 1e-300):
        cond = _cond(S)
        raise SingularityError(f"{what} is singular (cond ~ {cond:.3g})", condition=cond)
    if S.size and (d.max() / d.min()) ** 2 > COND_WARN:
        warnings.warn(f"{what} is ill-conditioned (cond ~ {(d.max() / d.min()) ** 2:.3g})",
                      RuntimeWarning, stacklevel=3)
    return c


def spd_solve(S, B, what="matrix"):
    """Solve S X = B for symmetric positive-definite S."""
    c = cho_factor_spd(S, what)
    return linalg.cho_solve(c, np.asarray(B, dtype=float), check_finite=False)


def spd_inv(S, what="matrix"):
    S = np.atleast_2d(np.asarray(S, dtype=float))
    return symmetrize(spd_solve(S, np.eye(S.shape[0]), what))


def _cond(S):
    try:
        return float(np.linalg.cond(S))
    except np.linalg.LinAlgError:
        return float("inf")
