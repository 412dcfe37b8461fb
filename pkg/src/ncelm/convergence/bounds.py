"""Sufficient-condition bounds on the diversity parameter lambda.

All matrix norms here are operator 2-norms. ``U`` quantities belong to the
earlier iterate and ``V`` quantities to the later one.
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from .metrics import spd_inverse_norm
from .woodbury import system_matrix

log = logging.getLogger(__name__)

GAMMA_LIMIT = 4.0
GAMMA_RTOL = 1e-8


def eta(A_inv_norm_U, A_inv_norm_V):
    """Ratio ``||A_U^{-1}|| / ||A_V^{-1}||``."""
    if not A_inv_norm_V > 0:
        raise ZeroDivisionError("||A_V^{-1}|| must be positive")
    return A_inv_norm_U / A_inv_norm_V


def gamma_eig(norm_delta_U, norm_delta_V):
    """Closed-form eigenvalue ``x y / (x + y)`` with ``x, y`` the squared norms.

    Arguments are the (unsquared) spectral norms of the two Woodbury
    corrections. Returns 0 when either norm is 0.
    """
    x = norm_delta_U ** 2
    y = norm_delta_V ** 2
    if x == 0.0 or y == 0.0:
        return 0.0
    return x * y / (x + y)


def gamma_pencil(norm_delta_U, norm_delta_V):
    """Largest finite eigenvalue of ``diag(x, y) w = g [[1, -1], [-1, 1]] w``.

    The right-hand matrix is singular, so the pencil always has one
    infinite eigenvalue; only finite ones are considered. Computed with a
    dense QZ solve, independently of :func:`gamma_eig`.
    """
    X = np.diag([norm_delta_U ** 2, norm_delta_V ** 2])
    Y = np.array([[1.0, -1.0], [-1.0, 1.0]])
    if not np.any(X):
        return 0.0
    w = linalg.eigvals(X, Y, homogeneous_eigvals=True)
    alpha, beta = w
    finite = np.abs(beta) > 1e-14 * np.maximum(np.abs(alpha), 1.0)
    if not finite.any():
        return 0.0
    vals = (alpha[finite] / beta[finite]).real
    return float(vals.max())


class GammaCheck(NamedTuple):
    gamma: float
    closed_form: float
    pencil: float
    agree: bool


def checked_gamma(norm_delta_U, norm_delta_V, rtol=GAMMA_RTOL):
    """Closed form cross-checked against the pencil; the pencil value wins."""
    closed = gamma_eig(norm_delta_U, norm_delta_V)
    pencil = gamma_pencil(norm_delta_U, norm_delta_V)
    agree = abs(closed - pencil) <= rtol * max(1.0, abs(pencil))
    if not agree:
        log.warning("gamma closed form %.17g disagrees with pencil %.17g "
                    "(norms %.6g, %.6g); using pencil", closed, pencil,
                    norm_delta_U, norm_delta_V)
    return GammaCheck(pencil, closed, pencil, agree)


def _sqrt_factor(eta_value, delta_U_norm, delta_V_norm):
    u2 = delta_U_norm ** 2
    v2 = delta_V_norm ** 2
    if u2 == 0.0 or v2 == 0.0:
        return math.inf
    return math.sqrt((eta_value * u2 + v2) / (u2 * v2))


def lambda_bound_prime(H_norm_term, penalty_norm_term, eta_value, delta_U_norm, delta_V_norm):
    """Computable upper bound on lambda.

    ``2 ||I + C H'H|| / (3 (1 + ||H'F^_U F^_U'H||)) * sqrt((eta |dU|^2 + |dV|^2) / (|dU|^2 |dV|^2))``

    Returns ``math.inf`` when either delta norm is zero.
    """
    factor = _sqrt_factor(eta_value, delta_U_norm, delta_V_norm)
    if math.isinf(factor):
        return math.inf
    return 2.0 * H_norm_term / (3.0 * (1.0 + penalty_norm_term)) * factor


def lambda_max(C, alpha_U, alpha_V, delta_U_norm, delta_V_norm):
    """Bound in terms of ``alpha = ||A^{-1}||^2 ||H||^4`` before eta substitution."""
    u = alpha_U * delta_U_norm ** 2
    v = alpha_V * delta_V_norm ** 2
    if u == 0.0 or v == 0.0:
        return math.inf
    return 2.0 * C / 3.0 * math.sqrt((u + v) / (u * v))


def correction_norm_bound(C, lam, alpha, delta_norm_value):
    """Upper estimate of ``||Delta||^2``; None when its denominator is not positive."""
    num = alpha * delta_norm_value ** 2
    if lam == 0.0:
        return 0.0
    den = (C / lam) ** 2 - num
    if den <= 0.0:
        return None
    return num / den


@dataclass(frozen=True)
class ImplicitBoundContext:
    """Data for evaluating the implicit lambda equation of one learner/class.

    The inverse norms and eta are recomputed at each candidate lambda from
    ``H`` and the two starting outputs; the delta norms are held fixed.
    """

    H: np.ndarray
    F_hat_U: np.ndarray
    F_hat_V: np.ndarray
    C: float
    delta_U_norm: float
    delta_V_norm: float

    def inverse_norms(self, lam):
        gram = self.H.T @ self.H
        nU = spd_inverse_norm(system_matrix(self.H, self.F_hat_U, self.C, lam, gram))
        nV = spd_inverse_norm(system_matrix(self.H, self.F_hat_V, self.C, lam, gram))
        return nU, nV


def h_implicit(lam, context):
    """Residual ``lam - 2C / (3 ||A_U^{-1}||) * sqrt(...)`` at candidate ``lam``."""
    nU, nV = context.inverse_norms(lam)
    factor = _sqrt_factor(eta(nU, nV), context.delta_U_norm, context.delta_V_norm)
    return lam - 2.0 * context.C / (3.0 * nU) * factor


class RootResult(NamedTuple):
    root: Optional[float]
    found: bool
    iterations: int
    bracket: tuple


def find_lambda_bound(context, lam_hi=1.0, max_doublings=60, max_iter=60, rtol=1e-10):
    """Locate the zero of :func:`h_implicit` by bracketing and bisection.

    ``lam_hi`` is doubled until ``H(lam_hi) > 0``; if no sign change appears
    within ``2**max_doublings`` scaling, a not-found result is returned.
    """
    f = lambda lam: h_implicit(lam, context)  # noqa: E731
    hi = float(lam_hi)
    f_hi = f(hi)
    doublings = 0
    while not f_hi > 0:
        if doublings >= max_doublings or math.isinf(f_hi) and f_hi < 0:
            return RootResult(None, False, 0, (0.0, hi))
        hi *= 2.0
        f_hi = f(hi)
        doublings += 1
    lo = 0.0 if doublings == 0 else hi / 2.0
    it = 0
    while it < max_iter and hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            hi = mid
        else:
            lo = mid
        it += 1
    return RootResult(0.5 * (lo + hi), True, it, (lo, hi))
