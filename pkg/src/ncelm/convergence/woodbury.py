"""Woodbury form of one map application.

For one learner and one class column, the system solved at ensemble output
``F^`` is ``A = I/C + H'H + (lam/C) H'F^F^'H``. Moving the ensemble output
from ``F^`` to ``F`` adds ``(lam/C) H' delta H`` with the rank-2 matrix
``delta = F F' - F^ F^'``. The Woodbury identity gives

    (A + (lam/C) H' delta H)^{-1} = A^{-1} - Delta A^{-1},
    Delta = A^{-1} H' (C/lam I + delta H A^{-1} H')^{-1} delta H.

``delta`` is kept factored as ``Z S Z'`` with ``Z = [F, F^]`` and
``S = diag(1, -1)``, so the N x N inner inverse collapses to a 2 x 2 solve:
``Delta = A^{-1} P (C/lam I + S P'A^{-1}P)^{-1} S P'`` with ``P = H'Z``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..exceptions import NumericalDegeneracyError

_SIGNS = np.array([1.0, -1.0])


def spd_solver(A):
    """Return ``solve(b)`` computing ``A^{-1} b`` by Cholesky."""
    try:
        factor = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalDegeneracyError("matrix A is not positive definite") from exc
    return lambda b: linalg.cho_solve(factor, b)


def system_matrix(H, F_hat, C, lam, gram=None):
    """``I/C + H'H + (lam/C) H'F^F^'H`` for a single column ``F_hat`` (length N)."""
    if gram is None:
        gram = H.T @ H
    p = H.T @ np.asarray(F_hat, dtype=float)
    A = gram + (lam / C) * np.outer(p, p)
    A[np.diag_indices_from(A)] += 1.0 / C
    return A


@dataclass(frozen=True)
class RankTwoDelta:
    """``delta = F F' - F^ F^'`` stored by its two columns."""

    F: np.ndarray
    F_hat: np.ndarray

    def dense(self):
        return np.outer(self.F, self.F) - np.outer(self.F_hat, self.F_hat)

    @property
    def Z(self):
        return np.column_stack([self.F, self.F_hat])


def woodbury_delta(H, A_inv_apply, delta, C, lam):
    """The D x D correction ``Delta`` of one map application.

    Parameters
    ----------
    H : ndarray (N, D)
    A_inv_apply : callable
        ``b -> A^{-1} b`` for the system matrix at the starting output.
    delta : RankTwoDelta
    C, lam : float
        ``lam`` must be positive; the correction is undefined at 0.
    """
    if not lam > 0:
        raise ValueError("Delta is undefined for lambda <= 0")
    if np.array_equal(delta.F, delta.F_hat):
        return np.zeros((H.shape[1], H.shape[1]))
    P = H.T @ delta.Z  # D x 2
    AiP = A_inv_apply(P)  # D x 2
    SPt = _SIGNS[:, None] * P.T  # 2 x D
    inner = (C / lam) * np.eye(2) + SPt @ AiP
    try:
        core = np.linalg.solve(inner, SPt)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError(
            "inner Woodbury matrix is singular", lam=lam, C=C,
            norm_F=float(np.linalg.norm(delta.F)),
            norm_F_hat=float(np.linalg.norm(delta.F_hat))) from exc
    return AiP @ core


def updated_inverse(A_inv, Delta):
    """``A^{-1} - Delta A^{-1}``."""
    return A_inv - Delta @ A_inv


def map_via_woodbury(U_col, Delta):
    """``T(U) = U - Delta U`` for one learner/class column."""
    return U_col - Delta @ U_col
