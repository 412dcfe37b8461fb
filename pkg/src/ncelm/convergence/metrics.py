"""Distances between stacked weight states and matrix norms.

A stacked state holds one D x J output-weight matrix per learner, as an
array of shape (S, D, J) or any sequence of equally shaped matrices.
"""

import warnings
from typing import NamedTuple

import numpy as np
from scipy import linalg


class ConvergenceWarning(UserWarning):
    pass


def _stack_pair(U, V):
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if U.shape != V.shape:
        raise ValueError(f"shape mismatch: {U.shape} vs {V.shape}")
    if U.ndim == 2:
        U, V = U[..., None], V[..., None]
    return U, V


def distance_l2(U, V):
    """Sum over learners of squared Frobenius distances.

    Returns ``(total, per_learner)`` where ``total == sum(per_learner)``
    (plain left-to-right float sum).
    """
    U, V = _stack_pair(U, V)
    per_learner = [float(np.sum((u - v) ** 2)) for u, v in zip(U, V)]
    return sum(per_learner), per_learner


def distance_l1(U, V):
    """Sum of absolute entry differences over all learners, classes and nodes."""
    U, V = _stack_pair(U, V)
    return float(np.sum(np.abs(U - V)))


def delta_outer(F_curr, F_prev, j):
    """Dense ``F_j F_j' - F^_j F^_j'`` (N x N). For tests and small N only."""
    a = np.asarray(F_curr, dtype=float)[:, j]
    b = np.asarray(F_prev, dtype=float)[:, j]
    return np.outer(a, a) - np.outer(b, b)


def delta_norm_vectors(a, b):
    """Spectral norm of ``a a' - b b'`` without forming it.

    With ``s = a + b`` and ``d = a - b`` the two nonzero eigenvalues are
    ``(s.d +- |s| |d|) / 2``, so the norm is ``(|s.d| + |s||d|) / 2``.
    This form stays accurate when ``a`` and ``b`` nearly coincide.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = a + b
    d = a - b
    return 0.5 * (abs(float(s @ d)) + float(np.linalg.norm(s)) * float(np.linalg.norm(d)))


def delta_norm(F_curr, F_prev, j):
    return delta_norm_vectors(np.asarray(F_curr)[:, j], np.asarray(F_prev)[:, j])


class PowerIterationResult(NamedTuple):
    value: float
    iterations: int
    converged: bool
    achieved_rtol: float


def power_iteration(M, rtol=1e-10, max_iter=10000):
    """Largest singular value of ``M`` by power iteration on ``M'M``.

    Starts from the normalized all-ones vector. If that start lies in the
    null space of ``M`` (e.g. rows summing to zero), one restart is made from
    the normalized ramp ``(1, 2, ..., n)``.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[None, :]
    n = M.shape[1]
    if n == 0 or not np.any(M):
        return PowerIterationResult(0.0, 0, True, 0.0)
    starts = (np.ones(n), np.arange(1.0, n + 1.0))
    for v in starts:
        v = v / np.linalg.norm(v)
        mu_old = None
        change = np.inf
        for it in range(1, max_iter + 1):
            w = M.T @ (M @ v)
            mu = float(v @ w)
            norm_w = float(np.linalg.norm(w))
            if norm_w == 0.0:
                break
            v = w / norm_w
            if mu_old is not None:
                change = abs(mu - mu_old) / mu
                if change <= rtol:
                    return PowerIterationResult(float(np.sqrt(mu)), it, True, change)
            mu_old = mu
        else:
            return PowerIterationResult(float(np.sqrt(mu)), max_iter, False, change)
    return PowerIterationResult(0.0, 0, True, 0.0)


def spectral_norm(M, rtol=1e-10, max_iter=10000):
    """Operator 2-norm of ``M``; warns with the achieved tolerance on cap."""
    res = power_iteration(M, rtol, max_iter)
    if not res.converged:
        warnings.warn(
            f"power iteration hit {max_iter} iterations; relative change "
            f"{res.achieved_rtol:.3g} > {rtol:.3g}", ConvergenceWarning, stacklevel=2)
    return res.value


def spd_inverse_norm(A):
    """``||A^{-1}||_2`` for symmetric positive-definite ``A`` (1 / smallest eigenvalue)."""
    lo = linalg.eigvalsh(A, subset_by_index=[0, 0])[0]
    if not lo > 0:
        raise linalg.LinAlgError(f"matrix is not positive definite (min eigenvalue {lo})")
    return 1.0 / lo
