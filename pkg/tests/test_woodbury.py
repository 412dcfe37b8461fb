import numpy as np
import pytest

from ncelm.convergence import (
    RankTwoDelta,
    map_via_woodbury,
    spd_solver,
    system_matrix,
    updated_inverse,
    woodbury_delta,
)

from conftest import dense_solve


def instance(rng, N, D, C, lam):
    H = rng.uniform(size=(N, D))
    F_hat = rng.normal(size=N)
    F = rng.normal(size=N)
    A = system_matrix(H, F_hat, C, lam)
    return H, F_hat, F, A


def test_system_matrix_definition(rng):
    H = rng.uniform(size=(7, 3))
    F = rng.normal(size=7)
    want = np.eye(3) / 2.0 + H.T @ H + (0.3 / 2.0) * H.T @ np.outer(F, F) @ H
    np.testing.assert_allclose(system_matrix(H, F, 2.0, 0.3), want, rtol=1e-13)


def test_zero_delta_gives_zero_correction(rng):
    H, F_hat, _, A = instance(rng, 6, 3, 1.0, 0.01)
    Delta = woodbury_delta(H, spd_solver(A), RankTwoDelta(F_hat, F_hat), 1.0, 0.01)
    np.testing.assert_array_equal(Delta, np.zeros((3, 3)))


def test_small_instance_inverse_identity(rng):
    C, lam = 1.0, 0.5
    H, F_hat, F, A = instance(rng, 4, 3, C, lam)
    delta = RankTwoDelta(F, F_hat)
    Delta = woodbury_delta(H, spd_solver(A), delta, C, lam)
    direct = np.linalg.inv(A + (lam / C) * H.T @ delta.dense() @ H)
    np.testing.assert_allclose(updated_inverse(np.linalg.inv(A), Delta), direct, rtol=1e-9, atol=1e-12)


def test_dense_inner_inverse_form(rng):
    C, lam = 2.0, 0.1
    H, F_hat, F, A = instance(rng, 5, 3, C, lam)
    d = RankTwoDelta(F, F_hat).dense()
    Ai = np.linalg.inv(A)
    dense = Ai @ H.T @ np.linalg.inv(C / lam * np.eye(5) + d @ H @ Ai @ H.T) @ d @ H
    got = woodbury_delta(H, spd_solver(A), RankTwoDelta(F, F_hat), C, lam)
    np.testing.assert_allclose(got, dense, rtol=1e-9, atol=1e-13)


def test_map_via_woodbury_matches_direct_solve(rng):
    C, lam = 1.0, 0.2
    H = rng.uniform(size=(8, 4))
    Y = np.eye(2)[rng.integers(0, 2, 8)]
    F_hat = rng.normal(size=(8, 2))
    U = dense_solve(H, Y, F_hat, C, lam)
    F_U = rng.normal(size=(8, 2))
    direct = dense_solve(H, Y, F_U, C, lam)
    for j in range(2):
        A = system_matrix(H, F_hat[:, j], C, lam)
        Delta = woodbury_delta(H, spd_solver(A), RankTwoDelta(F_U[:, j], F_hat[:, j]), C, lam)
        np.testing.assert_allclose(map_via_woodbury(U[:, j], Delta), direct[:, j], rtol=1e-9, atol=1e-12)


def test_lambda_must_be_positive(rng):
    H, F_hat, F, A = instance(rng, 4, 2, 1.0, 0.0)
    with pytest.raises(ValueError):
        woodbury_delta(H, spd_solver(A), RankTwoDelta(F, F_hat), 1.0, 0.0)


from hypothesis import given, settings, strategies as st  # noqa: E402


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), N=st.integers(1, 30), D=st.integers(1, 10),
       C=st.sampled_from([0.1, 1.0, 10.0]), lam=st.sampled_from([1e-6, 1e-3, 0.1, 1.0]))
def test_inverse_identity_random(seed, N, D, C, lam):
    rng = np.random.default_rng(seed)
    H, F_hat, F, A = instance(rng, N, D, C, lam)
    F = F_hat + rng.uniform(0, 0.5) * F
    delta = RankTwoDelta(F, F_hat)
    Delta = woodbury_delta(H, spd_solver(A), delta, C, lam)
    B = A + (lam / C) * H.T @ delta.dense() @ H
    got = updated_inverse(np.linalg.inv(A), Delta)
    # compare through the product with the perturbed matrix, scaled by its conditioning
    err = np.linalg.norm(got @ B - np.eye(D), 2)
    assert err <= 1e-9 * max(1.0, np.linalg.cond(B))
