import numpy as np
import pytest

from ncelm.dataio import Dataset, synthetic_dataset


def dense_solve(H, Y, F, C, lam):
    """Independent dense oracle: per-column ``np.linalg.solve`` of the penalized system."""
    D = H.shape[1]
    out = np.empty((D, Y.shape[1]))
    for j in range(Y.shape[1]):
        p = H.T @ F[:, j]
        A = np.eye(D) / C + H.T @ H + (lam / C) * np.outer(p, p)
        out[:, j] = np.linalg.solve(A, H.T @ Y[:, j])
    return out


def random_dataset(rng, N, K, J, name="rand"):
    X = rng.normal(size=(N, K))
    labels = np.arange(N) % J
    rng.shuffle(labels)
    Y = np.zeros((N, J))
    Y[np.arange(N), labels] = 1.0
    return Dataset(X, Y, tuple(f"c{j}" for j in range(J)), name)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def qsar_like():
    return synthetic_dataset()


@pytest.fixture
def tiny_csv(tmp_path):
    path = tmp_path / "tiny.csv"
    path.write_text("f1,f2,label\n1.0,2.0,a\n3.0,4.0,b\n5.0,6.5,a\n")
    return path
