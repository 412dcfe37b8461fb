"""Single-hidden-layer ELM base learner.

The hidden layer is a fixed random projection followed by an elementwise
activation; only the output weights ``beta`` (D x J) are fitted, by the
ridge closed form ``(I/C + H'H) beta = H'Y``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import expit

from .config import ACTIVATIONS
from .exceptions import DataError, NumericalDegeneracyError


_ACT = {"sigmoid": expit, "tanh": np.tanh}


def layer_rng(seed):
    """Generator used for hidden weights: PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class HiddenLayer:
    input_weights: np.ndarray  # K x D
    biases: np.ndarray  # D
    activation: str = "sigmoid"
    seed: int = None

    @property
    def n_inputs(self):
        return self.input_weights.shape[0]

    @property
    def n_hidden(self):
        return self.input_weights.shape[1]


def make_hidden_layer(seed, K, D, activation="sigmoid"):
    """Draw a hidden layer with weights and biases i.i.d. uniform on [-1, 1].

    Weights are drawn first (row-major K x D), then biases, from one
    PCG64 stream, so ``(seed, K, D)`` fully determines the layer.
    """
    if K < 1 or D < 1:
        raise DataError(f"hidden layer needs K >= 1 and D >= 1, got K={K}, D={D}")
    if activation not in ACTIVATIONS:
        raise DataError(f"unknown activation {activation!r}")
    rng = layer_rng(seed)
    W = rng.uniform(-1.0, 1.0, size=(K, D))
    b = rng.uniform(-1.0, 1.0, size=D)
    return HiddenLayer(W, b, activation, seed)


def hidden_map(layer, features):
    """Hidden-layer output matrix H, shape (N, D)."""
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != layer.n_inputs:
        raise DataError(
            f"layer expects {layer.n_inputs} features, got {X.shape[1]}")
    return _ACT[layer.activation](X @ layer.input_weights + layer.biases)


def ridge_factor(H, C):
    """Cholesky factor of ``I/C + H'H``.

    Returns the ``(c, lower)`` pair accepted by :func:`scipy.linalg.cho_solve`.
    """
    if not C > 0:
        raise DataError(f"C must be positive, got {C}")
    G = H.T @ H
    G[np.diag_indices_from(G)] += 1.0 / C
    try:
        return linalg.cho_factor(G, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericalDegeneracyError(
            "Cholesky factorization of I/C + H'H failed",
            C=C, cond=float(np.linalg.cond(G))) from exc


def elm_solve(H, Y, C):
    """Ridge output weights: solves ``(I/C + H'H) beta = H'Y``.

    All J target columns share one Cholesky factorization.

    Parameters
    ----------
    H : ndarray, shape (N, D)
    Y : ndarray, shape (N, J) or (N,)
    C : float
        Inverse regularization strength, ``> 0``.

    Returns
    -------
    beta : ndarray, shape (D, J) (or (D,) for vector ``Y``)
    """
    H = np.asarray(H, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if H.shape[0] != Y.shape[0]:
        raise DataError(f"H has {H.shape[0]} rows but Y has {Y.shape[0]}")
    factor = ridge_factor(H, C)
    return linalg.cho_solve(factor, H.T @ Y)


@dataclass(frozen=True, eq=False)
class BaseLearner:
    hidden: HiddenLayer
    beta: np.ndarray = field(default=None)  # D x J

    def to_dict(self):
        return {
            "seed": self.hidden.seed,
            "K": self.hidden.n_inputs,
            "D": self.hidden.n_hidden,
            "activation": self.hidden.activation,
            "beta": [float(v) for v in self.beta.ravel(order="C")],
            "J": int(self.beta.shape[1]),
        }

    @classmethod
    def from_dict(cls, d):
        layer = make_hidden_layer(int(d["seed"]), int(d["K"]), int(d["D"]), d["activation"])
        beta = np.asarray(d["beta"], dtype=float)
        J = int(d.get("J", beta.size // int(d["D"])))
        if beta.size != int(d["D"]) * J:
            raise DataError(f"beta has {beta.size} entries, expected D*J={int(d['D']) * J}")
        return cls(layer, beta.reshape(int(d["D"]), J))


def learner_output(learner, features):
    return hidden_map(learner.hidden, features) @ learner.beta
