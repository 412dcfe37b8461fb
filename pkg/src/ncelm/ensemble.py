"""Negative correlation ELM ensemble trained as a fixed-point iteration.

The stacked output weights ``B`` (one D x J matrix per learner) are updated
synchronously: the ensemble output ``F = mean_s H_s beta_s`` is frozen, then
every learner solves

    (I/C + H'H + (lam/C) H'F_j F_j'H) beta_j = H'Y_j

for each class column ``j``. Iteration starts from ``B_0 = 0`` so the first
iterate is the plain ridge ELM of each learner.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import linalg

from .config import NcelmConfig
from .convergence import (
    ConvergenceTrace,
    build_trace,
    diagnostics_report,
    distance_l1,
    distance_l2,
    iteration_diagnostics,
    spectral_norm,
    summarize_detail,
)
from .convergence.trace import IterationRecord
from .dataio import StandardizationParams, apply_standardization, fit_standardization
from .elm import BaseLearner, hidden_map, make_hidden_layer, ridge_factor
from .exceptions import DataError, NumericalDegeneracyError

log = logging.getLogger(__name__)

MODEL_FORMAT = "ncelm-model/1"


def thread_count():
    """Worker threads for per-learner solves, from ``NCELM_THREADS``.

    Unset or ``1`` runs serially; ``0`` means one thread per CPU.
    """
    raw = os.environ.get("NCELM_THREADS", "1").strip() or "1"
    try:
        n = int(raw)
    except ValueError:
        log.warning("ignoring non-integer NCELM_THREADS=%r", raw)
        return 1
    if n <= 0:
        return os.cpu_count() or 1
    return n


def _map_learners(fn, S):
    n = min(thread_count(), S)
    if n <= 1:
        return [fn(s) for s in range(S)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, range(S)))


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Stacked weights ``betas`` (S, D, J) plus cached training-set quantities.

    ``factors[s]`` is the Cholesky factor of ``I/C + H_s'H_s``, which does
    not change across iterations.
    """

    layers: tuple
    betas: np.ndarray
    hidden_outputs: tuple
    factors: tuple
    iteration: int = 0

    @property
    def S(self):
        return len(self.layers)

    @property
    def learners(self):
        return [BaseLearner(layer, beta) for layer, beta in zip(self.layers, self.betas)]

    def with_betas(self, betas, iteration=None):
        return replace(self, betas=np.asarray(betas, dtype=float),
                       iteration=self.iteration if iteration is None else iteration)


def init_state(features, n_classes, cfg):
    """Hidden layers (seed ``cfg.seed + s``), their outputs, and ``B_0 = 0``."""
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise DataError("training set is empty")
    K = X.shape[1]
    layers = tuple(make_hidden_layer(cfg.seed + s, K, cfg.D, cfg.activation)
                   for s in range(cfg.S))
    hidden = tuple(hidden_map(layer, X) for layer in layers)
    factors = []
    for s, H in enumerate(hidden):
        try:
            factors.append(ridge_factor(H, cfg.C))
        except NumericalDegeneracyError as exc:
            raise NumericalDegeneracyError(str(exc), s=s, r=0, lam=cfg.lam, C=cfg.C) from exc
    betas = np.zeros((cfg.S, cfg.D, n_classes))
    return EnsembleState(layers, betas, hidden, tuple(factors), 0)


def stacked_output(hidden_outputs, betas):
    """``(1/S) sum_s H_s beta_s``, summed in learner order."""
    F = hidden_outputs[0] @ betas[0]
    for H, beta in zip(hidden_outputs[1:], betas[1:]):
        F = F + H @ beta
    return F / len(hidden_outputs)


def ensemble_output(state):
    return stacked_output(state.hidden_outputs, state.betas)


def _solve_learner(H, factor, Y, F, kappa):
    # Sherman-Morrison per column on top of the shared factor of I/C + H'H
    X = linalg.cho_solve(factor, H.T @ Y)
    U = H.T @ F
    Z = linalg.cho_solve(factor, U)
    num = kappa * np.einsum("dj,dj->j", U, X)
    den = 1.0 + kappa * np.einsum("dj,dj->j", U, Z)
    return X - Z * (num / den)


def apply_map(state, Y, F, cfg):
    """Weights solving every learner's system at a fixed ensemble output ``F``.

    Returns an (S, D, J) array; ``state.betas`` is not used.
    """
    Y = np.asarray(Y, dtype=float)
    F = np.asarray(F, dtype=float)
    kappa = cfg.lam / cfg.C

    def solve(s):
        beta = _solve_learner(state.hidden_outputs[s], state.factors[s], Y, F, kappa)
        if not np.all(np.isfinite(beta)):
            raise NumericalDegeneracyError(
                "non-finite output weights", s=s, r=state.iteration + 1,
                lam=cfg.lam, C=cfg.C)
        return beta

    return np.stack(_map_learners(solve, state.S))


def make_map(state, Y, cfg):
    """The map ``T`` on stacked weights, as a callable ``B -> T(B)``."""
    def T(betas):
        F = stacked_output(state.hidden_outputs, np.asarray(betas, dtype=float))
        return apply_map(state, Y, F, cfg)
    return T


def ncelm_step(state, Y, cfg):
    """One synchronous update: freeze ``F`` from the current weights, re-solve all learners."""
    F = ensemble_output(state)
    return state.with_betas(apply_map(state, Y, F, cfg), state.iteration + 1)


@dataclass(eq=False)
class TrainedEnsemble:
    learners: list
    config: NcelmConfig
    standardization: StandardizationParams
    class_labels: tuple
    trace: ConvergenceTrace = None
    extra: dict = field(default_factory=dict)

    @property
    def n_features(self):
        return self.learners[0].hidden.n_inputs

    @property
    def n_classes(self):
        return len(self.class_labels)

    @property
    def betas(self):
        return np.stack([l.beta for l in self.learners])

    def transform(self, features):
        X = np.asarray(features, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DataError(
                f"model expects {self.n_features} features, got shape {X.shape}")
        return apply_standardization(X, self.standardization)

    def hidden_outputs(self, features):
        Xs = self.transform(features)
        return tuple(hidden_map(l.hidden, Xs) for l in self.learners)

    def decision_function(self, features):
        """Ensemble scores, shape (N, J): the mean of learner outputs."""
        return stacked_output(self.hidden_outputs(features), self.betas)

    def predict(self, features):
        """Class label of the highest ensemble score (lowest index on ties)."""
        idx = np.argmax(self.decision_function(features), axis=1)
        return [self.class_labels[i] for i in idx]

    def state_for(self, features):
        """An :class:`EnsembleState` over ``features`` holding the stored weights."""
        hidden = self.hidden_outputs(features)
        factors = tuple(ridge_factor(H, self.config.C) for H in hidden)
        layers = tuple(l.hidden for l in self.learners)
        n_iter = len(self.trace) if self.trace is not None else 0
        return EnsembleState(layers, self.betas, hidden, factors, n_iter)

    def report(self):
        return diagnostics_report(self.trace, self.config.tolerance, self.config.lam)

    def to_dict(self):
        d = {
            "format": MODEL_FORMAT,
            "config": self.config.to_dict(),
            "standardization": self.standardization.to_dict(),
            "class_labels": list(self.class_labels),
            "learners": [l.to_dict() for l in self.learners],
        }
        d.update(self.extra)
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            cfg = NcelmConfig.from_dict(d["config"])
            learners = [BaseLearner.from_dict(x) for x in d["learners"]]
            std = StandardizationParams.from_dict(d["standardization"])
            labels = tuple(d["class_labels"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed model: {exc}") from exc
        if len(learners) != cfg.S:
            raise DataError(f"model lists {len(learners)} learners but config has S={cfg.S}")
        extra = {k: v for k, v in d.items()
                 if k not in ("format", "config", "standardization", "class_labels", "learners")}
        return cls(learners, cfg, std, labels, None, extra)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.is_file():
            raise DataError(f"no such model file: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: invalid JSON: {exc}") from exc


def _record_quantities(state, prev_betas, F_hat_U, F_hat_V, F_V, cfg, grams, H_norms,
                       diagnostics):
    d_total, per = distance_l2(prev_betas, state.betas)
    raw = {"per_learner_d": per, "d_l1": distance_l1(prev_betas, state.betas)}
    if diagnostics:
        detail = iteration_diagnostics(state.hidden_outputs, F_hat_U, F_hat_V, F_V,
                                       cfg.C, cfg.lam, grams, H_norms)
        delta, lbp, etas, ok = summarize_detail(detail)
        raw.update(delta_norm=delta, lambda_bound_prime=lbp, eta=etas,
                   bound_applicable=ok, detail=detail)
    return d_total, raw


def train(data, cfg, standardization="fit", diagnostics=True):
    """Fit the ensemble by fixed-point iteration from ``B_0 = 0``.

    Parameters
    ----------
    data : Dataset
        Raw (unstandardized) training data.
    cfg : NcelmConfig
    standardization : "fit", None or StandardizationParams
        ``"fit"`` learns feature standardization on ``data``; ``None``
        uses the features as given.
    diagnostics : bool
        Also record the per-iteration bound quantities (delta norms, eta,
        lambda_bound'). Distances are always recorded.

    Iterates until ``max_iterations`` or until the squared L2 distance
    between consecutive iterates is ``<= tolerance``.
    """
    if standardization == "fit":
        params = fit_standardization(data.features)
    elif standardization is None:
        params = StandardizationParams.identity(data.n_features)
    else:
        params = standardization
    X = apply_standardization(data.features, params)
    Y = data.targets
    state = init_state(X, data.n_classes, cfg)
    grams = H_norms = None
    if diagnostics:
        grams = [H.T @ H for H in state.hidden_outputs]
        H_norms = [spectral_norm(H) for H in state.hidden_outputs]

    zero = np.zeros_like(Y)
    F_prev2, F_prev = zero, zero  # F_(r-2), F_(r-1)
    history = []
    for r in range(1, cfg.max_iterations + 1):
        prev_betas = state.betas
        try:
            state = state.with_betas(apply_map(state, Y, F_prev, cfg), r)
        except NumericalDegeneracyError as exc:
            exc.context.setdefault("r", r)
            raise
        F_curr = ensemble_output(state)
        d_total, raw = _record_quantities(state, prev_betas, F_prev2, F_prev, F_curr,
                                          cfg, grams, H_norms, diagnostics)
        history.append(raw)
        log.debug("r=%d d_l2=%.6g d_l1=%.6g", r, d_total, raw["d_l1"])
        F_prev2, F_prev = F_prev, F_curr
        if d_total <= cfg.tolerance:
            break
    trace = build_trace(history, cfg)
    return TrainedEnsemble(state.learners, cfg, params, data.class_labels, trace)


def accuracy(ensemble, data):
    """Fraction of patterns whose predicted label matches the true one."""
    pred = ensemble.predict(data.features)
    truth = data.labels
    return sum(p == t for p, t in zip(pred, truth)) / len(truth)


def first_below(values, threshold):
    """1-based index of the first value strictly below ``threshold``, else None."""
    for i, v in enumerate(values, start=1):
        if v < threshold:
            return i
    return None


__all__ = [
    "EnsembleState", "TrainedEnsemble", "IterationRecord", "accuracy", "apply_map",
    "ensemble_output", "first_below", "init_state", "make_map", "ncelm_step",
    "stacked_output", "train", "thread_count",
]
