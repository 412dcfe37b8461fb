import math

import numpy as np
import pytest

from ncelm.config import NcelmConfig
from ncelm.dataio import StandardizationParams
from ncelm.elm import BaseLearner, HiddenLayer, elm_solve, learner_output
from ncelm.ensemble import (
    EnsembleState,
    TrainedEnsemble,
    accuracy,
    apply_map,
    ensemble_output,
    init_state,
    make_map,
    ncelm_step,
    train,
)
from ncelm.exceptions import ConfigError

from conftest import dense_solve, random_dataset


def scalar_state(values):
    """State with S learners, each H = [[1]] and beta = [[v]]."""
    S = len(values)
    H = np.ones((1, 1))
    factors = tuple((np.array([[math.sqrt(2.0)]]), True) for _ in range(S))
    layers = tuple(HiddenLayer(np.zeros((1, 1)), np.zeros(1)) for _ in range(S))
    betas = np.array(values, dtype=float).reshape(S, 1, 1)
    return EnsembleState(layers, betas, (H,) * S, factors)


def penalized_objective(beta, H, y, F, C, lam):
    out = H @ beta
    return beta @ beta + C * np.sum((out - y) ** 2) + lam * (out @ F) ** 2


def test_config_validation():
    with pytest.raises(ConfigError):
        NcelmConfig(C=0)
    with pytest.raises(ConfigError):
        NcelmConfig(lam=-1)
    with pytest.raises(ConfigError):
        NcelmConfig(max_iterations=0)
    with pytest.raises(ConfigError):
        NcelmConfig(activation="relu")
    cfg = NcelmConfig(tolerance=math.inf)
    assert NcelmConfig.from_dict(cfg.to_dict()) == cfg


def test_ensemble_output_cases(rng):
    np.testing.assert_array_equal(ensemble_output(scalar_state([0.0, 0.0])), [[0.0]])
    np.testing.assert_array_equal(ensemble_output(scalar_state([2.0, 4.0])), [[3.0]])
    d = random_dataset(rng, 12, 3, 2)
    cfg = NcelmConfig(S=1, D=4)
    st = init_state(d.features, 2, cfg).with_betas(rng.normal(size=(1, 4, 2)))
    np.testing.assert_array_equal(ensemble_output(st), st.hidden_outputs[0] @ st.betas[0])


def test_scalar_map_value():
    st = scalar_state([0.0])
    cfg = NcelmConfig(S=1, D=1, C=1.0, lam=1.0)
    beta = apply_map(st, np.array([[1.0]]), np.array([[1.0]]), cfg)
    # (1/C + 1 + lam/C * 1)^-1 * 1 = 1/3
    np.testing.assert_allclose(beta[0], [[1.0 / 3.0]], rtol=1e-15)


@pytest.mark.parametrize("lam", [0.0, 1e-3, 0.5])
def test_first_step_is_plain_elm(rng, lam):
    d = random_dataset(rng, 30, 4, 3)
    cfg = NcelmConfig(S=3, D=6, C=2.0, lam=lam)
    st = ncelm_step(init_state(d.features, 3, cfg), d.targets, cfg)
    assert st.iteration == 1
    for s in range(3):
        np.testing.assert_array_equal(st.betas[s], elm_solve(st.hidden_outputs[s], d.targets, 2.0))


def test_lambda_zero_step_ignores_F(rng):
    d = random_dataset(rng, 25, 3, 2)
    cfg = NcelmConfig(S=2, D=5, lam=0.0)
    st = init_state(d.features, 2, cfg).with_betas(rng.normal(size=(2, 5, 2)))
    nxt = ncelm_step(st, d.targets, cfg)
    for s in range(2):
        np.testing.assert_array_equal(nxt.betas[s], elm_solve(st.hidden_outputs[s], d.targets, 1.0))


@pytest.mark.parametrize("lam", [1e-4, 1e-2, 1.0])
def test_map_matches_dense_oracle(rng, lam):
    d = random_dataset(rng, 30, 4, 3)
    cfg = NcelmConfig(S=3, D=8, C=3.0, lam=lam)
    st = init_state(d.features, 3, cfg)
    F = rng.normal(size=(30, 3))
    got = apply_map(st, d.targets, F, cfg)
    for s in range(3):
        want = dense_solve(st.hidden_outputs[s], d.targets, F, 3.0, lam)
        np.testing.assert_allclose(got[s], want, rtol=1e-9, atol=1e-12)


def test_step_is_objective_stationary_point(rng):
    d = random_dataset(rng, 18, 3, 3)
    cfg = NcelmConfig(S=2, D=5, C=1.5, lam=0.05)
    st = init_state(d.features, 3, cfg).with_betas(rng.normal(size=(2, 5, 3)))
    F = ensemble_output(st)
    nxt = ncelm_step(st, d.targets, cfg)
    h = 1e-5
    for s in range(2):
        H = st.hidden_outputs[s]
        for j in range(3):
            beta = nxt.betas[s][:, j]
            for k in range(5):
                e = np.zeros(5)
                e[k] = h
                g = (penalized_objective(beta + e, H, d.targets[:, j], F[:, j], 1.5, 0.05)
                     - penalized_objective(beta - e, H, d.targets[:, j], F[:, j], 1.5, 0.05)) / (2 * h)
                assert abs(g) < 1e-6


def test_synchronous_update_order_independent(rng):
    d = random_dataset(rng, 40, 3, 2)
    cfg = NcelmConfig(S=4, D=6, lam=0.01)
    st = ncelm_step(init_state(d.features, 2, cfg), d.targets, cfg)
    perm = [2, 0, 3, 1]
    permuted = EnsembleState(tuple(st.layers[p] for p in perm), st.betas[perm],
                             tuple(st.hidden_outputs[p] for p in perm),
                             tuple(st.factors[p] for p in perm), st.iteration)
    a = ncelm_step(st, d.targets, cfg).betas
    b = ncelm_step(permuted, d.targets, cfg).betas
    for i, p in enumerate(perm):
        np.testing.assert_allclose(b[i], a[p], rtol=1e-13, atol=1e-15)


def test_threads_give_identical_results(rng, monkeypatch):
    d = random_dataset(rng, 50, 4, 2)
    cfg = NcelmConfig(S=4, D=8, lam=1e-3, max_iterations=4)
    monkeypatch.setenv("NCELM_THREADS", "1")
    serial = train(d, cfg)
    monkeypatch.setenv("NCELM_THREADS", "0")
    parallel = train(d, cfg)
    np.testing.assert_array_equal(serial.betas, parallel.betas)


def test_train_stopping_rules(rng):
    d = random_dataset(rng, 40, 3, 2)
    one = train(d, NcelmConfig(S=2, D=5, lam=0.1, max_iterations=1))
    assert len(one.trace) == 1
    st = init_state((d.features - d.features.mean(0)) / d.features.std(0), 2,
                    NcelmConfig(S=2, D=5))
    for s in range(2):
        np.testing.assert_allclose(one.betas[s], elm_solve(st.hidden_outputs[s], d.targets, 1.0),
                                   rtol=1e-12, atol=1e-14)
    inf_tol = train(d, NcelmConfig(S=2, D=5, lam=0.1, max_iterations=50, tolerance=math.inf))
    assert len(inf_tol.trace) == 1
    tol = train(d, NcelmConfig(S=2, D=5, lam=1e-3, max_iterations=200, tolerance=1e-20))
    assert len(tol.trace) < 200
    assert tol.trace[-1].d_l2 <= 1e-20
    assert tol.report().converged


def test_residual_decreases(qsar_like):
    for lam in (1e-6, 1e-5, 1e-4):
        e = train(qsar_like, NcelmConfig(lam=lam, max_iterations=10), diagnostics=False)
        # d(B_9, B_10) < d(B_1, B_2)
        assert e.trace[9].d_l2 < e.trace[1].d_l2


def test_predict_tie_breaks_and_accuracy():
    layer = HiddenLayer(np.zeros((2, 1)), np.zeros(1))  # H = 0.5 everywhere
    cfg = NcelmConfig(S=1, D=1)
    std = StandardizationParams.identity(2)
    e = TrainedEnsemble([BaseLearner(layer, np.array([[1.8, 0.2]]))], cfg, std, ("a", "b"))
    np.testing.assert_allclose(e.decision_function(np.zeros((1, 2))), [[0.9, 0.1]])
    assert e.predict(np.zeros((3, 2))) == ["a", "a", "a"]
    tie = TrainedEnsemble([BaseLearner(layer, np.array([[1.0, 1.0]]))], cfg, std, ("a", "b"))
    assert tie.predict(np.zeros((1, 2))) == ["a"]

    from ncelm.dataio import Dataset
    truth = Dataset(np.zeros((4, 2)), np.array([[1, 0], [1, 0], [0, 1], [0, 1]]), ("a", "b"))
    assert accuracy(e, truth) == 0.5
    assert accuracy(e, Dataset(np.zeros((2, 2)), np.array([[1, 0], [1, 0]]), ("a", "b"))) == 1.0
    assert accuracy(e, Dataset(np.zeros((2, 2)), np.array([[0, 1], [0, 1]]), ("a", "b"))) == 0.0


def test_single_learner_predicts_like_learner(rng):
    d = random_dataset(rng, 60, 3, 3)
    e = train(d, NcelmConfig(S=1, D=10, lam=0.01, max_iterations=3))
    X = rng.normal(size=(20, 3))
    scores = learner_output(e.learners[0], e.transform(X))
    assert e.predict(X) == [d.class_labels[i] for i in scores.argmax(axis=1)]


def test_model_roundtrip(tmp_path, rng):
    d = random_dataset(rng, 50, 4, 3)
    e = train(d, NcelmConfig(S=3, D=7, lam=1e-3, max_iterations=3, seed=11))
    e.extra["split"] = {"test_fraction": 0.25, "seed": 11}
    path = tmp_path / "m.json"
    e.save(path)
    back = TrainedEnsemble.load(path)
    np.testing.assert_array_equal(back.betas, e.betas)
    np.testing.assert_array_equal(back.decision_function(d.features), e.decision_function(d.features))
    assert back.config == e.config and back.class_labels == e.class_labels
    assert back.extra["split"]["seed"] == 11


def test_make_map_matches_step(rng):
    d = random_dataset(rng, 30, 3, 2)
    cfg = NcelmConfig(S=3, D=5, lam=0.02)
    st = ncelm_step(init_state(d.features, 2, cfg), d.targets, cfg)
    T = make_map(st, d.targets, cfg)
    np.testing.assert_array_equal(T(st.betas), ncelm_step(st, d.targets, cfg).betas)
