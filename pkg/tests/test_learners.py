import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperimpute import learners as L
from hyperimpute.learners import (
    CATALOGUE, REGRESSION, DegenerateTarget, FitCounter, LearnerConfig, catalogue_for,
    classification, config_space, default_config, in_space, is_full_fit, native_budget,
    sample_params, set_resource,
)
from hyperimpute.metrics import auroc

ALL = ("ridge", "logistic", "tree", "forest", "boosting", "knn")


def _toy(n=80, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    y = X[:, 0] - 2 * X[:, 1] + 0.1 * rng.standard_normal(n)
    return X, y


def _ridge_oracle(x, y, alpha, x_new):
    """Closed-form ridge on the standardized regressor, unpenalized intercept."""
    mu, sd = x.mean(), x.std()
    z = (x - mu) / sd
    w = (z @ (y - y.mean())) / (z @ z + alpha)
    return y.mean() + w * (x_new - mu) / sd


def test_ridge_matches_closed_form():
    x = np.array([0.0, 1.0, 2.0, 3.0])
    y = 2 * x + 1
    model = L.fit(LearnerConfig("ridge", {"alpha": 1e-6}), REGRESSION, y, x[:, None])
    pred = L.predict(model, np.array([[4.0]]))[0]
    assert pred == pytest.approx(_ridge_oracle(x, y, 1e-6, 4.0), abs=1e-9)
    # the penalty shrinks the slope by a relative 2.5e-7 here
    assert abs(pred - 9.0) <= 2e-6


def test_ridge_default_alpha_and_knn_default_k():
    assert default_config("ridge").params["alpha"] == 1.0
    assert default_config("knn").params["n_neighbors"] == 5


@pytest.mark.parametrize("cls", ["ridge", "tree", "forest", "boosting", "knn"])
def test_constant_target_regression(cls):
    X, _ = _toy(30)
    y = np.full(30, 5.0)
    pred = L.predict(L.fit(default_config(cls), REGRESSION, y, X), X)
    if cls in ("tree", "forest", "boosting", "knn"):
        assert np.all(pred == 5.0)
    else:
        np.testing.assert_allclose(pred, 5.0, atol=1e-6)


def test_logistic_separable_auroc():
    x = np.concatenate([np.linspace(-3, -0.1, 20), np.linspace(0.1, 3, 20)])
    y = (x > 0).astype(int)
    task = classification(2)
    model = L.fit(default_config("logistic", task), task, y, x[:, None])
    proba = L.predict(model, x[:, None])
    assert auroc(proba[:, 1], y) == 1.0


def test_logistic_loss_is_monotone():
    X, y = _toy(100)
    labels = np.digitize(y, [-1, 1])
    task = classification(3)
    model = L.fit(LearnerConfig("logistic", {"C": 1e-2, "epochs": 50}), task, labels, X)
    losses = np.array(model.losses)
    assert losses.size == 50
    assert np.all(np.diff(losses) <= 1e-12)


@pytest.mark.parametrize("cls", ["logistic", "tree", "forest", "boosting", "knn"])
def test_probabilities_sum_to_one(cls):
    X, y = _toy(60)
    labels = np.digitize(y, [-1, 1])
    task = classification(3)
    P = L.predict(L.fit(default_config(cls, task), task, labels, X), X)
    assert P.shape == (60, 3)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)


def test_unbounded_tree_interpolates():
    X, y = _toy(50, seed=3)
    model = L.fit(LearnerConfig("tree", {"max_depth": None, "min_samples_leaf": 1}), REGRESSION, y, X)
    assert np.array_equal(L.predict(model, X), y)


@pytest.mark.parametrize("cls", ["ridge", "tree", "forest", "boosting", "knn"])
def test_empty_prediction(cls):
    X, y = _toy(20)
    model = L.fit(default_config(cls), REGRESSION, y, X)
    assert L.predict(model, np.zeros((0, 3))).shape[0] == 0


def test_fit_rejects_bad_input():
    X, y = _toy(10)
    with pytest.raises(DegenerateTarget):
        L.fit(default_config("ridge"), REGRESSION, y[:0], X[:0])
    with pytest.raises(ValueError):
        L.fit(default_config("ridge"), REGRESSION, y, X[:5])
    task = classification(2)
    with pytest.raises(DegenerateTarget):
        L.fit(default_config("tree", task), task, np.zeros(10, int), X)
    with pytest.raises(ValueError):
        L.fit(default_config("ridge"), task, np.zeros(10, int), X)


def test_predict_checks_width():
    X, y = _toy(10)
    model = L.fit(default_config("ridge"), REGRESSION, y, X)
    with pytest.raises(ValueError):
        L.predict(model, X[:, :2])


def test_catalogue_for_tasks():
    assert catalogue_for(REGRESSION) == ("ridge", "tree", "forest", "boosting", "knn")
    assert catalogue_for(classification(3)) == ("logistic", "tree", "forest", "boosting", "knn")
    assert set(CATALOGUE) == set(ALL)


@pytest.mark.parametrize("cls", ALL)
def test_sampled_configs_in_domain(cls):
    task = classification(2) if cls == "logistic" else REGRESSION
    space = config_space(cls, task)
    rng = np.random.default_rng(0)
    for _ in range(1000):
        assert in_space(sample_params(space, rng), space)


def test_resource_mapping():
    cfg = set_resource(default_config("boosting"), 10)
    assert cfg.params["n_estimators"] == 10 and native_budget(cfg) == 10
    ridge = default_config("ridge")
    assert set_resource(ridge, 7) is ridge
    assert is_full_fit("ridge") and not is_full_fit("forest")
    with pytest.raises(ValueError):
        set_resource(ridge, 0)


@pytest.mark.parametrize("cls", ["boosting", "forest"])
def test_more_units_extend_the_ensemble(cls):
    X, y = _toy(120)
    small = L.fit(set_resource(default_config(cls), 10), REGRESSION, y, X, seed=11)
    big = L.fit(set_resource(default_config(cls), 50), REGRESSION, y, X, seed=11)
    assert len(big.ens.trees) == 50
    for a, b in zip(small.ens.trees, big.ens.trees[:10]):
        for pa, pb in zip(a, b):
            assert np.array_equal(pa, pb)


def test_fits_are_deterministic():
    X, y = _toy(70)
    for cls in ("forest", "boosting", "knn"):
        p1 = L.predict(L.fit(default_config(cls), REGRESSION, y, X, seed=3), X)
        p2 = L.predict(L.fit(default_config(cls), REGRESSION, y, X, seed=3), X)
        assert np.array_equal(p1, p2)


def test_counter_counts_raw_fits():
    X, y = _toy(20)
    c = FitCounter()
    L.fit(default_config("ridge"), REGRESSION, y, X, counter=c)
    L.fit(default_config("knn"), REGRESSION, y, X, counter=c)
    assert c.raw_fits == 2 and c.fits == 0


def test_knn_ties_go_to_lowest_index():
    X = np.array([[1.0], [0.0], [0.0], [-1.0]])
    y = np.array([10.0, 20.0, 30.0, 40.0])
    model = L.fit(LearnerConfig("knn", {"n_neighbors": 1, "weights": "uniform"}), REGRESSION, y, X)
    # rows 1 and 2 both sit at distance 0 from the query
    assert L.predict(model, np.array([[0.0]]))[0] == 20.0


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 100.0), st.integers(0, 1000))
def test_linear_scale_invariance(scale, seed):
    X, y = _toy(40, seed)
    Xs = X * np.array([scale, 1.0, 1 / scale])
    for cls in ("ridge", "knn"):
        p1 = L.predict(L.fit(default_config(cls), REGRESSION, y, X), X)
        p2 = L.predict(L.fit(default_config(cls), REGRESSION, y, Xs), Xs)
        np.testing.assert_allclose(p1, p2, atol=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["tree", "forest", "boosting", "knn", "logistic"]), st.integers(0, 500))
def test_probability_rows_property(cls, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((30, 2))
    y = rng.integers(0, 3, 30)
    y[:3] = [0, 1, 2]
    task = classification(3)
    P = L.predict(L.fit(default_config(cls, task), task, y, X, seed=seed), X)
    assert np.all(P >= 0)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-9)
