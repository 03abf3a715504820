"""The scikit-learn style classifier."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from spdznn.estimator import SecureMLPClassifier
from spdznn.training import separable_dataset


@pytest.fixture(scope="module")
def data():
    X, y = separable_dataset(120, 6, seed=3)
    return X, np.where(y == 1, "pos", "neg")


@pytest.fixture(scope="module")
def fitted(data):
    X, y = data
    return SecureMLPClassifier(epochs=5, seed=1).fit(X, y)


def test_get_params_and_clone():
    est = SecureMLPClassifier(hidden=(5, 3), lr_shift=4)
    params = est.get_params()
    assert params["hidden"] == (5, 3) and params["lr_shift"] == 4
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(epochs=2)
    assert est.epochs == 2


def test_fit_predict_string_labels(fitted, data):
    X, y = data
    pred = fitted.predict(X)
    assert set(pred) <= {"neg", "pos"}
    assert fitted.score(X, y) >= 0.9
    assert list(fitted.classes_) == ["neg", "pos"]
    assert fitted.n_features_in_ == 6 and fitted.rounds_ > 0
    assert len(fitted.metrics_) == 5


def test_plain_and_secure_predictions_agree(fitted, data):
    X, _ = data
    plain = clone(fitted).set_params(secure_predict=False)
    plain.__dict__.update({k: v for k, v in fitted.__dict__.items() if k.endswith("_")})
    assert np.mean(plain.predict(X[:40]) == fitted.predict(X[:40])) >= 0.95


def test_decision_function_shape(fitted, data):
    X, _ = data
    logits = fitted.decision_function(X[:5])
    assert logits.shape == (5, 2) and logits.dtype == float


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        SecureMLPClassifier().predict(np.zeros((1, 3)))


def test_input_validation(fitted, data):
    X, y = data
    with pytest.raises(ValueError):
        SecureMLPClassifier().fit(X * 100, y)
    with pytest.raises(ValueError):
        SecureMLPClassifier().fit(X, np.zeros(len(X)))
    with pytest.raises(ValueError):
        SecureMLPClassifier(transport="udp").fit(X, y)
    with pytest.raises(ValueError):
        fitted.predict(X[:, :3])
    with pytest.raises(ValueError):
        fitted.predict(np.full((2, 6), np.nan))


def test_multiclass():
    rng = np.random.default_rng(0)
    centers = np.array([[-2.0, -2.0], [2.0, -2.0], [0.0, 2.0]])
    y = np.repeat([0, 1, 2], 30)
    X = np.clip(centers[y] + rng.normal(0, 0.3, (90, 2)), -3.9, 3.9) / 2
    est = SecureMLPClassifier(hidden=(6,), epochs=4, batch_size=10, seed=2).fit(X, y)
    assert est.score(X, y) >= 0.9
