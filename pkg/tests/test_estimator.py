import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from sesemi.estimator import GlobalContrastNormalizer, SesemiClassifier, ZCAWhitener
from sesemi.datasets import two_moons


def _partially_labeled(n=150, per_class=4, seed=0):
    ds = two_moons(n, 0.1, seed=seed)
    rng = np.random.default_rng(seed)
    idx = np.r_[rng.choice(n, per_class, replace=False), n + rng.choice(n, per_class, replace=False)]
    y = np.full(len(ds), -1)
    y[idx] = np.where(ds.targets[idx] == 1, 7, 3)  # non-contiguous labels
    return ds.inputs, y


def test_params_roundtrip():
    clf = SesemiClassifier(w=0.5, hidden=(10,), epochs=3)
    assert clf.get_params()["w"] == 0.5
    assert clone(clf).get_params() == clf.get_params()
    assert clf.set_params(w=2.0).w == 2.0


def test_fit_predict_shapes_and_labels():
    X, y = _partially_labeled()
    clf = SesemiClassifier(hidden=(16, 16), epochs=2).fit(X, y)
    assert list(clf.classes_) == [3, 7]
    assert clf.n_features_in_ == 2
    assert set(clf.predict(X)) <= {3, 7}
    proba = clf.predict_proba(X[:5])
    assert proba.shape == (5, 2) and np.allclose(proba.sum(axis=1), 1)
    assert clf.decision_function(X[:5]).shape == (5, 2)
    assert len(clf.metrics_.steps) == 2 * int(np.ceil(len(X) / 16))


def test_same_seed_same_model():
    X, y = _partially_labeled()
    a = SesemiClassifier(hidden=(8,), epochs=2, random_state=4).fit(X, y)
    b = SesemiClassifier(hidden=(8,), epochs=2, random_state=4).fit(X, y)
    assert np.array_equal(a.decision_function(X), b.decision_function(X))


def test_supervised_mode_matches_step_budget():
    X, y = _partially_labeled()
    clf = SesemiClassifier(mode="supervised", hidden=(8,), epochs=2).fit(X, y)
    assert len(clf.metrics_.steps) == 2 * int(np.ceil(len(X) / 16))
    assert all(s.loss_self == 0.0 for s in clf.metrics_.steps)


def test_not_fitted_and_bad_inputs():
    with pytest.raises(NotFittedError):
        SesemiClassifier().predict(np.zeros((2, 2)))
    with pytest.raises(ValueError, match="no labeled"):
        SesemiClassifier().fit(np.zeros((4, 2)), np.full(4, -1))
    X, y = _partially_labeled()
    clf = SesemiClassifier(hidden=(8,), epochs=1).fit(X, y)
    with pytest.raises(ValueError, match="shape"):
        clf.predict(np.zeros((2, 3)))


def test_image_input_uses_convnet():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(12, 2, 16, 16))
    y = np.full(12, -1)
    y[:4] = [0, 1, 0, 1]
    clf = SesemiClassifier(widths=(3, 4, 5), epochs=1, batch_size=2, dropout=0.0).fit(X, y)
    assert clf.model_.spec.kind == "convnet"
    assert clf.predict(X).shape == (12,)


def test_gcn_transformer():
    X = np.random.default_rng(1).normal(size=(10, 3, 4, 4))
    out = GlobalContrastNormalizer().fit_transform(X)
    flat = out.reshape(10, -1)
    assert out.shape == X.shape
    assert np.abs(flat.mean(axis=1)).max() < 1e-10
    assert np.abs(np.linalg.norm(flat, axis=1) - 1).max() < 1e-8


def test_zca_pipeline_whitens():
    X = np.random.default_rng(2).normal(size=(500, 6)) @ np.random.default_rng(3).normal(size=(6, 6))
    out = make_pipeline(ZCAWhitener(epsilon=0.0)).fit_transform(X)
    assert np.abs(np.cov(out, rowvar=False, bias=True) - np.eye(6)).max() < 1e-6
    with pytest.raises(NotFittedError):
        ZCAWhitener().transform(X)
