import numpy as np
import pytest

from sesemi import tensor as T
from sesemi.exceptions import ParameterError
from sesemi.gradcheck import relative_error, run_gradcheck
from sesemi.transforms import NUM_PROXY_CLASSES


@pytest.mark.parametrize("name", ["mlp", "convnet-tiny"])
def test_specs_pass(name):
    report = run_gradcheck(name, seed=0)
    assert report.passed, report.format()
    assert max(report.errors.values()) < 1e-4
    assert any(layer.startswith("head_self") for layer in report.errors)


@pytest.fixture
def corrupted_self_head(monkeypatch):
    """Wrong weight gradient for matmuls feeding the 6-way proxy head only."""
    original = T._matmul_vjp

    def bad(a, b, g):
        ga, gb = original(a, b, g)
        if b.shape[1] == NUM_PROXY_CLASSES:
            gb = gb * 1.5
        return ga, gb

    monkeypatch.setattr(T, "_matmul_vjp", bad)


def test_corrupted_backward_names_layer(corrupted_self_head):
    report = run_gradcheck("mlp", seed=0)
    assert not report.passed
    assert report.failures == ["head_self"]
    assert "FAIL: head_self" in report.format()


def test_relative_error_scale_free():
    a = np.array([1.0, 2.0])
    assert relative_error(a, a) == 0.0
    assert relative_error(1e-8 * a, 1e-8 * 1.5 * a) == pytest.approx(relative_error(a, 1.5 * a))


def test_unknown_spec():
    with pytest.raises(ParameterError):
        run_gradcheck("resnet")
