import numpy as np
import pytest

from sesemi import tensor as T


def numeric_grad(f, x, h=1e-5):
    """Central finite differences of scalar ``f()`` w.r.t. array ``x``, perturbed in place."""
    grad = np.zeros(x.shape, dtype=np.float64)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        grad[i] = (fp - fm) / (2 * h)
    return grad


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def project(out, weights):
    """Scalar ``sum(out * weights)`` as a graph node."""
    return T.tensor_sum(T._make(out.data * weights, "project", (out,), lambda g: (g * weights,)))


def grad_error(build, arrays, h=1e-5):
    """Largest relative error between autodiff and finite differences over ``arrays``."""
    leaves = [T.Tensor(a, requires_grad=True) for a in arrays]
    out = build(*leaves)
    weights = np.random.default_rng(123).normal(size=out.shape)
    T.backward(project(out, weights))

    def f():
        return float(project(build(*[T.Tensor(a) for a in arrays]), weights).data)

    return max(rel_err(leaf.grad, numeric_grad(f, arr, h)) for leaf, arr in zip(leaves, arrays))


@pytest.fixture
def rng():
    return np.random.default_rng(0)
