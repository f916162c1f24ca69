"""Dense tensors with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy array and, when it was produced by an op
applied to tensors that require gradients, remembers its parents and the
local vector-Jacobian product.  :func:`backward` walks the recorded graph in
reverse topological order and accumulates gradients into every leaf that
requires them.

Losses and batch statistics are accumulated in float64 regardless of the
activation dtype.
"""

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import (
    ContractError,
    DimensionError,
    NumericalError,
    ParameterError,
    StateError,
)


class Tensor:
    """A value in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _vjp=None):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return scale(self, other)

    __rmul__ = __mul__

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(out, op):
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"{op} produced non-finite values")
    return out


def _make(out, op, parents, vjp):
    """Wrap an op result, recording the graph only when a parent needs it."""
    _check_finite(out, op)
    if any(p.requires_grad for p in parents):
        return Tensor(out, requires_grad=True, _parents=parents, _vjp=vjp)
    return Tensor(out)


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf requiring it.

    Nodes feeding several consumers receive the sum of their contributions.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward() needs a scalar loss, got shape {loss.shape}")

    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._vjp is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg


# --------------------------------------------------------------------------
# elementwise and shape ops


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, "add", (a, b), vjp)


def scale(a, c):
    """Multiply by a constant (not differentiated)."""
    if isinstance(c, Tensor):
        raise TypeError("scale() multiplies by a constant; got a Tensor")
    a = as_tensor(a)
    out = a.data * c

    def vjp(g):
        return (g * c,)

    return _make(out, "scale", (a,), vjp)


def tensor_sum(a):
    a = as_tensor(a)
    out = np.asarray(a.data.sum(dtype=np.float64))

    def vjp(g):
        return (np.broadcast_to(g, a.shape).astype(a.dtype),)

    return _make(out, "sum", (a,), vjp)


def reshape(a, shape):
    a = as_tensor(a)
    out = a.data.reshape(shape)

    def vjp(g):
        return (g.reshape(a.shape),)

    return _make(out, "reshape", (a,), vjp)


def flatten(a):
    return reshape(a, (a.shape[0], -1))


def _matmul_vjp(a, b, g):
    return g @ b.T, a.T @ g


def matmul(a, b):
    """Matrix product of ``m x k`` and ``k x n`` operands."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def vjp(g):
        return _matmul_vjp(a.data, b.data, g)

    return _make(out, "matmul", (a, b), vjp)


def activation(x, kind="leaky_relu", alpha=0.1):
    """``relu`` or ``leaky_relu`` with negative slope ``alpha``.

    The derivative at exactly zero uses the negative-side slope.
    """
    x = as_tensor(x)
    if kind == "relu":
        alpha = 0.0
    elif kind != "leaky_relu":
        raise ParameterError(f"unknown activation {kind!r}")
    if not 0.0 <= alpha < 1.0:
        raise ParameterError(f"leaky_relu slope must lie in [0, 1), got {alpha}")
    positive = x.data > 0
    slope = np.where(positive, 1.0, alpha).astype(x.dtype)
    out = x.data * slope

    def vjp(g):
        return (g * slope,)

    return _make(out, kind, (x,), vjp)


def dropout(x, rate, rng=None, training=True):
    """Inverted dropout; identity in eval mode or at ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must lie in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ContractError("train-mode dropout needs an rng stream")
    keep = rng.random(x.shape) >= rate
    mask = keep.astype(x.dtype) / x.dtype.type(1.0 - rate)
    out = x.data * mask

    def vjp(g):
        return (g * mask,)

    return _make(out, "dropout", (x,), vjp)


# --------------------------------------------------------------------------
# convolutional ops


def _pad(x, pad):
    if pad == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d(x, k, stride=1, pad=0):
    """Zero-padded 2-D cross-correlation.

    ``x`` is ``B x C x H x W``, ``k`` is ``F x C x kh x kw``; the kernel is not
    flipped.
    """
    x, k = as_tensor(x), as_tensor(k)
    if x.ndim != 4 or k.ndim != 4 or x.shape[1] != k.shape[1]:
        raise DimensionError(f"conv2d shape mismatch: input {x.shape}, kernel {k.shape}")
    if stride < 1 or pad < 0:
        raise ParameterError(f"invalid stride={stride} or pad={pad}")
    B, C, H, W = x.shape
    F, _, kh, kw = k.shape
    if kh > H + 2 * pad or kw > W + 2 * pad:
        raise DimensionError(
            f"conv2d kernel {kh}x{kw} exceeds padded input {H + 2 * pad}x{W + 2 * pad}"
        )
    Ho = (H + 2 * pad - kh) // stride + 1
    Wo = (W + 2 * pad - kw) // stride + 1
    xp = _pad(x.data, pad)
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    # im2col: (B*Ho*Wo) x (C*kh*kw), rows ordered like the output pixels
    cols = np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(B * Ho * Wo, C * kh * kw)
    kmat = k.data.reshape(F, C * kh * kw)
    out = np.ascontiguousarray((cols @ kmat.T).reshape(B, Ho, Wo, F).transpose(0, 3, 1, 2))

    def vjp(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(B * Ho * Wo, F)
        dk = (g2.T @ cols).reshape(k.shape) if k.requires_grad else None
        dx = None
        if x.requires_grad:
            # B x C x kh x kw x Ho x Wo
            dcols = np.ascontiguousarray((g2 @ kmat).reshape(B, Ho, Wo, C, kh, kw).transpose(0, 3, 4, 5, 1, 2))
            dxp = np.zeros(xp.shape, dtype=g.dtype)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += dcols[:, :, i, j]
            dx = dxp[:, :, pad:pad + H, pad:pad + W] if pad else dxp
        return dx, dk

    return _make(out, "conv2d", (x, k), vjp)


def maxpool2d(x, window=2, stride=None):
    """Max over ``window x window`` patches; ties route to the first position."""
    x = as_tensor(x)
    stride = window if stride is None else stride
    B, C, H, W = x.shape
    if window > H or window > W:
        raise DimensionError(f"pool window {window} exceeds input {H}x{W}")
    Ho = (H - window) // stride + 1
    Wo = (W - window) // stride + 1
    win = sliding_window_view(x.data, (window, window), axis=(2, 3))[:, :, ::stride, ::stride]
    flat = win.reshape(B, C, Ho, Wo, window * window)
    arg = flat.argmax(axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]

    def vjp(g):
        dx = np.zeros(x.shape, dtype=g.dtype)
        for i in range(window):
            for j in range(window):
                hit = arg == i * window + j
                dx[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += g * hit
        return (dx,)

    return _make(out, "maxpool2d", (x,), vjp)


def global_avg_pool(x):
    """Spatial mean: ``B x C x H x W`` to ``B x C``."""
    x = as_tensor(x)
    if x.ndim != 4:
        raise DimensionError(f"global_avg_pool expects 4-D input, got {x.shape}")
    H, W = x.shape[2:]
    out = x.data.mean(axis=(2, 3), dtype=np.float64).astype(x.dtype)

    def vjp(g):
        return (np.broadcast_to(g[:, :, None, None] / (H * W), x.shape).astype(g.dtype),)

    return _make(out, "global_avg_pool", (x,), vjp)


@dataclass
class BatchNormState:
    """Running statistics of one batch-norm layer."""

    num_features: int
    momentum: float = 0.9
    eps: float = 1e-5
    running_mean: np.ndarray = field(default=None, repr=False)
    running_var: np.ndarray = field(default=None, repr=False)

    @property
    def initialized(self):
        return self.running_mean is not None

    def update(self, mean, var):
        if not self.initialized:
            self.running_mean = mean.copy()
            self.running_var = var.copy()
        else:
            m = self.momentum
            self.running_mean = m * self.running_mean + (1.0 - m) * mean
            self.running_var = m * self.running_var + (1.0 - m) * var


def batchnorm(x, gamma, beta, state, training=True):
    """Per-channel batch normalization for ``B x C`` or ``B x C x H x W`` input.

    Train mode uses batch statistics (biased variance) and folds them into
    ``state``; eval mode uses the running statistics.  The first train-mode
    update initializes the running statistics from the batch.
    """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if x.ndim not in (2, 4) or x.shape[1] != gamma.shape[0] or gamma.shape != beta.shape:
        raise DimensionError(
            f"batchnorm shape mismatch: input {x.shape}, gamma {gamma.shape}, beta {beta.shape}"
        )
    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    bshape = (1, -1) if x.ndim == 2 else (1, -1, 1, 1)
    n = x.data.size // x.shape[1]
    eps = state.eps
    dt = x.dtype

    # statistics and reductions accumulate at 64-bit; elementwise work stays in the input dtype
    if training:
        if n < 2:
            raise ContractError("train-mode batchnorm needs at least 2 values per channel")
        mean = x.data.mean(axis=axes, dtype=np.float64)
        var = x.data.var(axis=axes, dtype=np.float64)
        state.update(mean, var)
    else:
        if not state.initialized:
            raise StateError("batchnorm running statistics are uninitialized; run a train step first")
        mean, var = state.running_mean, state.running_var

    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean.astype(dt).reshape(bshape)) * inv_std.astype(dt).reshape(bshape)
    out = gamma.data.reshape(bshape) * xhat + beta.data.reshape(bshape)

    def vjp(g):
        dbeta = g.sum(axis=axes, dtype=np.float64)
        dgamma = (g * xhat).sum(axis=axes, dtype=np.float64)
        dxhat = g * gamma.data.reshape(bshape)
        if training:
            s1 = dxhat.sum(axis=axes, dtype=np.float64)
            s2 = (dxhat * xhat).sum(axis=axes, dtype=np.float64)
            dx = (inv_std / n).astype(dt).reshape(bshape) * (
                n * dxhat - s1.astype(dt).reshape(bshape) - xhat * s2.astype(dt).reshape(bshape)
            )
        else:
            dx = dxhat * inv_std.astype(dt).reshape(bshape)
        return dx.astype(g.dtype), dgamma.astype(gamma.dtype), dbeta.astype(beta.dtype)

    return _make(out, "batchnorm", (x, gamma, beta), vjp)


# --------------------------------------------------------------------------
# losses


def log_softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


def softmax_cross_entropy(logits, targets):
    """Batch-mean cross-entropy between ``softmax(logits)`` and class indices."""
    logits = as_tensor(logits)
    targets = np.asarray(targets)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise DimensionError(
            f"cross-entropy shape mismatch: logits {logits.shape}, targets {targets.shape}"
        )
    B, K = logits.shape
    if targets.size and (targets.min() < 0 or targets.max() >= K):
        raise IndexError(f"target outside [0, {K}): {targets.min()}..{targets.max()}")
    logp = log_softmax(logits.data)
    out = np.asarray(-logp[np.arange(B), targets].mean())

    def vjp(g):
        d = np.exp(logp)
        d[np.arange(B), targets] -= 1.0
        return ((d * (g / B)).astype(logits.dtype),)

    return _make(out, "softmax_cross_entropy", (logits,), vjp)
