"""Dual-head networks: one shared backbone, a C-way head and a 6-way head."""

from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from . import tensor as T
from .exceptions import DimensionError, ParameterError, StateError
from .transforms import NUM_PROXY_CLASSES

SUPERVISED = "supervised"
SELF_SUPERVISED = "self_supervised"
HEAD_NAMES = {SUPERVISED: "head_sup", SELF_SUPERVISED: "head_self"}


@dataclass(frozen=True)
class ConvBlock:
    """``convs`` conv-BN-activation layers, optionally closed by a 2x2 max-pool."""

    channels: int
    convs: int = 1
    kernel: int = 3
    pad: int = 1
    pool: bool = True


@dataclass(frozen=True)
class ArchSpec:
    kind: str = "mlp"
    input_shape: tuple = (2,)
    num_classes: int = 2
    hidden: tuple = (100, 100, 100)
    blocks: tuple = ()
    activation: str = "leaky_relu"
    alpha: float = 0.1
    dropout: float = 0.0
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        object.__setattr__(self, "hidden", tuple(int(v) for v in self.hidden))
        object.__setattr__(
            self, "blocks", tuple(b if isinstance(b, ConvBlock) else ConvBlock(**b) for b in self.blocks)
        )

    def to_dict(self):
        d = asdict(self)
        d["input_shape"] = list(self.input_shape)
        d["hidden"] = list(self.hidden)
        d["blocks"] = [asdict(b) for b in self.blocks]
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def feature_shape(self):
        """Shape of the backbone output for one example."""
        if self.kind == "mlp":
            return (self.hidden[-1],)
        C, H, W = self.input_shape
        for b in self.blocks:
            for _ in range(b.convs):
                H, W = H + 2 * b.pad - b.kernel + 1, W + 2 * b.pad - b.kernel + 1
                if H < 1 or W < 1:
                    raise ParameterError(f"conv plan collapses spatial size at block {b}")
            if b.pool:
                H, W = H // 2, W // 2
            C = b.channels
        return (C, H, W)


def mlp_spec(num_classes=2, input_dim=2, hidden=(100, 100, 100), alpha=0.1, dropout=0.0, dtype="float32"):
    return ArchSpec("mlp", (input_dim,), num_classes, hidden, (), "leaky_relu", alpha, dropout, dtype)


def convnet_spec(num_classes=10, input_shape=(3, 32, 32), widths=(32, 64, 128), dropout=0.5,
                 convs_per_block=1, alpha=0.1, dtype="float32"):
    """Reduced ConvNet: two padded pooled blocks, then an unpadded block.

    On 32x32 input the feature map is 6x6 (32 -> 16 -> 8 -> 6).
    """
    w1, w2, w3 = widths
    blocks = (
        ConvBlock(w1, convs_per_block, 3, 1, True),
        ConvBlock(w2, convs_per_block, 3, 1, True),
        ConvBlock(w3, 1, 3, 0, False),
    )
    return ArchSpec("convnet", input_shape, num_classes, (), blocks, "leaky_relu", alpha, dropout, dtype)


def tiny_convnet_spec(num_classes=3, dtype="float64"):
    """8x8 three-block network for gradient checking (8 -> 4 -> 2 -> 2)."""
    blocks = (ConvBlock(3, 1, 3, 1, True), ConvBlock(4, 1, 3, 1, True), ConvBlock(5, 1, 3, 1, False))
    return ArchSpec("convnet", (2, 8, 8), num_classes, (), blocks, "leaky_relu", 0.1, 0.0, dtype)


def tiny_mlp_spec(num_classes=3, dtype="float64"):
    return mlp_spec(num_classes, 2, (12, 10, 8), dtype=dtype)


SPEC_PRESETS = {
    "mlp": mlp_spec,
    "mlp-tiny": tiny_mlp_spec,
    "convnet": convnet_spec,
    "convnet-tiny": tiny_convnet_spec,
}


def _he(rng, shape, fan_in, dtype):
    return (rng.normal(0.0, 1.0, size=shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class DualHeadModel:
    """Parameters and running statistics of a dual-head network.

    Parameters are named ``backbone.*``, ``head_sup.*`` and ``head_self.*``.
    """

    def __init__(self, spec, params, bn_states):
        self.spec = spec
        self.params = params
        self.bn_states = bn_states
        self.training = True

    def train(self):
        self.training = True
        return self

    def eval(self):
        self.training = False
        return self

    def parameters(self):
        return list(self.params.values())

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def num_parameters(self):
        return sum(p.data.size for p in self.params.values())

    def decays(self, name):
        """Whether weight decay applies to parameter ``name``."""
        return name.endswith(".weight")

    def backbone(self, x, rng=None):
        spec = self.spec
        x = T.as_tensor(np.asarray(x, dtype=spec.dtype))
        if tuple(x.shape[1:]) != spec.input_shape:
            raise DimensionError(f"input shape {x.shape[1:]} does not match model input {spec.input_shape}")
        training = self.training
        p = self.params
        if spec.kind == "mlp":
            h = x
            for i in range(len(spec.hidden)):
                h = T.add(T.matmul(h, p[f"backbone.dense{i}.weight"]), p[f"backbone.dense{i}.bias"])
                h = T.activation(h, spec.activation, spec.alpha)
                h = T.dropout(h, spec.dropout, rng, training)
            return h
        h = x
        for bi, block in enumerate(spec.blocks):
            for ci in range(block.convs):
                name = f"backbone.block{bi}.conv{ci}"
                h = T.conv2d(h, p[f"{name}.weight"], 1, block.pad)
                h = T.batchnorm(h, p[f"{name}.bn.gamma"], p[f"{name}.bn.beta"], self.bn_states[name], training)
                h = T.activation(h, spec.activation, spec.alpha)
            if block.pool:
                h = T.maxpool2d(h, 2, 2)
                h = T.dropout(h, spec.dropout, rng, training)
        return h

    def head(self, features, branch):
        name = HEAD_NAMES[branch]
        w, b = self.params[f"{name}.weight"], self.params[f"{name}.bias"]
        if self.spec.kind == "mlp":
            return T.add(T.matmul(features, w), b)
        return T.add(T.global_avg_pool(T.conv2d(features, w)), b)

    def forward(self, x, branch=SUPERVISED, rng=None):
        """Logits of ``branch`` (``supervised`` or ``self_supervised``)."""
        if branch not in HEAD_NAMES:
            raise ParameterError(f"unknown branch {branch!r}")
        return self.head(self.backbone(x, rng), branch)

    def predict_logits(self, x, batch_size=512):
        if self.training:
            raise StateError("predict needs an eval-mode model; call model.eval()")
        x = np.asarray(x)
        out = [self.forward(x[i:i + batch_size]).data for i in range(0, len(x), batch_size)]
        return np.concatenate(out) if out else np.zeros((0, self.spec.num_classes))

    def predict(self, x, batch_size=512):
        """Class indices from the supervised head; the 6-way head is unused."""
        return predict_from_logits(self.predict_logits(x, batch_size))


def predict_from_logits(logits):
    return np.asarray(logits).argmax(axis=-1)


def build_model(spec, rng):
    """Initialize a model: He fan-in Gaussian weights, zero biases, BN gamma=1."""
    if spec.num_classes < 2:
        raise ParameterError("num_classes must be >= 2")
    if not 0.0 <= spec.dropout < 1.0:
        raise ParameterError(f"dropout must lie in [0, 1), got {spec.dropout}")
    dtype = np.dtype(spec.dtype)
    params = OrderedDict()
    bn_states = OrderedDict()

    def add_param(name, value):
        params[name] = T.Tensor(value, requires_grad=True, name=name)

    if spec.kind == "mlp":
        if len(spec.input_shape) != 1 or not spec.hidden:
            raise ParameterError("mlp spec needs a 1-D input shape and at least one hidden layer")
        fan_in = spec.input_shape[0]
        for i, width in enumerate(spec.hidden):
            add_param(f"backbone.dense{i}.weight", _he(rng, (fan_in, width), fan_in, dtype))
            add_param(f"backbone.dense{i}.bias", np.zeros(width, dtype))
            fan_in = width
        for branch, width in ((SUPERVISED, spec.num_classes), (SELF_SUPERVISED, NUM_PROXY_CLASSES)):
            name = HEAD_NAMES[branch]
            add_param(f"{name}.weight", _he(rng, (fan_in, width), fan_in, dtype))
            add_param(f"{name}.bias", np.zeros(width, dtype))
    elif spec.kind == "convnet":
        if len(spec.input_shape) != 3 or not spec.blocks:
            raise ParameterError("convnet spec needs a C x H x W input shape and at least one block")
        spec.feature_shape()
        cin = spec.input_shape[0]
        for bi, block in enumerate(spec.blocks):
            for ci in range(block.convs):
                name = f"backbone.block{bi}.conv{ci}"
                k = block.kernel
                add_param(f"{name}.weight", _he(rng, (block.channels, cin, k, k), cin * k * k, dtype))
                add_param(f"{name}.bn.gamma", np.ones(block.channels, dtype))
                add_param(f"{name}.bn.beta", np.zeros(block.channels, dtype))
                bn_states[name] = T.BatchNormState(block.channels)
                cin = block.channels
        for branch, width in ((SUPERVISED, spec.num_classes), (SELF_SUPERVISED, NUM_PROXY_CLASSES)):
            name = HEAD_NAMES[branch]
            add_param(f"{name}.weight", _he(rng, (width, cin, 1, 1), cin, dtype))
            add_param(f"{name}.bias", np.zeros(width, dtype))
    else:
        raise ParameterError(f"unknown architecture kind {spec.kind!r}")
    return DualHeadModel(spec, params, bn_states)
