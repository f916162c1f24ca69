"""Finite-difference verification of full dual-head model gradients."""

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .exceptions import ParameterError
from .models import SELF_SUPERVISED, SUPERVISED, build_model, tiny_convnet_spec, tiny_mlp_spec
from .rng import RngStream
from .transforms import NUM_PROXY_CLASSES, apply_geo_points, expand_proxy_batch

GRADCHECK_SPECS = {"mlp": tiny_mlp_spec, "convnet-tiny": tiny_convnet_spec}
TOLERANCE = 1e-4


@dataclass
class GradcheckReport:
    spec_name: str
    errors: dict = field(default_factory=dict)  # layer -> max relative error
    tolerance: float = TOLERANCE

    @property
    def failures(self):
        return [layer for layer, err in self.errors.items() if not err <= self.tolerance]

    @property
    def passed(self):
        return not self.failures

    def format(self):
        lines = [f"gradcheck {self.spec_name} (tolerance {self.tolerance:g})"]
        for layer, err in self.errors.items():
            status = "ok" if err <= self.tolerance else "FAIL"
            lines.append(f"  {layer:<32} {err:.3e}  {status}")
        lines.append("PASS" if self.passed else f"FAIL: {', '.join(self.failures)}")
        return "\n".join(lines)


def relative_error(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12))


def _batches(spec, rng, n=4):
    if spec.kind == "mlp":
        x = rng.normal(0.0, 1.0, size=(n,) + spec.input_shape)
        proxy = rng.integers(0, NUM_PROXY_CLASSES, size=n)
        xu = apply_geo_points(rng.normal(0.0, 1.0, size=(n,) + spec.input_shape), proxy)
    else:
        x = rng.normal(0.0, 1.0, size=(n,) + spec.input_shape)
        xu, proxy = expand_proxy_batch(rng.normal(0.0, 1.0, size=(n,) + spec.input_shape))
    y = rng.integers(0, spec.num_classes, size=n)
    return x, y, xu, proxy


def model_gradcheck(model, x, y, xu, proxy, w=1.0, h=1e-5, tolerance=TOLERANCE, spec_name="model"):
    """Compare every parameter gradient of the joint loss with central differences."""
    model.train()

    def loss():
        z = model.forward(x, SUPERVISED)
        zs = model.forward(xu, SELF_SUPERVISED)
        return T.add(T.softmax_cross_entropy(z, y), T.scale(T.softmax_cross_entropy(zs, proxy), w))

    model.zero_grad()
    T.backward(loss())
    report = GradcheckReport(spec_name, tolerance=tolerance)
    for name, p in model.params.items():
        numeric = np.zeros(p.shape)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            fp = float(loss().data)
            flat[i] = old - h
            fm = float(loss().data)
            flat[i] = old
            numeric.flat[i] = (fp - fm) / (2 * h)
        layer = name.rsplit(".", 1)[0]
        err = relative_error(p.grad, numeric)
        report.errors[layer] = max(report.errors.get(layer, 0.0), err)
    return report


def run_gradcheck(spec_name="mlp", seed=0, tolerance=TOLERANCE):
    """Build a tiny 64-bit model and check its gradients; returns a report."""
    if spec_name not in GRADCHECK_SPECS:
        raise ParameterError(f"unknown gradcheck spec {spec_name!r}; choose from {sorted(GRADCHECK_SPECS)}")
    spec = GRADCHECK_SPECS[spec_name]()
    root = RngStream(seed)
    model = build_model(spec, root.split("init"))
    x, y, xu, proxy = _batches(spec, root.split("data"))
    return model_gradcheck(model, x, y, xu, proxy, tolerance=tolerance, spec_name=spec_name)
