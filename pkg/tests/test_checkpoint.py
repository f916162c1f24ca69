import os

import numpy as np
import pytest

from sesemi import checkpoint
from sesemi.exceptions import FormatError
from sesemi.models import SUPERVISED, build_model, mlp_spec, tiny_convnet_spec
from sesemi.rng import RngStream
from sesemi.transforms import zca_fit


def _conv_model(seed=0):
    spec = tiny_convnet_spec(dtype="float32")
    model = build_model(spec, RngStream(seed))
    x = RngStream(seed + 1).normal(0, 1, size=(6,) + spec.input_shape).astype(np.float32)
    model.train()
    model.forward(x, SUPERVISED, RngStream(2))
    return model.eval(), x


def test_convnet_roundtrip_predictions_bit_exact():
    model, x = _conv_model()
    loaded, zca, prep = checkpoint.loads(checkpoint.dumps(model))
    assert zca is None and prep == {}
    assert np.array_equal(model.predict_logits(x), loaded.predict_logits(x))
    for name in model.bn_states:
        assert np.array_equal(model.bn_states[name].running_var, loaded.bn_states[name].running_var)


def test_mlp_roundtrip_with_zca(tmp_path):
    model = build_model(mlp_spec(3, 4, (8, 8)), RngStream(3))
    zca = zca_fit(np.random.default_rng(0).normal(size=(50, 4)))
    path = tmp_path / "m.ckpt"
    checkpoint.save(path, model, zca, {"gcn": True, "zca": True})
    loaded, zca2, prep = checkpoint.load(path)
    x = np.random.default_rng(1).normal(size=(7, 4)).astype(np.float32)
    assert np.array_equal(model.eval().predict_logits(x), loaded.predict_logits(x))
    assert np.array_equal(zca.whitening, zca2.whitening) and zca2.epsilon == zca.epsilon
    assert prep == {"gcn": True, "zca": True}
    assert os.listdir(tmp_path) == ["m.ckpt"]


def test_header_bytes():
    raw = checkpoint.dumps(build_model(mlp_spec(), RngStream(0)))
    assert raw[:4] == b"SSMI"
    assert int.from_bytes(raw[4:8], "little") == 1


def test_corrupted_magic():
    raw = bytearray(checkpoint.dumps(build_model(mlp_spec(), RngStream(0))))
    raw[0:4] = b"XXXX"
    with pytest.raises(FormatError, match="magic"):
        checkpoint.loads(bytes(raw))


@pytest.mark.parametrize("cut", [3, 10, 100, -1])
def test_truncated(cut):
    raw = checkpoint.dumps(build_model(mlp_spec(), RngStream(0)))
    with pytest.raises(FormatError):
        checkpoint.loads(raw[:cut])


def test_trailing_bytes():
    raw = checkpoint.dumps(build_model(mlp_spec(), RngStream(0)))
    with pytest.raises(FormatError, match="trailing"):
        checkpoint.loads(raw + b"\0")


def test_same_model_same_bytes():
    a = checkpoint.dumps(build_model(mlp_spec(), RngStream(5)))
    b = checkpoint.dumps(build_model(mlp_spec(), RngStream(5)))
    assert a == b
