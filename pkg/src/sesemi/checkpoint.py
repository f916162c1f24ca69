"""Binary checkpoint container.

Layout (all integers little-endian)::

    b"SSMI"                       magic
    u32 version
    u32 n, n bytes                JSON header: arch spec + preprocessing flags
    u8 has_zca
      [u32 d, f64 epsilon, f64[d] mean, f64[d*d] whitening]
    u32 count, count x blob       parameters, f32 payload
    u32 count, count x blob       batch-norm running mean/var, f64 payload

    blob := u32 name_len, name (utf-8), u32 rank, u32[rank] extents, payload

Running statistics are kept at 64-bit so eval-mode predictions of a float32
model survive a save/load round trip bit-exactly.
"""

import io
import json
import os
import struct

import numpy as np

from . import tensor as T
from .exceptions import FormatError
from .models import ArchSpec, build_model
from .rng import RngStream
from .transforms import ZcaState

MAGIC = b"SSMI"
VERSION = 1


def _write_blob(out, name, array, dtype):
    raw = name.encode()
    out.write(struct.pack("<I", len(raw)))
    out.write(raw)
    out.write(struct.pack("<I", array.ndim))
    out.write(struct.pack(f"<{array.ndim}I", *array.shape))
    out.write(np.ascontiguousarray(array, dtype=dtype).tobytes())


class _Reader:
    def __init__(self, raw, source):
        self.buf = memoryview(raw)
        self.pos = 0
        self.source = source

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise FormatError(f"{self.source}: truncated at byte offset {self.pos} (wanted {n} bytes)")
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, shape, dtype):
        dtype = np.dtype(dtype)
        count = int(np.prod(shape, dtype=np.int64))
        return np.frombuffer(self.take(count * dtype.itemsize), dtype=dtype).reshape(shape).copy()

    def blob(self, dtype):
        (n,) = self.unpack("<I")
        try:
            name = bytes(self.take(n)).decode()
        except UnicodeDecodeError as exc:
            raise FormatError(f"{self.source}: bad blob name at byte offset {self.pos - n}") from exc
        (rank,) = self.unpack("<I")
        shape = self.unpack(f"<{rank}I")
        return name, self.array(shape, dtype)


def dumps(model, zca=None, preprocessing=None):
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<I", VERSION))
    header = json.dumps(
        {"arch": model.spec.to_dict(), "preprocessing": preprocessing or {}}, sort_keys=True
    ).encode()
    out.write(struct.pack("<I", len(header)))
    out.write(header)
    if zca is None:
        out.write(b"\x00")
    else:
        d = zca.mean.shape[0]
        out.write(b"\x01")
        out.write(struct.pack("<Id", d, zca.epsilon))
        out.write(np.ascontiguousarray(zca.mean, dtype="<f8").tobytes())
        out.write(np.ascontiguousarray(zca.whitening, dtype="<f8").tobytes())
    out.write(struct.pack("<I", len(model.params)))
    for name, p in model.params.items():
        _write_blob(out, name, p.data, "<f4")
    stats = [(n, s) for n, s in model.bn_states.items() if s.initialized]
    out.write(struct.pack("<I", 2 * len(stats)))
    for name, state in stats:
        _write_blob(out, f"{name}.running_mean", state.running_mean, "<f8")
        _write_blob(out, f"{name}.running_var", state.running_var, "<f8")
    return out.getvalue()


def loads(raw, source="<bytes>"):
    """Return ``(model, zca_state_or_None, preprocessing_dict)``."""
    r = _Reader(raw, source)
    if bytes(r.take(4)) != MAGIC:
        raise FormatError(f"{source}: bad magic, not a checkpoint")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise FormatError(f"{source}: unsupported checkpoint version {version}")
    (n,) = r.unpack("<I")
    try:
        header = json.loads(bytes(r.take(n)).decode())
        spec = ArchSpec.from_dict(header["arch"])
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{source}: malformed header: {exc}") from exc
    zca = None
    (has_zca,) = r.unpack("<B")
    if has_zca:
        d, eps = r.unpack("<Id")
        mean = r.array((d,), "<f8")
        zca = ZcaState(mean=mean, whitening=r.array((d, d), "<f8"), epsilon=eps)

    model = build_model(spec, RngStream(0))
    dtype = np.dtype(spec.dtype)
    (count,) = r.unpack("<I")
    seen = set()
    for _ in range(count):
        name, value = r.blob("<f4")
        if name not in model.params or model.params[name].shape != value.shape:
            raise FormatError(f"{source}: unexpected parameter {name} {value.shape}")
        model.params[name] = T.Tensor(value.astype(dtype), requires_grad=True, name=name)
        seen.add(name)
    if seen != set(model.params):
        raise FormatError(f"{source}: missing parameters {sorted(set(model.params) - seen)}")
    (count,) = r.unpack("<I")
    for _ in range(count):
        name, value = r.blob("<f8")
        layer, _, kind = name.rpartition(".")
        if layer not in model.bn_states or kind not in ("running_mean", "running_var"):
            raise FormatError(f"{source}: unexpected statistics blob {name}")
        setattr(model.bn_states[layer], kind, value.astype(np.float64))
    if r.pos != len(r.buf):
        raise FormatError(f"{source}: {len(r.buf) - r.pos} trailing bytes at offset {r.pos}")
    return model.eval(), zca, header.get("preprocessing", {})


def save(path, model, zca=None, preprocessing=None):
    raw = dumps(model, zca, preprocessing)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(raw)
    os.replace(tmp, path)


def load(path):
    with open(path, "rb") as fh:
        return loads(fh.read(), source=str(path))
