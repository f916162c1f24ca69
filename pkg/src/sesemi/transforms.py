"""Geometric proxy-label transforms, stochastic augmentation and whitening."""

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, NumericalError, ParameterError


class GeoTransform(enum.IntEnum):
    """The six self-supervised transforms; the value is the proxy label."""

    ROT0 = 0
    ROT90 = 1
    ROT180 = 2
    ROT270 = 3
    HFLIP = 4
    VFLIP = 5


NUM_PROXY_CLASSES = len(GeoTransform)

_ROTATIONS = {
    GeoTransform.ROT0: 0,
    GeoTransform.ROT90: 1,
    GeoTransform.ROT180: 2,
    GeoTransform.ROT270: 3,
}


def apply_geo(image, t):
    """Apply transform ``t`` to the trailing two (row, column) axes.

    Rotations are counter-clockwise: ROT90 sends pixel ``(r, c)`` to
    ``(W - 1 - c, r)``.  Works on a single ``C x H x W`` image or on a batch.
    """
    t = GeoTransform(t)
    image = np.asarray(image)
    if image.ndim < 2:
        raise DimensionError(f"apply_geo needs at least 2-D input, got {image.shape}")
    if t in _ROTATIONS:
        if image.shape[-1] != image.shape[-2]:
            raise DimensionError(f"rotation needs a square image, got {image.shape[-2:]}")
        return np.ascontiguousarray(np.rot90(image, _ROTATIONS[t], axes=(-2, -1)))
    if t is GeoTransform.HFLIP:
        return np.ascontiguousarray(image[..., ::-1])
    return np.ascontiguousarray(image[..., ::-1, :])


# (x, y) -> (a*x + b*y, c*x + d*y)
_POINT_MAPS = {
    GeoTransform.ROT0: np.array([[1, 0], [0, 1]]),
    GeoTransform.ROT90: np.array([[0, -1], [1, 0]]),
    GeoTransform.ROT180: np.array([[-1, 0], [0, -1]]),
    GeoTransform.ROT270: np.array([[0, 1], [-1, 0]]),
    GeoTransform.HFLIP: np.array([[-1, 0], [0, 1]]),
    GeoTransform.VFLIP: np.array([[1, 0], [0, -1]]),
}


def apply_geo_points(points, labels):
    """Apply per-row transforms to 2-D points (rotations about the origin)."""
    points = np.asarray(points)
    if points.ndim != 2 or points.shape[1] != 2:
        raise DimensionError(f"point transforms need N x 2 input, got {points.shape}")
    mats = np.stack([_POINT_MAPS[GeoTransform(t)] for t in range(NUM_PROXY_CLASSES)])
    m = mats[np.asarray(labels)].astype(points.dtype)
    return np.einsum("nij,nj->ni", m, points)


def expand_proxy_batch(images):
    """Every image under all six transforms, image-major, with proxy labels."""
    images = np.asarray(images)
    if images.ndim != 4:
        raise DimensionError(f"expected B x C x H x W images, got {images.shape}")
    variants = np.stack([apply_geo(images, t) for t in GeoTransform], axis=1)
    B = images.shape[0]
    labels = np.tile(np.arange(NUM_PROXY_CLASSES), B)
    return variants.reshape((B * NUM_PROXY_CLASSES,) + images.shape[1:]), labels


@dataclass(frozen=True)
class AugmentPolicy:
    """Translate, then optionally flip horizontally, then add Gaussian noise."""

    max_translate: int = 2
    hflip_enabled: bool = True
    noise_sigma: float = 0.15

    def __post_init__(self):
        if self.max_translate < 0 or self.noise_sigma < 0:
            raise ParameterError(f"invalid augmentation policy {self}")

    def without_hflip(self):
        return AugmentPolicy(self.max_translate, False, self.noise_sigma)


def _translate(image, dy, dx):
    out = np.zeros_like(image)
    H, W = image.shape[-2:]
    src_r = slice(max(0, -dy), H - max(0, dy))
    dst_r = slice(max(0, dy), H - max(0, -dy))
    src_c = slice(max(0, -dx), W - max(0, dx))
    dst_c = slice(max(0, dx), W - max(0, -dx))
    out[..., dst_r, dst_c] = image[..., src_r, src_c]
    return out


def augment(image, policy, rng):
    """Randomly augment one ``C x H x W`` image (or a 1-D feature vector).

    Translation and flipping only apply to images; vectors receive noise only.
    """
    image = np.asarray(image)
    out = image
    if image.ndim >= 2:
        if policy.max_translate > 0:
            m = policy.max_translate
            dy, dx = (int(v) for v in rng.integers(-m, m + 1, size=2))
            out = _translate(out, dy, dx)
        if policy.hflip_enabled and rng.random() < 0.5:
            out = out[..., ::-1]
    if policy.noise_sigma > 0:
        out = out + rng.normal(0.0, policy.noise_sigma, size=out.shape).astype(image.dtype)
    return np.ascontiguousarray(out, dtype=image.dtype)


def augment_batch(images, policy, rng):
    """Augment each example independently, in order, from one stream."""
    images = np.asarray(images)
    if policy.max_translate == 0 and not policy.hflip_enabled and policy.noise_sigma == 0:
        return images.copy()
    return np.stack([augment(x, policy, rng) for x in images])


def gcn(data, floor=1e-8):
    """Global contrast normalization: per-row zero mean and unit L2 norm."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise DimensionError(f"gcn expects N x d data, got {data.shape}")
    centered = data - data.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(centered, axis=1, keepdims=True)
    return centered / np.maximum(norms, floor)


@dataclass
class ZcaState:
    """Fitted ZCA whitening map ``x -> (x - mean) @ whitening``."""

    mean: np.ndarray
    whitening: np.ndarray
    epsilon: float


def zca_fit(data, epsilon=1e-2):
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise DimensionError(f"zca_fit needs N x d data with N >= 2, got {data.shape}")
    mean = data.mean(axis=0)
    centered = data - mean
    cov = centered.T @ centered / data.shape[0]
    try:
        eigvals, eigvecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigendecomposition failed for {cov.shape} covariance "
            f"(trace={np.trace(cov):.6g}, finite={np.isfinite(cov).all()}): {exc}"
        ) from exc
    eigvals = np.clip(eigvals, 0.0, None)
    whitening = (eigvecs / np.sqrt(eigvals + epsilon)) @ eigvecs.T
    whitening = 0.5 * (whitening + whitening.T)
    return ZcaState(mean=mean, whitening=whitening, epsilon=float(epsilon))


def zca_apply(state, x):
    x = np.asarray(x, dtype=np.float64)
    return (x - state.mean) @ state.whitening
