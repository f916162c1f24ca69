import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sesemi.exceptions import DimensionError, ParameterError
from sesemi.rng import RngStream
from sesemi.transforms import (
    AugmentPolicy,
    GeoTransform,
    apply_geo,
    apply_geo_points,
    augment,
    expand_proxy_batch,
    gcn,
    zca_apply,
    zca_fit,
)

# destination pixel of source pixel (r, c) in an n x n image
DESTINATION = {
    GeoTransform.ROT0: lambda r, c, n: (r, c),
    GeoTransform.ROT90: lambda r, c, n: (n - 1 - c, r),
    GeoTransform.ROT180: lambda r, c, n: (n - 1 - r, n - 1 - c),
    GeoTransform.ROT270: lambda r, c, n: (c, n - 1 - r),
    GeoTransform.HFLIP: lambda r, c, n: (r, n - 1 - c),
    GeoTransform.VFLIP: lambda r, c, n: (n - 1 - r, c),
}


def permutation_oracle(image, t):
    n = image.shape[-1]
    out = np.empty_like(image)
    for r in range(n):
        for c in range(n):
            out[..., DESTINATION[t](r, c, n)[0], DESTINATION[t](r, c, n)[1]] = image[..., r, c]
    return out


def test_six_members():
    assert [int(t) for t in GeoTransform] == list(range(6))


def test_rot0_identity(rng):
    x = rng.normal(size=(3, 5, 5))
    np.testing.assert_array_equal(apply_geo(x, GeoTransform.ROT0), x)


def test_rot90_small_case():
    out = apply_geo(np.array([[[1, 2], [3, 4]]]), GeoTransform.ROT90)
    np.testing.assert_array_equal(out, [[[2, 4], [1, 3]]])
    np.testing.assert_array_equal(out, permutation_oracle(np.array([[[1, 2], [3, 4]]]), GeoTransform.ROT90))


@pytest.mark.parametrize("t", list(GeoTransform))
def test_matches_permutation_oracle(rng, t):
    for n in (1, 2, 5, 8):
        x = rng.normal(size=(3, n, n))
        np.testing.assert_array_equal(apply_geo(x, t), permutation_oracle(x, t))


def test_rot180_is_vflip_of_hflip(rng):
    x = rng.normal(size=(2, 7, 7))
    np.testing.assert_array_equal(
        apply_geo(x, GeoTransform.ROT180),
        apply_geo(apply_geo(x, GeoTransform.HFLIP), GeoTransform.VFLIP),
    )


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 3), st.integers(1, 6)).map(lambda s: (s[0], s[1], s[1])),
              elements=st.floats(-1e6, 1e6)))
def test_periods_and_pixel_multiset(x):
    for t, period in [(GeoTransform.ROT90, 4), (GeoTransform.ROT270, 4), (GeoTransform.ROT180, 2),
                      (GeoTransform.HFLIP, 2), (GeoTransform.VFLIP, 2)]:
        y = x
        for _ in range(period):
            y = apply_geo(y, t)
        np.testing.assert_array_equal(y, x)
        np.testing.assert_array_equal(np.sort(apply_geo(x, t), axis=None), np.sort(x, axis=None))


def test_rotation_needs_square():
    with pytest.raises(DimensionError):
        apply_geo(np.zeros((1, 3, 4)), GeoTransform.ROT90)
    assert apply_geo(np.zeros((1, 3, 4)), GeoTransform.HFLIP).shape == (1, 3, 4)


def test_point_transforms():
    p = np.tile([[2.0, 1.0]], (6, 1))
    out = apply_geo_points(p, np.arange(6))
    np.testing.assert_array_equal(out, [[2, 1], [-1, 2], [-2, -1], [1, -2], [-2, 1], [2, -1]])


def test_expand_proxy_batch_counts(rng):
    x = rng.normal(size=(16, 3, 8, 8))
    out, labels = expand_proxy_batch(x)
    assert out.shape == (96, 3, 8, 8)
    np.testing.assert_array_equal(np.bincount(labels, minlength=6), [16] * 6)
    for slot in range(96):
        np.testing.assert_array_equal(out[slot], apply_geo(x[slot // 6], labels[slot]))


def test_expand_proxy_batch_constant():
    out, labels = expand_proxy_batch(np.full((1, 1, 4, 4), 2.5))
    assert np.all(out == 2.5)
    np.testing.assert_array_equal(labels, np.arange(6))


def test_augment_identity(rng):
    x = rng.normal(size=(3, 8, 8))
    np.testing.assert_array_equal(augment(x, AugmentPolicy(0, False, 0.0), RngStream(0)), x)


def test_augment_translation_is_shifted_copy(rng):
    x = rng.uniform(1.0, 2.0, size=(2, 10, 10))
    stream = RngStream(3)
    for _ in range(50):
        y = augment(x, AugmentPolicy(2, False, 0.0), stream)
        matches = []
        for dy in range(-2, 3):
            for dx in range(-2, 3):
                shifted = np.zeros_like(x)
                src = x[:, max(0, -dy):10 - max(0, dy), max(0, -dx):10 - max(0, dx)]
                shifted[:, max(0, dy):10 - max(0, -dy), max(0, dx):10 - max(0, -dx)] = src
                matches.append(np.array_equal(shifted, y))
        assert sum(matches) == 1
        zero_rows = np.all(y == 0, axis=(0, 2))
        zero_cols = np.all(y == 0, axis=(0, 1))
        assert zero_rows.sum() <= 2 and zero_cols.sum() <= 2


def test_augment_noise_std():
    x = np.zeros((1, 1000, 1000))
    y = augment(x, AugmentPolicy(0, False, 0.15), RngStream(9))
    assert abs((y - x).std() - 0.15) < 0.002


def test_augment_hflip_frequency(rng):
    x = rng.normal(size=(1, 4, 4))
    stream = RngStream(1)
    flips = sum(np.array_equal(augment(x, AugmentPolicy(0, True, 0.0), stream), x[..., ::-1]) for _ in range(2000))
    assert 900 < flips < 1100


def test_augment_reproducible(rng):
    x = rng.normal(size=(3, 8, 8))
    policy = AugmentPolicy(2, True, 0.15)
    np.testing.assert_array_equal(augment(x, policy, RngStream(4)), augment(x, policy, RngStream(4)))


def test_policy_validation():
    with pytest.raises(ParameterError):
        AugmentPolicy(-1, False, 0.0)
    assert not AugmentPolicy().without_hflip().hflip_enabled


def test_gcn_rows(rng):
    out = gcn(rng.normal(2.0, 5.0, size=(20, 30)))
    assert np.abs(out.mean(axis=1)).max() < 1e-10
    assert np.abs(np.linalg.norm(out, axis=1) - 1).max() < 1e-8


def test_gcn_constant_row():
    np.testing.assert_array_equal(gcn(np.full((1, 5), 3.0)), np.zeros((1, 5)))


def test_gcn_idempotent(rng):
    once = gcn(rng.normal(size=(10, 12)))
    np.testing.assert_allclose(gcn(once), once, atol=1e-7)


def test_zca_identity_covariance():
    # rows of sqrt(N) * orthonormal columns, centred: covariance is exactly I
    q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(400, 6)))
    q = q - q.mean(axis=0)
    q, _ = np.linalg.qr(q)
    data = q * np.sqrt(400)
    state = zca_fit(data, epsilon=1e-9)
    np.testing.assert_allclose(state.whitening, np.eye(6), atol=1e-3)


def test_zca_centering_and_symmetry(rng):
    data = rng.normal(size=(100, 8)) @ rng.normal(size=(8, 8))
    state = zca_fit(data, epsilon=1e-2)
    np.testing.assert_allclose(zca_apply(state, state.mean), 0.0, atol=1e-12)
    assert np.abs(state.whitening - state.whitening.T).max() < 1e-8


def test_zca_whitens(rng):
    data = rng.normal(size=(500, 48)) @ rng.normal(size=(48, 48))
    state = zca_fit(data, epsilon=1e-8)
    white = zca_apply(state, data)
    cov = np.cov(white, rowvar=False, bias=True)
    assert np.abs(cov - np.eye(48)).max() < 1e-3


def test_zca_rejects_single_row():
    with pytest.raises(DimensionError):
        zca_fit(np.zeros((1, 3)))
