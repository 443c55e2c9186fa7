"""Tests for the handcrafted descriptor encoder and the residual adapter."""

import math

import numpy as np
import pytest

from memseg.encoder import (
    AdapterParams,
    EncoderConfig,
    adapter_apply,
    direction_table,
    encode_descriptors,
    encode_query,
    encode_value,
    fit_adapter,
    mirror_bin_permutation,
)
from memseg.grids import FeatureGrid, MaskMap, avg_pool


def _naive_descriptors(image, stride, bins, coord_weight, key_channels):
    """Independent per-pixel reimplementation of the descriptor channels."""
    img = image.astype(np.float64) / 255.0
    h, w = img.shape
    assert h % stride == 0 and w % stride == 0, "oracle skips padding"

    def at(i, j):
        if i < 0:
            i = -i
        if i >= h:
            i = 2 * h - 2 - i
        if j < 0:
            j = -j
        if j >= w:
            j = 2 * w - 2 - j
        return img[i, j]

    gx = [[(at(i, j + 1) - at(i, j - 1)) * 0.5 for j in range(w)] for i in range(h)]
    gy = [[(at(i + 1, j) - at(i - 1, j)) * 0.5 for j in range(w)] for i in range(h)]
    lap = [
        [at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1) - 4.0 * img[i, j]
         for j in range(w)]
        for i in range(h)
    ]

    gh, gw = h // stride, w // stride
    out = np.zeros((key_channels, gh, gw))
    for ci in range(gh):
        for cj in range(gw):
            cells = [(ci * stride + di, cj * stride + dj)
                     for di in range(stride) for dj in range(stride)]
            n = len(cells)
            mean = sum(img[i, j] for i, j in cells) / n
            sq = sum(img[i, j] ** 2 for i, j in cells) / n
            out[0, ci, cj] = mean
            out[1, ci, cj] = max(sq - mean * mean, 0.0) * 4.0
            for b in range(bins):
                theta = 2.0 * math.pi * b / bins
                proj = sum(max(gx[i][j] * math.cos(theta) + gy[i][j] * math.sin(theta), 0.0)
                           for i, j in cells) / n
                out[2 + b, ci, cj] = proj * 4.0
            out[2 + bins, ci, cj] = sum(lap[i][j] ** 2 for i, j in cells) / n * 2.0
            out[3 + bins, ci, cj] = (ci + 0.5) / gh * coord_weight
            out[4 + bins, ci, cj] = (cj + 0.5) / gw * coord_weight
    return out


def test_descriptors_match_naive_reimplementation():
    rng = np.random.default_rng(42)
    image = rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
    cfg = EncoderConfig(stride=2, gradient_bins=8, coord_weight=0.25)
    grid = encode_descriptors(image, cfg)
    oracle = _naive_descriptors(image, 2, 8, 0.25, 16)
    assert grid.data.shape == oracle.shape == (16, 4, 4)
    assert np.allclose(grid.data, oracle, atol=1e-12)


def test_descriptor_channels_zero_padded_to_key_channels():
    cfg = EncoderConfig(stride=2, gradient_bins=8, key_channels=16, feature_channels=16)
    grid = encode_descriptors(np.zeros((4, 4), dtype=np.uint8), cfg)
    # channels beyond [mean, var, bins, lap, row, col] stay zero
    assert np.array_equal(grid.data[4 + cfg.gradient_bins + 1:], np.zeros((3, 2, 2)))


def test_integer_images_use_the_255_scale():
    rng = np.random.default_rng(1)
    image = rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
    cfg = EncoderConfig(stride=2)
    a = encode_descriptors(image, cfg)
    b = encode_descriptors(image.astype(np.float64) / 255.0, cfg)
    assert np.allclose(a.data, b.data, atol=1e-15)


@pytest.mark.parametrize("bad", [np.zeros(4), np.array([[np.nan, 0.0]])])
def test_encoder_rejects_invalid_images(bad):
    with pytest.raises(ValueError, match="invalid image"):
        encode_descriptors(bad, EncoderConfig())


def test_horizontal_mirror_permutes_gradient_bins():
    rng = np.random.default_rng(7)
    image = rng.integers(0, 256, size=(8, 12), dtype=np.uint8)
    cfg = EncoderConfig(stride=2, gradient_bins=8, coord_weight=0.0)
    fwd = encode_descriptors(image, cfg).data
    mir = encode_descriptors(image[:, ::-1], cfg).data
    perm = mirror_bin_permutation(8)
    for b in range(8):
        assert np.allclose(mir[2 + b], fwd[2 + perm[b]][:, ::-1], atol=1e-12)
    for ch in (0, 1, 2 + 8):  # mean, variance, laplacian energy are mirror-invariant
        assert np.allclose(mir[ch], fwd[ch][:, ::-1], atol=1e-12)


def test_mirror_bin_permutation_is_an_involution():
    perm = mirror_bin_permutation(8)
    assert sorted(perm) == list(range(8))
    assert np.array_equal(perm[perm], np.arange(8))


def test_direction_table_unit_vectors():
    cos_t, sin_t = direction_table(6)
    assert np.allclose(cos_t**2 + sin_t**2, 1.0)
    assert cos_t[0] == 1.0 and sin_t[0] == 0.0


def test_descriptors_translate_with_the_image():
    # shifting the crop window by one stride shifts the interior cells;
    # cells touching either crop border see different reflect padding
    rng = np.random.default_rng(9)
    wide = rng.integers(0, 256, size=(16, 20), dtype=np.uint8)
    cfg = EncoderConfig(stride=2, coord_weight=0.0)
    a = encode_descriptors(wide[:, 0:16], cfg).data
    b = encode_descriptors(wide[:, 2:18], cfg).data
    assert np.array_equal(a[:, :, 2:7], b[:, :, 1:6])


def test_query_keys_are_norm_bounded():
    rng = np.random.default_rng(3)
    image = rng.integers(0, 256, size=(12, 12), dtype=np.uint8)
    cfg = EncoderConfig(stride=2, norm_floor=0.5)
    keys, feat = encode_query(image, cfg)
    norms = np.linalg.norm(keys.data, axis=0)
    assert (norms < 1.0).all() and (norms > 0.0).all()
    assert np.array_equal(keys.data, feat.data.reshape(feat.channels, -1))


def test_norm_floor_preserves_magnitude_ordering():
    # two texture-free cells at different intensities must keep distinct keys
    image = np.zeros((4, 4), dtype=np.uint8)
    image[:, 2:] = 200
    cfg = EncoderConfig(stride=2, coord_weight=0.0, norm_floor=0.5)
    keys, _ = encode_query(image, cfg)
    dark, bright = keys.data[:, 0], keys.data[:, 1]
    assert np.linalg.norm(bright) > np.linalg.norm(dark)
    assert not np.allclose(dark, bright)


def test_zero_image_with_zero_floor_yields_zero_keys():
    cfg = EncoderConfig(stride=2, coord_weight=0.0, norm_floor=0.0)
    keys, _ = encode_query(np.zeros((4, 4), dtype=np.uint8), cfg)
    assert np.array_equal(keys.data, np.zeros_like(keys.data))


def test_encode_value_appends_pooled_label_plane():
    rng = np.random.default_rng(5)
    image = rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
    cfg = EncoderConfig(stride=2)
    _, feat = encode_query(image, cfg)
    labels = np.zeros((8, 8), dtype=int)
    labels[2:6, 2:6] = 1
    mask = MaskMap.from_labels(labels)
    val = encode_value(feat, mask, 1)
    assert val.channels == feat.channels + 1
    assert np.array_equal(val.data[:-1], feat.data)
    assert np.allclose(val.data[-1], avg_pool(mask.probs[1], 2))


def test_encode_value_rejects_bad_inputs():
    _, feat = encode_query(np.zeros((8, 8), dtype=np.uint8), EncoderConfig(stride=2))
    mask = MaskMap.from_labels(np.ones((8, 8), dtype=int))
    with pytest.raises(ValueError, match="unknown object"):
        encode_value(feat, mask, 2)
    small = MaskMap.from_labels(np.ones((4, 4), dtype=int))
    with pytest.raises(ValueError, match="mask dims"):
        encode_value(feat, small, 1, stride=2)


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        (dict(stride=3), "stride must be one of"),
        (dict(key_channels=16, feature_channels=8), "key_channels must equal"),
        (dict(gradient_bins=0), "gradient_bins"),
        (dict(key_channels=8, feature_channels=8, gradient_bins=8), ">= gradient_bins \\+ 5"),
        (dict(coord_weight=-0.1), "coord_weight"),
        (dict(norm_floor=-1.0), "norm_floor"),
    ],
)
def test_encoder_config_validation(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        EncoderConfig(**kwargs)


def test_adapter_alpha_zero_is_exact_passthrough():
    grid = FeatureGrid(np.random.default_rng(0).normal(size=(4, 3, 3)))
    p = AdapterParams(alpha=0.0, map=np.eye(4) * 9.0, bias=np.ones(4))
    assert adapter_apply(grid, p) is grid


def test_adapter_branch_is_linear_in_alpha():
    rng = np.random.default_rng(1)
    grid = FeatureGrid(rng.normal(size=(4, 3, 3)))
    p = AdapterParams(alpha=0.5, map=rng.normal(size=(4, 4)), bias=rng.normal(size=4))
    d1 = adapter_apply(grid, p).data - grid.data
    d2 = adapter_apply(grid, p.scaled(2.0)).data - grid.data
    assert np.allclose(d2, 2.0 * d1, atol=1e-12)


def test_adapter_validation():
    with pytest.raises(ValueError, match="alpha must be >= 0"):
        AdapterParams(alpha=-1.0, map=np.eye(2), bias=np.zeros(2))
    with pytest.raises(ValueError, match="square"):
        AdapterParams(alpha=1.0, map=np.zeros((2, 3)), bias=np.zeros(2))
    with pytest.raises(ValueError, match="bias length"):
        AdapterParams(alpha=1.0, map=np.eye(2), bias=np.zeros(3))
    with pytest.raises(ValueError, match="finite"):
        AdapterParams(alpha=1.0, map=np.full((2, 2), np.nan), bias=np.zeros(2))
    grid = FeatureGrid(np.zeros((3, 2, 2)))
    with pytest.raises(ValueError, match="channel mismatch"):
        adapter_apply(grid, AdapterParams(alpha=1.0, map=np.eye(2), bias=np.zeros(2)))


def test_fit_adapter_recovers_known_linear_map():
    src = FeatureGrid(np.array([[[1.0, 2.0]]]))
    tgt = FeatureGrid(np.array([[[2.0, 4.0]]]))
    p = fit_adapter([(src, tgt)], alpha=1.0, ridge=1e-9)
    assert np.allclose(p.map, [[1.0]], atol=1e-3)
    assert np.allclose(p.bias, [0.0], atol=1e-3)
    assert np.allclose(adapter_apply(src, p).data, tgt.data, atol=1e-3)


def test_fit_adapter_reduces_residual_error():
    rng = np.random.default_rng(11)
    lin = np.eye(5) + 0.1 * rng.normal(size=(5, 5))
    shift = 0.05 * rng.normal(size=5)
    pairs = []
    for _ in range(3):
        x = rng.normal(size=(5, 4, 4))
        y = np.einsum("ij,jhw->ihw", lin, x) + shift[:, None, None]
        pairs.append((FeatureGrid(x), FeatureGrid(y)))
    p = fit_adapter(pairs, alpha=0.5, ridge=1e-6)
    before = sum(((t.data - s.data) ** 2).mean() for s, t in pairs)
    after = sum(((t.data - adapter_apply(s, p).data) ** 2).mean() for s, t in pairs)
    assert after < 0.5 * before


def test_fit_adapter_alpha_scaling_cancels():
    # the fitted branch compensates alpha: outputs agree for different alphas
    rng = np.random.default_rng(12)
    pairs = [(FeatureGrid(rng.normal(size=(3, 2, 2))),
              FeatureGrid(rng.normal(size=(3, 2, 2))))]
    out = []
    for alpha in (0.25, 1.0):
        p = fit_adapter(pairs, alpha=alpha, ridge=1e-8)
        out.append(adapter_apply(pairs[0][0], p).data)
    assert np.allclose(out[0], out[1], atol=1e-6)


@pytest.mark.parametrize(
    "alpha, ridge, msg",
    [
        (0.0, 1e-3, "alpha must be nonzero to fit"),
        (-1.0, 1e-3, "alpha must be positive"),
        (1.0, 0.0, "ridge must be > 0"),
    ],
)
def test_fit_adapter_parameter_validation(alpha, ridge, msg):
    grid = FeatureGrid(np.ones((2, 2, 2)))
    with pytest.raises(ValueError, match=msg):
        fit_adapter([(grid, grid)], alpha=alpha, ridge=ridge)


def test_fit_adapter_pair_validation():
    with pytest.raises(ValueError, match="at least one training pair"):
        fit_adapter([], alpha=1.0, ridge=1e-3)
    a = FeatureGrid(np.ones((2, 2, 2)))
    b = FeatureGrid(np.ones((2, 3, 3)))
    with pytest.raises(ValueError, match="share one shape"):
        fit_adapter([(a, b)], alpha=1.0, ridge=1e-3)
