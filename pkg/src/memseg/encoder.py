"""Deterministic per-cell feature encoder and the residual adapter.

The encoder replaces a trainable backbone with a handcrafted descriptor so
every downstream computation stays oracle-checkable: each stride cell gets
[mean intensity, intensity variance, oriented gradient energy over a fixed
set of directions, Laplacian energy, normalized row/col coordinates],
zero-padded to ``key_channels`` and L2-normalized per position.

The adapter is a per-position linear residual branch (1x1-convolution
equivalent) whose output is scaled by ``alpha``; ``alpha = 0`` is an exact
passthrough. ``fit_adapter`` solves the ridge least-squares problem in
closed form instead of gradient training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import FeatureGrid, FlatKeySet, avg_pool, flatten_grid, pad_to_multiple

# fixed channel gains keep the descriptor components comparably scaled
# for intensities in [0, 1]
_VAR_GAIN = 4.0
_GRAD_GAIN = 4.0
_LAP_GAIN = 2.0

_ALLOWED_STRIDES = (1, 2, 4, 8)


@dataclass(frozen=True)
class EncoderConfig:
    stride: int = 4
    key_channels: int = 16
    feature_channels: int = 16
    gradient_bins: int = 8
    coord_weight: float = 0.25
    norm_floor: float = 0.5

    def __post_init__(self):
        if self.stride not in _ALLOWED_STRIDES:
            raise ValueError(f"stride must be one of {_ALLOWED_STRIDES}")
        if self.key_channels != self.feature_channels:
            raise ValueError("key_channels must equal feature_channels")
        if self.gradient_bins < 1:
            raise ValueError("gradient_bins must be >= 1")
        if self.key_channels < self.gradient_bins + 5:
            raise ValueError(
                f"key_channels must be >= gradient_bins + 5 "
                f"({self.gradient_bins + 5}) to hold all descriptor channels"
            )
        if self.coord_weight < 0:
            raise ValueError("coord_weight must be >= 0")
        if self.norm_floor < 0:
            raise ValueError("norm_floor must be >= 0")


@dataclass(frozen=True)
class AdapterParams:
    """Parallel residual branch: out = x + alpha * (map @ x + bias)."""

    alpha: float
    map: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.map, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64)
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("adapter map must be square")
        if b.shape != (m.shape[0],):
            raise ValueError("adapter bias length must match map size")
        if not (np.isfinite(m).all() and np.isfinite(b).all() and np.isfinite(self.alpha)):
            raise ValueError("adapter parameters must be finite")
        object.__setattr__(self, "map", m)
        object.__setattr__(self, "bias", b)

    def scaled(self, factor: float) -> "AdapterParams":
        """Same branch with alpha multiplied by ``factor``."""
        return AdapterParams(alpha=self.alpha * factor, map=self.map, bias=self.bias)


def direction_table(bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit direction vectors for the oriented-gradient channels."""
    angles = 2.0 * np.pi * np.arange(bins) / bins
    return np.cos(angles), np.sin(angles)


def _as_intensity(image) -> np.ndarray:
    img = np.asarray(image)
    if img.ndim != 2 or img.size == 0:
        raise ValueError("invalid image")
    if np.issubdtype(img.dtype, np.integer):
        img = img.astype(np.float64) / 255.0
    else:
        img = img.astype(np.float64)
    if not np.isfinite(img).all():
        raise ValueError("invalid image")
    return img


def encode_descriptors(image, cfg: EncoderConfig) -> FeatureGrid:
    """Raw (pre-adapter, pre-normalization) per-cell descriptors.

    Integer images are interpreted on the 0..255 scale; float images are
    used as-is. Dims not divisible by the stride are reflect-padded.
    """
    img = _as_intensity(image)
    img = pad_to_multiple(img, cfg.stride)
    s = cfg.stride
    gh, gw = img.shape[0] // s, img.shape[1] // s

    padded = np.pad(img, 1, mode="reflect" if min(img.shape) > 1 else "edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) * 0.5
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) * 0.5
    lap = (padded[:-2, 1:-1] + padded[2:, 1:-1]
           + padded[1:-1, :-2] + padded[1:-1, 2:] - 4.0 * img)

    mean = avg_pool(img, s)
    var = np.maximum(avg_pool(img * img, s) - mean * mean, 0.0)

    cos_t, sin_t = direction_table(cfg.gradient_bins)
    grad = np.empty((cfg.gradient_bins, gh, gw))
    for b in range(cfg.gradient_bins):
        proj = np.maximum(gx * cos_t[b] + gy * sin_t[b], 0.0)
        grad[b] = avg_pool(proj, s)

    lap_energy = avg_pool(lap * lap, s)
    rows = np.broadcast_to(((np.arange(gh) + 0.5) / gh)[:, None], (gh, gw))
    cols = np.broadcast_to(((np.arange(gw) + 0.5) / gw)[None, :], (gh, gw))

    data = np.zeros((cfg.key_channels, gh, gw))
    data[0] = mean
    data[1] = var * _VAR_GAIN
    data[2:2 + cfg.gradient_bins] = grad * _GRAD_GAIN
    data[2 + cfg.gradient_bins] = lap_energy * _LAP_GAIN
    data[3 + cfg.gradient_bins] = rows * cfg.coord_weight
    data[4 + cfg.gradient_bins] = cols * cfg.coord_weight
    return FeatureGrid(data)


def mirror_bin_permutation(bins: int) -> np.ndarray:
    """Channel permutation of the gradient bins under a horizontal mirror."""
    return (bins // 2 - np.arange(bins)) % bins


def _l2_normalize(data: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Per-position L2 normalization with an optional norm floor.

    With ``floor`` K > 0 each vector is scaled by 1/sqrt(|x|^2 + K^2): norms
    stay below 1 (similarities remain in [-4, 0]) while the vector's
    magnitude — in particular absolute intensity on texture-free cells —
    survives as a direction component instead of being erased. Zero
    vectors stay zero either way.
    """
    norms = np.sqrt((data * data).sum(axis=0, keepdims=True) + floor * floor)
    return np.where(norms > 0.0, data / np.where(norms > 0.0, norms, 1.0), 0.0)


def encode_query(image, cfg: EncoderConfig,
                 adapter: AdapterParams | None = None,
                 frame_index: int = 0) -> tuple[FlatKeySet, FeatureGrid]:
    """Encode an image into flattened query keys plus the feature grid.

    The adapter branch (if any) is applied to the raw descriptors before
    per-position L2 normalization; zero vectors are left as zero.
    """
    raw = encode_descriptors(image, cfg)
    if adapter is not None:
        raw = adapter_apply(raw, adapter)
    feat = FeatureGrid(_l2_normalize(raw.data, floor=cfg.norm_floor))
    return flatten_grid(feat, frame_index=frame_index), feat


def encode_value(feat: FeatureGrid, mask, object_id: int,
                 stride: int | None = None) -> FeatureGrid:
    """Concatenate feature channels with one pooled label channel.

    The label channel is the object's mask probability average-pooled to
    stride resolution; the output has ``feat.channels + 1`` channels.
    """
    if stride is None:
        stride = round(mask.height / feat.height)
    if stride < 1 or -(-mask.height // stride) != feat.height \
            or -(-mask.width // stride) != feat.width:
        raise ValueError("mask dims must equal feature dims times the stride")
    if not 1 <= object_id <= mask.num_labels:
        raise ValueError("unknown object")
    prob = np.asarray(mask.probs[object_id], dtype=np.float64)
    ph = feat.height * stride - mask.height
    pw = feat.width * stride - mask.width
    if ph or pw:
        prob = np.pad(prob, ((0, ph), (0, pw)))  # pad region counts as background
    label = avg_pool(prob, stride)
    return FeatureGrid(np.concatenate([feat.data, label[None]], axis=0))


def adapter_apply(x: FeatureGrid, p: AdapterParams) -> FeatureGrid:
    """Frozen path plus alpha-scaled parallel branch, per position."""
    if x.channels != p.map.shape[0]:
        raise ValueError("adapter channel mismatch")
    if p.alpha == 0.0:
        return x
    branch = np.einsum("ij,jhw->ihw", p.map, x.data) + p.bias[:, None, None]
    return FeatureGrid(x.data + p.alpha * branch)


def fit_adapter(pairs, alpha: float, ridge: float) -> AdapterParams:
    """Closed-form ridge fit of the adapter branch.

    Minimizes sum ||target - (source + alpha*(map @ source + bias))||^2
    + ridge * ||map||_F^2 over all positions pooled; the bias is not
    penalized. Deterministic.
    """
    if alpha == 0.0:
        raise ValueError("alpha must be nonzero to fit")
    if alpha < 0.0:
        raise ValueError("alpha must be positive")
    if ridge <= 0.0:
        raise ValueError("ridge must be > 0")
    pairs = list(pairs)
    if not pairs:
        raise ValueError("at least one training pair required")
    sources, residuals = [], []
    channels = pairs[0][0].channels
    for src, tgt in pairs:
        if src.data.shape != tgt.data.shape or src.channels != channels:
            raise ValueError("all pairs must share one shape")
        sources.append(src.data.reshape(channels, -1))
        residuals.append((tgt.data - src.data).reshape(channels, -1))
    s = np.concatenate(sources, axis=1)
    u = np.concatenate(residuals, axis=1)
    n = s.shape[1]
    # solve for the alpha-scaled branch [B c] with X = [S; 1]
    x = np.vstack([s, np.ones((1, n))])
    gram = x @ x.T
    gram[np.arange(channels), np.arange(channels)] += ridge / (alpha * alpha)
    w = np.linalg.solve(gram, (u @ x.T).T).T
    return AdapterParams(alpha=alpha, map=w[:, :channels] / alpha,
                         bias=w[:, channels] / alpha)
