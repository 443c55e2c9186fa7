"""Dense numeric grid and mask primitives shared by the whole engine.

All grids are numpy arrays in row-major channel-plane order (C, H, W).
Values are float64 and every constructor rejects NaN/Inf, so downstream
code never has to re-validate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeatureGrid:
    """Channels x height x width grid of finite real values."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"feature grid must be 3-d (C,H,W), got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("empty grid")
        if not np.isfinite(arr).all():
            raise ValueError("feature grid contains non-finite values")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class MaskMap:
    """Integer label grid plus per-label probability planes.

    probs has shape (L+1, H, W) including the background plane 0; at every
    position the planes sum to 1 and labels equals the argmax (ties broken
    toward the lower label id).
    """

    labels: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        probs = np.asarray(self.probs, dtype=np.float64)
        if labels.ndim != 2 or probs.ndim != 3:
            raise ValueError("mask map needs 2-d labels and 3-d probs")
        if probs.shape[1:] != labels.shape:
            raise ValueError("labels/probs shape mismatch")
        if not np.isfinite(probs).all():
            raise ValueError("mask probabilities contain non-finite values")
        sums = probs.sum(axis=0)
        if not np.allclose(sums, 1.0, atol=1e-6):
            raise ValueError("mask probabilities must sum to 1 per position")
        expect = np.argmax(probs, axis=0)  # np.argmax ties break toward lower index
        if not np.array_equal(expect, labels):
            raise ValueError("labels must equal the argmax of probs")
        object.__setattr__(self, "labels", _freeze(labels.astype(np.int32)))
        object.__setattr__(self, "probs", _freeze(probs))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def num_labels(self) -> int:
        """Number of foreground labels L (planes minus background)."""
        return self.probs.shape[0] - 1

    @property
    def object_ids(self) -> list[int]:
        return list(range(1, self.num_labels + 1))

    def binary(self, object_id: int) -> np.ndarray:
        """Hard binary mask of one object."""
        return np.asarray(self.labels) == object_id

    @staticmethod
    def from_labels(labels: np.ndarray, num_labels: int | None = None) -> "MaskMap":
        """Build a one-hot MaskMap from a hard label grid."""
        labels = np.asarray(labels).astype(np.int32)
        if labels.ndim != 2:
            raise ValueError("label grid must be 2-d")
        if labels.min(initial=0) < 0:
            raise ValueError("labels must be nonnegative")
        top = int(labels.max(initial=0))
        if num_labels is None:
            num_labels = top
        elif top > num_labels:
            raise ValueError(f"label {top} exceeds declared count {num_labels}")
        planes = np.arange(num_labels + 1).reshape(-1, 1, 1)
        probs = (labels[None, :, :] == planes).astype(np.float64)
        return MaskMap(labels=labels, probs=probs)

    @staticmethod
    def from_probs(probs: np.ndarray) -> "MaskMap":
        """Build a MaskMap from probability planes; labels = argmax."""
        probs = np.asarray(probs, dtype=np.float64)
        labels = np.argmax(probs, axis=0).astype(np.int32)
        return MaskMap(labels=labels, probs=probs)


@dataclass(frozen=True)
class FlatKeySet:
    """Key matrix (key_channels x columns) with per-column provenance.

    Column j of a flattened grid holds the channel vector at row-major
    spatial position j; origin[j] = (frame index, spatial position).
    """

    data: np.ndarray
    origin: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        origin = np.asarray(self.origin, dtype=np.int64)
        if data.ndim != 2:
            raise ValueError("key set data must be 2-d (channels x columns)")
        if origin.shape != (data.shape[1], 2):
            raise ValueError("origin must have one (frame, position) row per column")
        if not np.isfinite(data).all():
            raise ValueError("key set contains non-finite values")
        object.__setattr__(self, "data", _freeze(data))
        object.__setattr__(self, "origin", _freeze(origin))

    @property
    def key_channels(self) -> int:
        return self.data.shape[0]

    @property
    def columns(self) -> int:
        return self.data.shape[1]


def flatten_grid(grid: FeatureGrid, frame_index: int = 0) -> FlatKeySet:
    """Flatten a grid to columns in row-major position order."""
    c, h, w = grid.data.shape
    data = grid.data.reshape(c, h * w)
    pos = np.arange(h * w, dtype=np.int64)
    origin = np.stack([np.full_like(pos, frame_index), pos], axis=1)
    return FlatKeySet(data=data, origin=origin)


def unflatten(keys: FlatKeySet, height: int, width: int) -> FeatureGrid:
    """Inverse of :func:`flatten_grid` for a known spatial shape."""
    if keys.columns != height * width:
        raise ValueError("column count does not match height*width")
    return FeatureGrid(keys.data.reshape(keys.key_channels, height, width))


def _axis_lerp(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # align-corners-false sampling with edge clamping
    x = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    x0 = np.floor(x).astype(np.int64)
    frac = x - x0
    lo = np.clip(x0, 0, n_in - 1)
    hi = np.clip(x0 + 1, 0, n_in - 1)
    return lo, hi, frac


def _resize_planes(planes: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    th, tw = int(target[0]), int(target[1])
    if th < 1 or tw < 1:
        raise ValueError("target dims must be >= 1")
    h, w = planes.shape[-2:]
    if h == 0 or w == 0:
        raise ValueError("empty grid")
    if (h, w) == (th, tw):
        return planes.copy()
    y0, y1, fy = _axis_lerp(h, th)
    x0, x1, fx = _axis_lerp(w, tw)
    # lerp form a + f*(b-a) keeps constant inputs bit-exact
    rows = planes[..., y0, :] + fy[:, None] * (planes[..., y1, :] - planes[..., y0, :])
    out = rows[..., :, x0] + fx[None, :] * (rows[..., :, x1] - rows[..., :, x0])
    return out


def resize_bilinear(grid, target: tuple[int, int]):
    """Bilinear resize (align-corners-false) of a FeatureGrid or 2-d array."""
    if isinstance(grid, FeatureGrid):
        return FeatureGrid(_resize_planes(grid.data, target))
    arr = np.asarray(grid, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty grid")
    if arr.ndim == 2:
        return _resize_planes(arr[None], target)[0]
    if arr.ndim == 3:
        return _resize_planes(arr, target)
    raise ValueError("resize expects a 2-d or 3-d array")


def resize_nearest(arr: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resize; never introduces new values (mask-safe)."""
    arr = np.asarray(arr)
    th, tw = int(target[0]), int(target[1])
    if th < 1 or tw < 1:
        raise ValueError("target dims must be >= 1")
    h, w = arr.shape[:2]
    if h == 0 or w == 0:
        raise ValueError("empty grid")
    ys = np.minimum(((np.arange(th) + 0.5) * (h / th)).astype(np.int64), h - 1)
    xs = np.minimum(((np.arange(tw) + 0.5) * (w / tw)).astype(np.int64), w - 1)
    return arr[np.ix_(ys, xs)]


def rgb_to_gray(img: np.ndarray) -> np.ndarray:
    """Convert an (H, W, 3) image to grayscale with the 0.299/0.587/0.114 luma."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        r, g, b = GRAY_WEIGHTS
        return img[..., 0] * r + img[..., 1] * g + img[..., 2] * b
    raise ValueError(f"expected (H,W) or (H,W,3) image, got shape {img.shape}")


def pad_to_multiple(img: np.ndarray, stride: int, mode: str = "reflect") -> np.ndarray:
    """Pad the bottom/right edges so both dims divide by stride."""
    h, w = img.shape
    ph = (-h) % stride
    pw = (-w) % stride
    if ph == 0 and pw == 0:
        return img
    if mode == "reflect" and (h == 1 or w == 1):
        mode = "edge"
    return np.pad(img, ((0, ph), (0, pw)), mode=mode)


def avg_pool(img: np.ndarray, stride: int) -> np.ndarray:
    """Average-pool a 2-d array over stride x stride blocks."""
    h, w = img.shape
    if h % stride or w % stride:
        raise ValueError("dims must divide by stride before pooling")
    return img.reshape(h // stride, stride, w // stride, stride).mean(axis=(1, 3))


def upsample_guided(soft: np.ndarray, guide: np.ndarray, stride: int,
                    sigma: float = 0.1) -> np.ndarray:
    """Upsample a stride-resolution soft map with intensity guidance.

    Each full-resolution pixel blends its four surrounding stride cells with
    bilinear weights modulated by a Gaussian on the difference between the
    pixel intensity and the cell mean intensity. On piecewise-constant
    images this snaps soft-mask edges back to image edges. sigma <= 0 falls
    back to plain bilinear weights.
    """
    soft = np.asarray(soft, dtype=np.float64)
    guide = np.asarray(guide, dtype=np.float64)
    h, w = guide.shape
    gh, gw = soft.shape
    if stride == 1 and (gh, gw) == (h, w):
        return soft.copy()
    cell_guide = avg_pool(pad_to_multiple(guide, stride), stride)
    y0, y1, fy = _axis_lerp(gh, h)
    x0, x1, fx = _axis_lerp(gw, w)
    num = np.zeros((h, w))
    den = np.zeros((h, w))
    for yi, wy in ((y0, 1.0 - fy), (y1, fy)):
        for xi, wx in ((x0, 1.0 - fx), (x1, fx)):
            sw = wy[:, None] * wx[None, :]
            if sigma > 0:
                diff = guide - cell_guide[np.ix_(yi, xi)]
                sw = sw * np.exp(-(diff / sigma) ** 2)
            num += sw * soft[np.ix_(yi, xi)]
            den += sw
    fallback = _resize_planes(soft[None], (h, w))[0]
    small = den <= 1e-12
    out = np.where(small, fallback, num / np.where(small, 1.0, den))
    return out
