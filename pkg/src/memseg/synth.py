"""Deterministic synthetic sequences with exact ground truth, plus a
brute-force template-matching tracker used as an independent oracle.

Shapes are rasterized from analytic predicates evaluated at integer pixel
centers, so ground-truth masks are exact by construction. All randomness
(noise, blob geometry) comes from counter-based seed sequences: frame t of
a scene is reproducible in isolation, independent of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .grids import MaskMap

_SPLIT_GAP = 3  # columns erased through the centroid when a split triggers
_BLOB_PARTS = 4


@dataclass(frozen=True)
class ObjectSpec:
    """One moving object.

    ``size`` is the disk radius, the rectangle half-extents (hy, hx), or
    the blob base radius. Motion is center + velocity*t with per-frame
    rotation (degrees) and scale factors applied to the shape.
    """

    shape: str = "disk"
    center: tuple[float, float] = (32.0, 32.0)   # (row, col)
    size: float | tuple[float, float] = 8.0
    intensity: float = 200.0
    velocity: tuple[float, float] = (0.0, 0.0)   # (rows, cols) per frame
    rotation: float = 0.0                        # degrees per frame
    scale: float = 1.0                           # size factor per frame
    split_at: int | None = None                  # frame index; 1 -> 2 components

    def __post_init__(self):
        if self.shape not in ("disk", "rectangle", "blob"):
            raise ValueError(f"unknown shape '{self.shape}'")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def rigid_translation(self) -> bool:
        return (self.rotation == 0.0 and self.scale == 1.0
                and self.split_at is None)


@dataclass(frozen=True)
class OccluderSpec:
    """Opaque vertical bar sweeping the canvas during [start, stop)."""

    start: int
    stop: int
    x: float = 0.0
    width: float = 6.0
    velocity: float = 0.0       # columns per frame
    intensity: float = 30.0


@dataclass(frozen=True)
class SceneSpec:
    """Full description of one synthetic sequence."""

    height: int = 64
    width: int = 64
    num_frames: int = 20
    seed: int = 0
    objects: tuple[ObjectSpec, ...] = (ObjectSpec(),)
    background: str = "uniform"                  # uniform | gradient | noise
    background_intensity: float = 60.0
    background_range: tuple[float, float] = (30.0, 90.0)
    noise_sigma: float = 4.0                     # used when background == "noise"
    occluder: OccluderSpec | None = None

    def __post_init__(self):
        if self.height < 4 or self.width < 4:
            raise ValueError("canvas too small")
        if self.num_frames < 1:
            raise ValueError("need at least one frame")
        if self.background not in ("uniform", "gradient", "noise"):
            raise ValueError(f"unknown background '{self.background}'")
        if not self.objects:
            raise ValueError("need at least one object")
        object.__setattr__(self, "objects", tuple(self.objects))

    @property
    def rigid_translation(self) -> bool:
        return (len(self.objects) == 1 and self.occluder is None
                and self.objects[0].rigid_translation)


def _blob_parts(spec: ObjectSpec, obj_index: int, seed: int) -> list[tuple[float, float, float]]:
    """Deterministic (dy, dx, radius) sub-disks making up a blob."""
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed,
                                                       spawn_key=(9000, obj_index)))
    base = float(spec.size)
    parts = [(0.0, 0.0, 0.6 * base)]
    for _ in range(_BLOB_PARTS):
        angle = rng.uniform(0.0, 2.0 * math.pi)
        dist = rng.uniform(0.2, 0.6) * base
        parts.append((dist * math.sin(angle), dist * math.cos(angle),
                      rng.uniform(0.4, 0.7) * base))
    return parts


def _object_geometry(spec: ObjectSpec, t: int):
    """Center, rotation (radians), and scale at frame t."""
    cy = spec.center[0] + spec.velocity[0] * t
    cx = spec.center[1] + spec.velocity[1] * t
    theta = math.radians(spec.rotation * t)
    scale = spec.scale ** t
    return cy, cx, theta, scale


def _object_extent(spec: ObjectSpec, theta: float, scale: float,
                   parts=None) -> tuple[float, float]:
    """Half-extents (ey, ex) of the shape's axis-aligned bounding box."""
    if spec.shape == "disk":
        r = float(spec.size) * scale
        return r, r
    if spec.shape == "rectangle":
        hy, hx = (spec.size if isinstance(spec.size, tuple) else
                  (float(spec.size), float(spec.size)))
        hy, hx = hy * scale, hx * scale
        c, s = abs(math.cos(theta)), abs(math.sin(theta))
        return s * hx + c * hy, c * hx + s * hy
    ext = max(math.hypot(dy, dx) + r for dy, dx, r in parts) * scale
    return ext, ext


def _rasterize(spec: ObjectSpec, t: int, height: int, width: int,
               parts=None) -> np.ndarray:
    cy, cx, theta, scale = _object_geometry(spec, t)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    if spec.shape == "disk":
        r = float(spec.size) * scale
        mask = dy * dy + dx * dx <= r * r
    elif spec.shape == "rectangle":
        hy, hx = (spec.size if isinstance(spec.size, tuple) else
                  (float(spec.size), float(spec.size)))
        hy, hx = hy * scale, hx * scale
        c, s = math.cos(theta), math.sin(theta)
        u = c * dx + s * dy
        v = -s * dx + c * dy
        mask = (np.abs(u) <= hx) & (np.abs(v) <= hy)
    else:
        c, s = math.cos(theta), math.sin(theta)
        mask = np.zeros((height, width), dtype=bool)
        for pdy, pdx, pr in parts:
            ry = (s * pdx + c * pdy) * scale
            rx = (c * pdx - s * pdy) * scale
            rr = pr * scale
            mask |= (dy - ry) ** 2 + (dx - rx) ** 2 <= rr * rr
    if spec.split_at is not None and t >= spec.split_at:
        col = int(round(cx))
        lo = max(col - _SPLIT_GAP // 2, 0)
        mask[:, lo:lo + _SPLIT_GAP] = False
    return mask


def _background(scene: SceneSpec, t: int) -> np.ndarray:
    h, w = scene.height, scene.width
    if scene.background == "gradient":
        lo, hi = scene.background_range
        ramp = lo + (hi - lo) * (np.arange(w, dtype=np.float64) / max(w - 1, 1))
        return np.tile(ramp, (h, 1))
    return np.full((h, w), float(scene.background_intensity))


def generate(scene: SceneSpec) -> tuple[list[np.ndarray], list[MaskMap]]:
    """Rasterize a scene into uint8 frames and exact ground-truth masks.

    Raises "object out of bounds" if any object's bounding box comes
    within one pixel of the canvas border at any frame.
    """
    frames: list[np.ndarray] = []
    masks: list[MaskMap] = []
    blob_parts = {i: _blob_parts(o, i, scene.seed)
                  for i, o in enumerate(scene.objects) if o.shape == "blob"}
    for t in range(scene.num_frames):
        img = _background(scene, t)
        labels = np.zeros((scene.height, scene.width), dtype=np.int32)
        for i, obj in enumerate(scene.objects):
            cy, cx, theta, scale = _object_geometry(obj, t)
            ey, ex = _object_extent(obj, theta, scale, blob_parts.get(i))
            if (cy - ey < 1.0 or cy + ey > scene.height - 2.0
                    or cx - ex < 1.0 or cx + ex > scene.width - 2.0):
                raise ValueError("object out of bounds")
            m = _rasterize(obj, t, scene.height, scene.width, blob_parts.get(i))
            img[m] = obj.intensity
            labels[m] = i + 1
        occ = scene.occluder
        if occ is not None and occ.start <= t < occ.stop:
            x = occ.x + occ.velocity * t
            cols = np.abs(np.arange(scene.width) - x) <= occ.width / 2.0
            img[:, cols] = occ.intensity
            labels[:, cols] = 0
        if scene.background == "noise":
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=scene.seed, spawn_key=(t,)))
            img = img + rng.normal(0.0, scene.noise_sigma, img.shape)
        frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
        masks.append(MaskMap.from_labels(labels, num_labels=len(scene.objects)))
    return frames, masks


def generate_volume(axes: tuple[float, float, float],
                    dims: tuple[int, int, int],
                    center: tuple[float, float, float] | None = None,
                    foreground: float = 200.0,
                    background: float = 60.0) -> tuple[list[np.ndarray], list[MaskMap]]:
    """Slices of an axis-aligned ellipsoid with analytically exact
    per-slice ellipse masks.

    ``axes`` are the semi-axes (az, ay, ax) matching ``dims`` (depth,
    height, width); slicing runs along the first axis.
    """
    az, ay, ax = (float(a) for a in axes)
    depth, height, width = dims
    if center is None:
        center = ((depth - 1) / 2.0, (height - 1) / 2.0, (width - 1) / 2.0)
    cz, cy, cx = center
    if az <= 0 or ay <= 0 or ax <= 0:
        raise ValueError("axes must be positive")
    slices: list[np.ndarray] = []
    masks: list[MaskMap] = []
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    for z in range(depth):
        shrink = 1.0 - ((z - cz) / az) ** 2
        labels = np.zeros((height, width), dtype=np.int32)
        if shrink > 0:
            by, bx = ay * math.sqrt(shrink), ax * math.sqrt(shrink)
            inside = (((yy - cy) / by) ** 2 + ((xx - cx) / bx) ** 2) <= 1.0
            labels[inside] = 1
        img = np.where(labels > 0, foreground, background)
        slices.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
        masks.append(MaskMap.from_labels(labels, num_labels=1))
    return slices, masks


def slice_area(axes: tuple[float, float, float], dims: tuple[int, int, int],
               z: int, center: tuple[float, float, float] | None = None) -> float:
    """Analytic area (pixels) of the ellipse cross-section at slice z."""
    az, ay, ax = (float(a) for a in axes)
    if center is None:
        depth, height, width = dims
        cz = (depth - 1) / 2.0
    else:
        cz = center[0]
    shrink = 1.0 - ((z - cz) / az) ** 2
    if shrink <= 0:
        return 0.0
    return math.pi * ay * ax * shrink


def oracle_track(frames, annotation: MaskMap, annotated_index: int = 0,
                 scene: SceneSpec | None = None) -> list[MaskMap]:
    """Exhaustive-search translation tracker used as an independent
    baseline.

    The annotated frame's intensity patch (the annotation's bounding box)
    is matched against every frame at every integer shift by sum of
    squared differences; each output mask is the annotation translated by
    the winning shift (row-major first on ties). If a scene is supplied it
    must describe a single unoccluded object with no rotation, scaling, or
    split.
    """
    if scene is not None and not scene.rigid_translation:
        raise ValueError("oracle supports rigid translation only")
    fg = annotation.labels > 0
    if not fg.any():
        raise ValueError("empty annotation")
    rows = np.flatnonzero(fg.any(axis=1))
    cols = np.flatnonzero(fg.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1]) + 1
    c0, c1 = int(cols[0]), int(cols[-1]) + 1
    template = np.asarray(frames[annotated_index], dtype=np.float64)[r0:r1, c0:c1]
    out: list[MaskMap] = []
    for idx, frame in enumerate(frames):
        if idx == annotated_index:
            out.append(annotation)
            continue
        img = np.asarray(frame, dtype=np.float64)
        windows = sliding_window_view(img, template.shape)
        ssd = ((windows - template[None, None]) ** 2).sum(axis=(2, 3))
        best = np.unravel_index(int(np.argmin(ssd)), ssd.shape)
        dy, dx = int(best[0]) - r0, int(best[1]) - c0
        shifted = np.zeros_like(annotation.labels)
        src = fg[max(0, -dy):fg.shape[0] - max(0, dy),
                 max(0, -dx):fg.shape[1] - max(0, dx)]
        shifted[max(0, dy):shifted.shape[0] - max(0, -dy),
                max(0, dx):shifted.shape[1] - max(0, -dx)][src] = 1
        out.append(MaskMap.from_labels(shifted, num_labels=annotation.num_labels))
    return out
