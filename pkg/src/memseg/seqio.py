"""Dataset ingestion and plain-file formats.

A sequence lives on disk as ``<seq>/frames/NNNNN.png`` plus an optional
``<seq>/masks/NNNNN.png`` with matching indices. Frames are 8-bit PNGs
(RGB converted to luma on load); masks are single-channel indexed PNGs
whose pixel values are the object ids (0 = background). Configuration is
a flat plain-text ``key=value`` file; parsing errors always name the
offending key or line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .grids import MaskMap, resize_bilinear, resize_nearest, rgb_to_gray
from .propagate import PropagationConfig
from .synth import ObjectSpec, OccluderSpec, SceneSpec

__all__ = [
    "SequenceFolder", "RunConfig", "load_sequence", "read_frame",
    "write_frame", "read_mask", "write_mask", "write_sequence",
    "collect_masks", "parse_config", "parse_config_file", "parse_ratio",
    "partition_counts", "scene_from_mapping", "scene_to_config",
    "mask_palette",
]

_FRAME_DIGITS = 5


def _frame_name(index: int) -> str:
    return f"{index:0{_FRAME_DIGITS}d}.png"


def mask_palette() -> bytes:
    """768-byte palette assigning each label id a stable distinct color.

    Id 0 maps to black; ids spread their bits over the RGB channels so
    small ids get saturated, easily distinguished colors.
    """
    pal = np.zeros((256, 3), dtype=np.uint8)
    ids = np.arange(256)
    for shift in range(8):
        for c in range(3):
            pal[:, c] |= (((ids >> (3 * shift + c)) & 1) << (7 - shift)).astype(np.uint8)
    return pal.tobytes()


_PALETTE = mask_palette()


def read_frame(path) -> np.ndarray:
    """Load one frame as a 2-d uint8 intensity image (RGB -> luma)."""
    with Image.open(path) as img:
        if img.mode in ("L", "I;16", "P", "1"):
            arr = np.asarray(img.convert("L"))
        else:
            arr = rgb_to_gray(np.asarray(img.convert("RGB")).astype(np.float64))
            arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    return arr


def write_frame(path, image: np.ndarray) -> None:
    """Write a 2-d uint8 intensity image as an 8-bit grayscale PNG."""
    arr = np.asarray(image)
    if arr.ndim != 2:
        raise ValueError("frame must be a 2-d array")
    Image.fromarray(arr.astype(np.uint8), mode="L").save(path, format="PNG")


def read_mask(path) -> MaskMap:
    """Load a single-channel indexed PNG whose pixel values are label ids."""
    with Image.open(path) as img:
        if img.mode not in ("P", "L"):
            raise ValueError(f"mask '{path}' is not a single-channel indexed image")
        arr = np.asarray(img, dtype=np.int32)
    return MaskMap.from_labels(arr)


def write_mask(path, mask) -> None:
    """Write a label grid (MaskMap or 2-d integer array) as an indexed PNG."""
    labels = mask.labels if isinstance(mask, MaskMap) else mask
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError("mask must be a 2-d label grid")
    if arr.min(initial=0) < 0 or arr.max(initial=0) > 255:
        raise ValueError("mask labels must fit in one byte")
    img = Image.fromarray(arr.astype(np.uint8), mode="P")
    img.putpalette(_PALETTE)
    img.save(path, format="PNG")


def _numeric_stem(path: Path) -> int:
    try:
        return int(path.stem)
    except ValueError:
        raise ValueError(f"non-numeric frame filename '{path.name}'") from None


def _indexed_pngs(folder: Path) -> list[tuple[int, Path]]:
    pairs = sorted((_numeric_stem(p), p) for p in folder.glob("*.png"))
    for (a, pa), (b, pb) in zip(pairs, pairs[1:]):
        if a == b:
            raise ValueError(f"non-monotonic frame indices: '{pa.name}' and '{pb.name}'")
    return pairs


@dataclass(frozen=True)
class SequenceFolder:
    """An on-disk image sequence with sparse mask annotations.

    ``frames`` are ordered by their numeric filename index; ``annotations``
    maps a frame index to its mask file. ``resolution`` (height, width),
    when set, resizes loaded frames bilinearly and masks nearest-neighbor.
    """

    path: Path
    frames: tuple[Path, ...]
    annotations: dict[int, Path]
    indices: tuple[int, ...]
    dims: tuple[int, int]
    resolution: tuple[int, int] | None = None

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def out_dims(self) -> tuple[int, int]:
        """Dims frames/masks actually load at."""
        return self.resolution if self.resolution is not None else self.dims

    def position_of(self, frame_index: int) -> int:
        """Position in the ordered sequence of the frame with this index."""
        try:
            return self.indices.index(frame_index)
        except ValueError:
            raise ValueError(f"no frame with index {frame_index}") from None

    def load_frame(self, position: int) -> np.ndarray:
        arr = read_frame(self.frames[position])
        if self.resolution is not None and arr.shape != self.resolution:
            arr = resize_bilinear(arr.astype(np.float64), self.resolution)
            arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
        return arr

    def load_frames(self) -> list[np.ndarray]:
        return [self.load_frame(i) for i in range(len(self.frames))]

    def load_mask(self, frame_index: int) -> MaskMap:
        mask = read_mask(self.annotations[frame_index])
        if self.resolution is not None and mask.labels.shape != self.resolution:
            mask = MaskMap.from_labels(resize_nearest(mask.labels, self.resolution))
        return mask

    @property
    def object_ids(self) -> list[int]:
        """Sorted union of label ids present in the annotations (gaps kept)."""
        ids: set[int] = set()
        for index in self.annotations:
            mask = read_mask(self.annotations[index])
            ids.update(int(v) for v in np.unique(mask.labels) if v != 0)
        return sorted(ids)


def _png_dims(path: Path) -> tuple[int, int]:
    with Image.open(path) as img:
        return img.height, img.width


def load_sequence(path, resolution: tuple[int, int] | None = None) -> SequenceFolder:
    """Ingest a sequence folder, validating layout and mask geometry.

    Every mask must match its frame's dimensions; with ``resolution`` set,
    loads are resized (frames bilinearly, masks nearest-neighbor — which
    never invents labels).
    """
    root = Path(path)
    frames_dir = root / "frames"
    if not frames_dir.is_dir():
        raise ValueError(f"missing frames directory '{frames_dir}'")
    pairs = _indexed_pngs(frames_dir)
    if not pairs:
        raise ValueError(f"no frames in '{frames_dir}'")
    indices = tuple(i for i, _ in pairs)
    frames = tuple(p for _, p in pairs)
    dims = _png_dims(frames[0])
    for i, p in pairs:
        if _png_dims(p) != dims:
            raise ValueError(f"frame {i} dims differ from frame {indices[0]}")

    annotations: dict[int, Path] = {}
    masks_dir = root / "masks"
    if masks_dir.is_dir():
        known = set(indices)
        for i, p in _indexed_pngs(masks_dir):
            if i not in known:
                raise ValueError(f"mask {p.name} has no matching frame")
            if _png_dims(p) != dims:
                raise ValueError(f"mask {i} dims do not match frame dims {dims}")
            annotations[i] = p
    return SequenceFolder(path=root, frames=frames, annotations=annotations,
                          indices=indices, dims=dims, resolution=resolution)


def write_sequence(path, frames, masks=None, start_index: int = 0) -> Path:
    """Write frames (and optionally a mask per frame) as a sequence folder."""
    root = Path(path)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    if masks is not None:
        (root / "masks").mkdir(parents=True, exist_ok=True)
    for at, frame in enumerate(frames):
        name = _frame_name(start_index + at)
        write_frame(root / "frames" / name, frame)
        if masks is not None:
            write_mask(root / "masks" / name, masks[at])
    return root


def collect_masks(path) -> dict[int, Path]:
    """Index the mask PNGs under a directory.

    Accepts either a flat directory of ``NNNNN.png`` files or a sequence
    folder (its ``masks/`` subdirectory is used).
    """
    root = Path(path)
    if (root / "masks").is_dir():
        root = root / "masks"
    if not root.is_dir():
        raise ValueError(f"missing mask directory '{root}'")
    found = dict(_indexed_pngs(root))
    if not found:
        raise ValueError(f"no masks in '{root}'")
    return found


# -- flat key=value configuration ------------------------------------------

def parse_config(text: str) -> dict[str, str]:
    """Parse flat ``key=value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno} is not key=value: '{line}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ValueError(f"config line {lineno} has an empty key")
        if key in out:
            raise ValueError(f"duplicate config key '{key}'")
        out[key] = value
    return out


def parse_config_file(path) -> dict[str, str]:
    return parse_config(Path(path).read_text())


def _parse_int(key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"invalid value for config key '{key}': '{raw}' is not an integer") from None


def _parse_float(key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"invalid value for config key '{key}': '{raw}' is not a number") from None
    if not np.isfinite(value):
        raise ValueError(f"invalid value for config key '{key}': '{raw}' is not finite")
    return value


def _parse_pair(key: str, raw: str) -> tuple[float, float]:
    parts = [p for p in raw.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ValueError(f"invalid value for config key '{key}': expected two numbers")
    return _parse_float(key, parts[0]), _parse_float(key, parts[1])


def _parse_resolution(raw: str) -> tuple[int, int] | None:
    if raw.lower() == "native":
        return None
    parts = [p for p in raw.lower().replace("x", " ").replace(",", " ").split() if p]
    if len(parts) == 1:
        side = _parse_int("resolution", parts[0])
        return side, side
    if len(parts) == 2:
        return _parse_int("resolution", parts[0]), _parse_int("resolution", parts[1])
    raise ValueError("invalid value for config key 'resolution': "
                     "expected 'native', one side, or HxW")


_PROP_INT_KEYS = frozenset({
    "r", "t_min", "t_max", "num_prototypes", "stride", "key_channels",
    "gradient_bins", "long_term_capacity",
})
_PROP_FLOAT_KEYS = frozenset({
    "alpha", "w_readout", "w_sensory", "threshold", "coord_weight",
    "norm_floor", "key_gain", "guided_sigma", "sensory_rate", "sensory_gain",
})
_PROP_STR_KEYS = frozenset({"direction", "similarity"})


@dataclass(frozen=True)
class RunConfig:
    """Everything a command-line run needs: the propagation settings plus
    ingest resolution, metric tolerance, and output directory."""

    propagation: PropagationConfig = field(default_factory=PropagationConfig)
    resolution: tuple[int, int] | None = (480, 480)
    tolerance: int | None = None
    out_dir: str | None = None

    @staticmethod
    def from_mapping(raw: dict[str, str]) -> "RunConfig":
        prop: dict[str, object] = {}
        resolution: tuple[int, int] | None = (480, 480)
        tolerance: int | None = None
        out_dir: str | None = None
        for key, value in raw.items():
            if key in _PROP_INT_KEYS:
                prop[key] = _parse_int(key, value)
            elif key in _PROP_FLOAT_KEYS:
                prop[key] = _parse_float(key, value)
            elif key in _PROP_STR_KEYS:
                prop[key] = value
            elif key == "top_k":
                prop[key] = None if value.lower() in ("none", "off") else _parse_int(key, value)
            elif key == "resolution":
                resolution = _parse_resolution(value)
            elif key == "tolerance":
                tolerance = None if value.lower() == "auto" else _parse_int(key, value)
                if tolerance is not None and tolerance < 0:
                    raise ValueError("invalid value for config key 'tolerance': must be >= 0")
            elif key == "out":
                out_dir = value
            else:
                raise ValueError(f"unknown config key '{key}'")
        try:
            propagation = PropagationConfig(**prop)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"invalid propagation settings: {exc}") from None
        return RunConfig(propagation=propagation, resolution=resolution,
                         tolerance=tolerance, out_dir=out_dir)

    @staticmethod
    def from_file(path) -> "RunConfig":
        return RunConfig.from_mapping(parse_config_file(path))


# -- synthetic scene descriptions -------------------------------------------

_SCENE_INT_KEYS = frozenset({"height", "width", "num_frames", "seed"})
_SCENE_FLOAT_KEYS = frozenset({"background_intensity", "noise_sigma"})
_OBJECT_FLOAT_KEYS = frozenset({"intensity", "rotation", "scale"})
_OCCLUDER_INT_KEYS = frozenset({"start", "stop"})
_OCCLUDER_FLOAT_KEYS = frozenset({"x", "width", "velocity", "intensity"})


def _object_from_mapping(prefix: str, raw: dict[str, str]) -> ObjectSpec:
    kw: dict[str, object] = {}
    for sub, value in raw.items():
        key = f"{prefix}.{sub}"
        if sub == "shape":
            kw[sub] = value
        elif sub in _OBJECT_FLOAT_KEYS:
            kw[sub] = _parse_float(key, value)
        elif sub in ("center", "velocity"):
            kw[sub] = _parse_pair(key, value)
        elif sub == "size":
            parts = [p for p in value.replace(",", " ").split() if p]
            kw[sub] = (_parse_pair(key, value) if len(parts) == 2
                       else _parse_float(key, value))
        elif sub == "split_at":
            kw[sub] = _parse_int(key, value)
        else:
            raise ValueError(f"unknown config key '{key}'")
    try:
        return ObjectSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid object '{prefix}': {exc}") from None


def scene_from_mapping(raw: dict[str, str]) -> SceneSpec:
    """Build a scene description from flat config keys.

    Object fields are grouped by prefix (``object1.shape=disk``); the
    optional occluder uses the ``occluder.`` prefix.
    """
    scene: dict[str, object] = {}
    objects: dict[int, dict[str, str]] = {}
    occluder: dict[str, str] = {}
    for key, value in raw.items():
        head, dot, sub = key.partition(".")
        if dot and head.startswith("object") and head[len("object"):].isdigit():
            objects.setdefault(int(head[len("object"):]), {})[sub] = value
        elif dot and head == "occluder":
            occluder[sub] = value
        elif key in _SCENE_INT_KEYS:
            scene[key] = _parse_int(key, value)
        elif key in _SCENE_FLOAT_KEYS:
            scene[key] = _parse_float(key, value)
        elif key == "background":
            scene[key] = value
        elif key == "background_range":
            scene[key] = _parse_pair(key, value)
        else:
            raise ValueError(f"unknown config key '{key}'")
    if objects:
        scene["objects"] = tuple(
            _object_from_mapping(f"object{n}", objects[n]) for n in sorted(objects))
    if occluder:
        kw: dict[str, object] = {}
        for sub, value in occluder.items():
            key = f"occluder.{sub}"
            if sub in _OCCLUDER_INT_KEYS:
                kw[sub] = _parse_int(key, value)
            elif sub in _OCCLUDER_FLOAT_KEYS:
                kw[sub] = _parse_float(key, value)
            else:
                raise ValueError(f"unknown config key '{key}'")
        try:
            scene["occluder"] = OccluderSpec(**kw)
        except (TypeError, ValueError) as exc:
            raise ValueError(f"invalid occluder: {exc}") from None
    try:
        return SceneSpec(**scene)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid scene: {exc}") from None


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def scene_to_config(scene: SceneSpec) -> str:
    """Serialize a scene description to the flat key=value format.

    Round-trips exactly: ``scene_from_mapping(parse_config(text))``
    rebuilds an equal scene.
    """
    lines = [f"height={scene.height}", f"width={scene.width}",
             f"num_frames={scene.num_frames}", f"seed={scene.seed}",
             f"background={scene.background}",
             f"background_intensity={scene.background_intensity}",
             f"background_range={_format_value(scene.background_range)}",
             f"noise_sigma={scene.noise_sigma}"]
    for n, obj in enumerate(scene.objects, start=1):
        prefix = f"object{n}"
        lines += [f"{prefix}.shape={obj.shape}",
                  f"{prefix}.center={_format_value(obj.center)}",
                  f"{prefix}.size={_format_value(obj.size)}",
                  f"{prefix}.intensity={obj.intensity}",
                  f"{prefix}.velocity={_format_value(obj.velocity)}",
                  f"{prefix}.rotation={obj.rotation}",
                  f"{prefix}.scale={obj.scale}"]
        if obj.split_at is not None:
            lines.append(f"{prefix}.split_at={obj.split_at}")
    if scene.occluder is not None:
        occ = scene.occluder
        lines += [f"occluder.start={occ.start}", f"occluder.stop={occ.stop}",
                  f"occluder.x={occ.x}", f"occluder.width={occ.width}",
                  f"occluder.velocity={occ.velocity}",
                  f"occluder.intensity={occ.intensity}"]
    return "".join(line + "\n" for line in lines)


def parse_ratio(raw: str) -> tuple[int, ...]:
    """Parse a split ratio like '3:1:1' into positive integer parts."""
    try:
        parts = tuple(int(p) for p in raw.split(":"))
    except ValueError:
        raise ValueError(f"invalid split ratio '{raw}'") from None
    if not parts or any(p <= 0 for p in parts):
        raise ValueError(f"invalid split ratio '{raw}'")
    return parts


def partition_counts(total: int, ratio: tuple[int, ...]) -> list[int]:
    """Contiguous chunk sizes proportional to the ratio, each at least 1."""
    if total < len(ratio):
        raise ValueError(f"cannot split {total} frames into {len(ratio)} parts")
    weight = sum(ratio)
    counts = [max(1, (total * r) // weight) for r in ratio]
    counts[0] += total - sum(counts)
    if counts[0] < 1:
        raise ValueError(f"cannot split {total} frames with ratio {ratio}")
    return counts
