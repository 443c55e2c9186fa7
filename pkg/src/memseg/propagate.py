"""Per-frame propagation engine: encode, read memory, decode a mask, and
update the three memory tiers; handles multi-object scenes and forward /
backward / bidirectional runs.

Each object gets an independent memory bank (working + long-term + sensory
state); queries are shared. A session is strictly sequential; distinct
sessions never share mutable state, so the two halves of a bidirectional
run are independent.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .encoder import (AdapterParams, EncoderConfig, encode_query, encode_value,
                      _as_intensity)
from .grids import (FeatureGrid, FlatKeySet, MaskMap, rgb_to_gray,
                    upsample_guided)
from .memory import (GruParams, LongTermMemory, SensoryState, WorkingMemory,
                     affinity_topk, append_frame, combined_key_matrix,
                     combined_value_matrix, readout_topk, record_usage_topk,
                     sensory_deep_update, sensory_update)

log = logging.getLogger(__name__)

_DIRECTIONS = ("forward", "backward", "both")


@dataclass(frozen=True)
class PropagationConfig:
    """All engine knobs; defaults are the desk-scale working set."""

    r: int = 5
    t_min: int = 5
    t_max: int = 10
    num_prototypes: int = 32
    top_k: int | None = 30
    stride: int = 2
    alpha: float = 1.0
    direction: str = "forward"
    w_readout: float = 0.9
    w_sensory: float = 0.1
    threshold: float = 0.5
    key_channels: int = 16
    gradient_bins: int = 8
    coord_weight: float = 0.25
    norm_floor: float = 0.5
    key_gain: float = 4.0
    long_term_capacity: int = 512
    guided_sigma: float = 0.1
    sensory_rate: float = 0.3
    sensory_gain: float = 2.0
    similarity: str = "l2"

    def __post_init__(self):
        if self.direction not in _DIRECTIONS:
            raise ValueError(f"direction must be one of {_DIRECTIONS}")
        if abs(self.w_readout + self.w_sensory - 1.0) > 1e-9:
            raise ValueError("w_readout + w_sensory must equal 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        if not (1 <= self.t_min < self.t_max):
            raise ValueError("need 1 <= t_min < t_max")
        if self.r < 1 or self.num_prototypes < 1 or self.long_term_capacity < 1:
            raise ValueError("r, num_prototypes, long_term_capacity must be >= 1")
        if self.key_gain <= 0:
            raise ValueError("key_gain must be positive")
        if self.top_k is not None and self.top_k < 1:
            object.__setattr__(self, "top_k", None)

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(stride=self.stride, key_channels=self.key_channels,
                             feature_channels=self.key_channels,
                             gradient_bins=self.gradient_bins,
                             coord_weight=self.coord_weight,
                             norm_floor=self.norm_floor)


@dataclass(frozen=True)
class ConsolidationEvent:
    """One working-memory consolidation; logged as frame=<n> prototypes=<p>."""

    frame_index: int
    session_position: int
    prototypes: int
    working_count_after: int


@dataclass
class SessionResult:
    """Outputs of one propagation run.

    ``masks[i]`` is None only for frames a one-directional run from a
    mid-sequence annotation never visits.
    """

    masks: list[MaskMap | None]
    timings: dict[int, float]
    events: list[ConsolidationEvent]
    annotated_index: int

    @property
    def visited(self) -> list[int]:
        return [i for i, m in enumerate(self.masks) if m is not None]


class _ObjectBank:
    """Working + long-term + sensory memory of a single object."""

    def __init__(self, cfg: PropagationConfig, grid_shape: tuple[int, int],
                 value_channels: int):
        self.working = WorkingMemory(t_min=cfg.t_min, t_max=cfg.t_max, r=cfg.r)
        self.long_term = LongTermMemory(capacity=cfg.long_term_capacity,
                                        num_prototypes=cfg.num_prototypes)
        label_channel = value_channels - 1
        self.sensory = SensoryState(
            grid_shape,
            gru_fast=GruParams.smoothing(1, update_rate=cfg.sensory_rate,
                                         gain=cfg.sensory_gain),
            gru_deep=GruParams.smoothing(value_channels,
                                         update_rate=cfg.sensory_rate,
                                         gain=cfg.sensory_gain,
                                         input_channel=label_channel))


class Session:
    """Sequential propagation state over one ordering of the frames."""

    def __init__(self, frames, annotated_index: int, annotation: MaskMap,
                 cfg: PropagationConfig, order: list[int],
                 adapter: AdapterParams | None = None):
        self.frames = frames
        self.annotated_index = annotated_index
        self.annotation = annotation
        self.cfg = cfg
        self.enc_cfg = cfg.encoder_config()
        self.adapter = None
        if adapter is not None and cfg.alpha * adapter.alpha != 0.0:
            self.adapter = adapter.scaled(cfg.alpha)
        self.order = order
        self.cursor = 1
        self.masks: dict[int, MaskMap] = {annotated_index: annotation}
        self.timings: dict[int, float] = {annotated_index: 0.0}
        self.events: list[ConsolidationEvent] = []

        query, feat = self._encode(frames[annotated_index])
        self.grid_shape = (feat.height, feat.width)
        self.num_objects = annotation.num_labels
        value_channels = feat.channels + 1
        self.banks = [_ObjectBank(cfg, self.grid_shape, value_channels)
                      for _ in range(self.num_objects)]
        for oid, bank in enumerate(self.banks, start=1):
            value = encode_value(feat, annotation, oid, stride=cfg.stride)
            append_frame(bank.working, query, value.data,
                         frame_index=annotated_index)
            sensory_deep_update(bank.sensory, value)

    # -- helpers ---------------------------------------------------------

    def _gray(self, frame) -> np.ndarray:
        img = np.asarray(frame)
        if img.ndim == 3:
            img = rgb_to_gray(img)
        return img

    def _encode(self, frame):
        query, feat = encode_query(self._gray(frame), self.enc_cfg,
                                   adapter=self.adapter)
        if self.cfg.key_gain != 1.0:
            # sharpen the match distribution: scaling keys and queries by g
            # multiplies every pairwise -|k - q|^2 similarity by g^2
            query = FlatKeySet(data=query.data * self.cfg.key_gain,
                               origin=query.origin)
        return query, feat

    @property
    def finished(self) -> bool:
        return self.cursor >= len(self.order)

    def _resolve_index(self, frame) -> int:
        if isinstance(frame, (int, np.integer)):
            return int(frame)
        arr = np.asarray(frame)
        expected = self.order[self.cursor] if not self.finished else None
        if expected is not None and np.array_equal(arr, np.asarray(self.frames[expected])):
            return expected
        for idx in self.order:
            if np.array_equal(arr, np.asarray(self.frames[idx])):
                return idx
        raise ValueError("sequence order violation")

    # -- engine ----------------------------------------------------------

    def step(self, frame) -> MaskMap:
        index = self._resolve_index(frame)
        if self.finished or index != self.order[self.cursor]:
            raise ValueError("sequence order violation")
        started = time.perf_counter()
        position = self.cursor
        cfg = self.cfg
        image = self._gray(self.frames[index])
        query, feat = self._encode(image)

        softs = np.empty((self.num_objects, *self.grid_shape))
        full = np.empty((self.num_objects, *image.shape[:2]))
        guide = _as_intensity(image)
        affinities = []
        for o, bank in enumerate(self.banks):
            keys = combined_key_matrix(bank.working, bank.long_term)
            idx, vals = affinity_topk(keys, query.data, top_k=cfg.top_k,
                                      similarity=cfg.similarity)
            affinities.append((idx, vals))
            values = combined_value_matrix(bank.working, bank.long_term)
            f = readout_topk(values, idx, vals)
            label = f[feat.channels].reshape(self.grid_shape)
            hidden = (bank.sensory.label_plane + 1.0) / 2.0
            softs[o] = cfg.w_readout * label + cfg.w_sensory * hidden
            full[o] = upsample_guided(softs[o], guide, cfg.stride,
                                      sigma=cfg.guided_sigma)[:image.shape[0],
                                                             :image.shape[1]]
        mask = aggregate_soft(full, cfg.threshold)

        for o, bank in enumerate(self.banks):
            sensory_update(bank.sensory, softs[o][None])
        for o, bank in enumerate(self.banks):
            idx, vals = affinities[o]
            record_usage_topk(bank.working, idx, vals)
        if position % cfg.r == 0:
            for o, bank in enumerate(self.banks):
                value = encode_value(feat, mask, o + 1, stride=cfg.stride)
                moved = append_frame(bank.working, query, value.data,
                                     frame_index=index, ltm=bank.long_term)
                sensory_deep_update(bank.sensory, value)
                if moved and o == 0:
                    event = ConsolidationEvent(
                        frame_index=index, session_position=position,
                        prototypes=moved,
                        working_count_after=bank.working.frame_count - 1)
                    self.events.append(event)
                    log.info("frame=%d prototypes=%d", index, moved)

        self.masks[index] = mask
        self.timings[index] = time.perf_counter() - started
        self.cursor += 1
        return mask


def aggregate_soft(softs: np.ndarray, threshold: float = 0.5) -> MaskMap:
    """Fuse per-object soft maps into one MaskMap.

    Object logits are shifted by (0.5 - threshold) so a single object's
    soft value wins against the background logit 1 - max(soft) exactly
    when it exceeds the threshold; ties go to the background.
    """
    shifted = np.asarray(softs, dtype=np.float64) + (0.5 - threshold)
    bg = 1.0 - shifted.max(axis=0)
    logits = np.concatenate([bg[None], shifted], axis=0)
    logits = logits - logits.max(axis=0, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=0, keepdims=True)
    labels = probs.argmax(axis=0).astype(np.int32)
    return MaskMap(labels=labels, probs=probs)


def decode(f: FeatureGrid, h: SensoryState, cfg: PropagationConfig,
           guide: np.ndarray | None = None) -> MaskMap:
    """Single-object decode: fuse the readout label channel (last channel
    of ``f``) with the sensory label plane, optionally upsample against an
    intensity guide, and aggregate against the background."""
    label = f.data[-1]
    hidden = (h.label_plane + 1.0) / 2.0
    soft = cfg.w_readout * label + cfg.w_sensory * hidden
    if guide is not None:
        guide = _as_intensity(guide)
        soft = upsample_guided(soft, guide, cfg.stride,
                               sigma=cfg.guided_sigma)[:guide.shape[0],
                                                       :guide.shape[1]]
    return aggregate_soft(soft[None], cfg.threshold)


def init_session(frames, annotated_index: int, annotation: MaskMap,
                 cfg: PropagationConfig,
                 adapter: AdapterParams | None = None) -> Session:
    """Start a session at the annotated frame, per the configured
    direction (``both`` is handled by :func:`run`)."""
    n = len(frames)
    if not 0 <= annotated_index < n:
        raise ValueError("annotated frame index out of range")
    first = np.asarray(frames[annotated_index])
    if first.shape[:2] != (annotation.height, annotation.width):
        raise ValueError("annotation dims do not match frames")
    if not (annotation.labels > 0).any():
        raise ValueError("empty annotation")
    if cfg.direction == "backward":
        order = [annotated_index] + list(range(annotated_index - 1, -1, -1))
    else:
        order = [annotated_index] + list(range(annotated_index + 1, n))
    return Session(frames, annotated_index, annotation, cfg, order,
                   adapter=adapter)


def _collect(session: Session, n: int) -> SessionResult:
    masks: list[MaskMap | None] = [session.masks.get(i) for i in range(n)]
    return SessionResult(masks=masks, timings=dict(session.timings),
                         events=list(session.events),
                         annotated_index=session.annotated_index)


def run(frames, annotated_index: int, annotation: MaskMap,
        cfg: PropagationConfig,
        adapter: AdapterParams | None = None) -> SessionResult:
    """Propagate the annotation through the whole sequence.

    ``both`` runs two independent sessions from the same annotation; the
    annotated frame is emitted once.
    """
    n = len(frames)
    if cfg.direction == "both":
        fwd = run(frames, annotated_index, annotation,
                  replace(cfg, direction="forward"), adapter=adapter)
        bwd = run(frames, annotated_index, annotation,
                  replace(cfg, direction="backward"), adapter=adapter)
        masks = [bwd.masks[i] if i < annotated_index else fwd.masks[i]
                 for i in range(n)]
        timings = dict(bwd.timings)
        timings.update(fwd.timings)
        return SessionResult(masks=masks, timings=timings,
                             events=bwd.events + fwd.events,
                             annotated_index=annotated_index)
    session = init_session(frames, annotated_index, annotation, cfg,
                           adapter=adapter)
    while not session.finished:
        session.step(session.order[session.cursor])
    return _collect(session, n)
