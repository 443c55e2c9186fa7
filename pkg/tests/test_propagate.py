"""Tests for the propagation engine: configuration, decoding, session
stepping, direction handling, and consolidation events."""

import logging
import re

import numpy as np
import pytest

from memseg.encoder import AdapterParams
from memseg.grids import FeatureGrid, MaskMap
from memseg.memory import GruParams, SensoryState
from memseg.metrics import jaccard
from memseg.propagate import (
    ConsolidationEvent,
    PropagationConfig,
    aggregate_soft,
    decode,
    init_session,
    run,
)
from memseg.synth import ObjectSpec, SceneSpec, generate

_FAST = dict(r=2, t_min=2, t_max=4, num_prototypes=8, top_k=16)


def _tracking_scene(num_frames=8):
    return SceneSpec(
        height=48, width=64, num_frames=num_frames, seed=11,
        objects=(ObjectSpec(shape="disk", center=(24.0, 16.0), size=6.0,
                            velocity=(0.0, 1.0)),),
    )


def _static_scene(num_frames=8):
    return SceneSpec(
        height=48, width=64, num_frames=num_frames, seed=4,
        objects=(ObjectSpec(shape="disk", center=(24.0, 32.0), size=8.0),),
    )


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        (dict(direction="sideways"), "direction must be one of"),
        (dict(w_readout=0.8, w_sensory=0.1), "must equal 1"),
        (dict(threshold=0.0), "threshold must be in \\(0, 1\\)"),
        (dict(threshold=1.0), "threshold must be in \\(0, 1\\)"),
        (dict(t_min=5, t_max=5), "need 1 <= t_min < t_max"),
        (dict(r=0), "must be >= 1"),
        (dict(num_prototypes=0), "must be >= 1"),
        (dict(long_term_capacity=0), "must be >= 1"),
        (dict(key_gain=0.0), "key_gain must be positive"),
    ],
)
def test_config_validation(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        PropagationConfig(**kwargs)


def test_config_top_k_below_one_disables_sparsification():
    assert PropagationConfig(top_k=0).top_k is None
    assert PropagationConfig(top_k=-3).top_k is None
    assert PropagationConfig(top_k=12).top_k == 12


def test_config_maps_onto_encoder_config():
    cfg = PropagationConfig(stride=4, key_channels=16, gradient_bins=8,
                            coord_weight=0.5, norm_floor=0.25)
    enc = cfg.encoder_config()
    assert (enc.stride, enc.key_channels, enc.gradient_bins) == (4, 16, 8)
    assert (enc.coord_weight, enc.norm_floor) == (0.5, 0.25)


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------


def test_aggregate_soft_threshold_and_ties():
    assert aggregate_soft(np.full((1, 2, 2), 0.52)).labels.max() == 1
    assert aggregate_soft(np.full((1, 2, 2), 0.48)).labels.max() == 0
    # exactly at the threshold ties toward background
    assert aggregate_soft(np.full((1, 2, 2), 0.5)).labels.max() == 0
    assert aggregate_soft(np.full((1, 2, 2), 0.35), threshold=0.3).labels.max() == 1


def test_aggregate_soft_picks_the_strongest_object():
    softs = np.stack([np.full((2, 2), 0.7), np.full((2, 2), 0.9)])
    m = aggregate_soft(softs)
    assert (m.labels == 2).all()
    assert m.probs.shape == (3, 2, 2)


def _state_with_plane(shape, value):
    p = GruParams.smoothing(1)
    state = SensoryState(shape, gru_fast=p, gru_deep=p)
    state.h = np.full((1, *shape), value)
    return state


def test_decode_fuses_readout_and_sensory_with_declared_weights():
    f = FeatureGrid(np.full((3, 2, 2), 0.6))  # last channel = readout label
    state = _state_with_plane((2, 2), -0.6)  # sensory plane -> (h+1)/2 = 0.2
    close = PropagationConfig(w_readout=0.7, w_sensory=0.3)
    # 0.7*0.6 + 0.3*0.2 = 0.48 stays under the 0.5 threshold
    assert decode(f, state, close).labels.max() == 0
    heavy = PropagationConfig(w_readout=0.9, w_sensory=0.1)
    # 0.9*0.6 + 0.1*0.2 = 0.56 crosses it
    assert (decode(f, state, heavy).labels == 1).all()


def test_decode_with_guide_returns_full_resolution():
    f = FeatureGrid(np.full((3, 2, 2), 0.9))
    state = _state_with_plane((2, 2), 0.9)
    guide = np.full((4, 4), 0.5)
    m = decode(f, state, PropagationConfig(stride=2), guide=guide)
    assert m.labels.shape == (4, 4)
    assert (m.labels == 1).all()


# ---------------------------------------------------------------------------
# sessions
# ---------------------------------------------------------------------------


def test_init_session_validation():
    frames, masks = generate(_static_scene(num_frames=3))
    cfg = PropagationConfig(**_FAST)
    with pytest.raises(ValueError, match="annotated frame index out of range"):
        init_session(frames, 3, masks[0], cfg)
    with pytest.raises(ValueError, match="annotated frame index out of range"):
        init_session(frames, -1, masks[0], cfg)
    small = MaskMap.from_labels(np.ones((8, 8), dtype=int))
    with pytest.raises(ValueError, match="annotation dims do not match frames"):
        init_session(frames, 0, small, cfg)
    empty = MaskMap.from_labels(np.zeros((48, 64), dtype=int), num_labels=1)
    with pytest.raises(ValueError, match="empty annotation"):
        init_session(frames, 0, empty, cfg)


def test_session_enforces_the_visit_order():
    frames, masks = generate(_static_scene(num_frames=4))
    cfg = PropagationConfig(**_FAST)
    session = init_session(frames, 0, masks[0], cfg)
    with pytest.raises(ValueError, match="sequence order violation"):
        session.step(2)  # next frame must be 1
    session.step(1)
    with pytest.raises(ValueError, match="sequence order violation"):
        session.step(1)  # no revisiting
    session.step(frames[2])  # stepping by frame content also works
    session.step(3)
    assert session.finished
    with pytest.raises(ValueError, match="sequence order violation"):
        session.step(3)


def test_session_rejects_unknown_frame_content():
    frames, masks = generate(_static_scene(num_frames=3))
    session = init_session(frames, 0, masks[0], PropagationConfig(**_FAST))
    with pytest.raises(ValueError, match="sequence order violation"):
        session.step(np.zeros((48, 64), dtype=np.uint8))


def test_forward_run_from_a_middle_annotation_skips_earlier_frames():
    frames, masks = generate(_static_scene(num_frames=5))
    cfg = PropagationConfig(direction="forward", **_FAST)
    res = run(frames, 2, masks[2], cfg)
    assert res.masks[0] is None and res.masks[1] is None
    assert res.visited == [2, 3, 4]
    assert res.annotated_index == 2
    assert np.array_equal(res.masks[2].labels, masks[2].labels)
    assert res.timings[2] == 0.0
    assert all(res.timings[i] > 0 for i in (3, 4))


def test_backward_run_covers_the_prefix():
    frames, masks = generate(_static_scene(num_frames=5))
    cfg = PropagationConfig(direction="backward", **_FAST)
    res = run(frames, 3, masks[3], cfg)
    assert res.visited == [0, 1, 2, 3]
    assert res.masks[4] is None


def test_both_directions_cover_everything_and_emit_annotation_once():
    frames, masks = generate(_static_scene(num_frames=6))
    cfg = PropagationConfig(direction="both", **_FAST)
    res = run(frames, 3, masks[3], cfg)
    assert res.visited == list(range(6))
    assert np.array_equal(res.masks[3].labels, masks[3].labels)


def test_backward_equals_forward_on_the_reversed_sequence():
    frames, masks = generate(_tracking_scene(num_frames=6))
    n = len(frames)
    bwd = run(frames, n - 1, masks[n - 1],
              PropagationConfig(direction="backward", **_FAST))
    fwd = run(frames[::-1], 0, masks[n - 1],
              PropagationConfig(direction="forward", **_FAST))
    for i in range(n):
        a, b = bwd.masks[i], fwd.masks[n - 1 - i]
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.probs, b.probs)


def test_static_scene_masks_stay_on_the_object():
    frames, masks = generate(_static_scene(num_frames=8))
    res = run(frames, 0, masks[0], PropagationConfig(**_FAST))
    for t in range(1, 8):
        assert jaccard(res.masks[t].labels, masks[t].labels) >= 0.99


def test_moving_disk_is_tracked():
    frames, masks = generate(_tracking_scene(num_frames=8))
    res = run(frames, 0, masks[0], PropagationConfig(**_FAST))
    scores = [jaccard(res.masks[t].labels, masks[t].labels) for t in range(1, 8)]
    assert np.mean(scores) >= 0.9


def test_pure_noise_frame_is_mostly_rejected():
    # frozen scenario: a real first frame, then uniform random pixels;
    # the propagated mask must not blanket-copy the annotation
    scene = SceneSpec(height=64, width=64, num_frames=1, seed=11,
                      objects=(ObjectSpec(shape="disk", center=(32.0, 32.0),
                                          size=10.0),))
    frames, masks = generate(scene)
    rng = np.random.default_rng(np.random.SeedSequence(999, spawn_key=(1,)))
    noise = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
    res = run([frames[0], noise], 0, masks[0], PropagationConfig())
    ann = masks[0].labels
    assert int((ann > 0).sum()) == 317  # disk raster size, pinned
    assert jaccard(res.masks[1].labels, ann) < 0.5


def test_two_object_scene_keeps_labels_apart():
    scene = SceneSpec(
        height=48, width=64, num_frames=6, seed=8,
        objects=(ObjectSpec(center=(16.0, 16.0), size=5.0, velocity=(0.0, 0.8)),
                 ObjectSpec(center=(32.0, 44.0), size=5.0, intensity=140.0)),
    )
    frames, masks = generate(scene)
    res = run(frames, 0, masks[0], PropagationConfig(**_FAST))
    for t in range(1, 6):
        assert jaccard(res.masks[t].labels, masks[t].labels, object_id=1) > 0.5
        assert jaccard(res.masks[t].labels, masks[t].labels, object_id=2) > 0.5


def test_adapter_with_zero_strength_changes_nothing():
    frames, masks = generate(_static_scene(num_frames=5))
    rng = np.random.default_rng(2)
    adapter = AdapterParams(alpha=1.0, map=rng.normal(size=(16, 16)),
                            bias=rng.normal(size=16))
    base = run(frames, 0, masks[0], PropagationConfig(**_FAST))
    off = run(frames, 0, masks[0], PropagationConfig(alpha=0.0, **_FAST),
              adapter=adapter)
    noop = run(frames, 0, masks[0], PropagationConfig(**_FAST),
               adapter=adapter.scaled(0.0))
    for t in range(5):
        assert np.array_equal(base.masks[t].probs, off.masks[t].probs)
        assert np.array_equal(base.masks[t].probs, noop.masks[t].probs)


def test_runs_are_deterministic():
    frames, masks = generate(_tracking_scene(num_frames=6))
    cfg = PropagationConfig(**_FAST)
    a = run(frames, 0, masks[0], cfg)
    b = run(frames, 0, masks[0], cfg)
    for t in range(6):
        assert np.array_equal(a.masks[t].probs, b.masks[t].probs)


# ---------------------------------------------------------------------------
# consolidation events
# ---------------------------------------------------------------------------


def test_consolidation_events_fire_and_bound_working_memory(caplog):
    frames, masks = generate(_static_scene(num_frames=12))
    cfg = PropagationConfig(r=1, t_min=2, t_max=3, num_prototypes=4, top_k=16)
    with caplog.at_level(logging.INFO, logger="memseg.propagate"):
        res = run(frames, 0, masks[0], cfg)
    assert res.events, "expected at least one consolidation"
    for e in res.events:
        assert isinstance(e, ConsolidationEvent)
        assert 0 < e.frame_index < 12
        assert e.prototypes >= 1
        assert e.working_count_after == cfg.t_min
    positions = [e.session_position for e in res.events]
    assert positions == sorted(positions)
    logged = [r.getMessage() for r in caplog.records
              if r.name == "memseg.propagate"]
    assert len(logged) == len(res.events)
    for line, e in zip(logged, res.events):
        assert re.fullmatch(r"frame=\d+ prototypes=\d+", line)
        assert line == f"frame={e.frame_index} prototypes={e.prototypes}"


def test_memory_frames_follow_the_r_stride():
    frames, masks = generate(_static_scene(num_frames=9))
    cfg = PropagationConfig(r=3, t_min=2, t_max=6, num_prototypes=4, top_k=16)
    session = init_session(frames, 0, masks[0], cfg)
    while not session.finished:
        session.step(session.order[session.cursor])
    bank = session.banks[0].working
    # annotated frame 0, then session positions 3 and 6 (frames 3, 6)
    assert [g.frame_index for g in bank.frames] == [0, 3, 6]
