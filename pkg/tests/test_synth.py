"""Tests for the synthetic scene/volume generators and the brute-force
translation oracle."""

import numpy as np
import pytest
from scipy import ndimage

from memseg.synth import (
    ObjectSpec,
    OccluderSpec,
    SceneSpec,
    generate,
    generate_volume,
    oracle_track,
    slice_area,
)


def _disk_scene(**kwargs):
    defaults = dict(
        height=48,
        width=64,
        num_frames=10,
        seed=3,
        objects=(ObjectSpec(shape="disk", center=(20.0, 16.0), size=6.0,
                            velocity=(0.0, 1.0)),),
    )
    defaults.update(kwargs)
    return SceneSpec(**defaults)


def test_integer_velocity_translates_masks_exactly():
    frames, masks = generate(_disk_scene())
    base = masks[0].labels
    for t in range(1, 10):
        assert np.array_equal(masks[t].labels, np.roll(base, t, axis=1))
    # centroid advances exactly one column per frame
    cols = [np.argwhere(m.labels == 1)[:, 1].mean() for m in masks]
    assert np.allclose(np.diff(cols), 1.0)


def test_frames_carry_object_and_background_intensities():
    frames, masks = generate(_disk_scene())
    fg = masks[0].labels == 1
    assert frames[0].dtype == np.uint8
    assert (frames[0][fg] == 200).all()
    assert (frames[0][~fg] == 60).all()


def test_generation_is_deterministic():
    scene = _disk_scene(background="noise")
    frames_a, masks_a = generate(scene)
    frames_b, masks_b = generate(scene)
    for a, b in zip(frames_a, frames_b):
        assert np.array_equal(a, b)
    for a, b in zip(masks_a, masks_b):
        assert np.array_equal(a.labels, b.labels)


def test_noise_background_depends_on_seed_but_not_masks():
    frames_a, masks_a = generate(_disk_scene(background="noise", seed=1))
    frames_b, masks_b = generate(_disk_scene(background="noise", seed=2))
    assert any(not np.array_equal(a, b) for a, b in zip(frames_a, frames_b))
    for a, b in zip(masks_a, masks_b):
        assert np.array_equal(a.labels, b.labels)


def test_gradient_background_spans_the_declared_range():
    scene = _disk_scene(background="gradient", background_range=(30.0, 90.0))
    frames, _ = generate(scene)
    assert frames[0][0, 0] == 30
    assert frames[0][0, -1] == 90
    assert frames[0][0, 1] > 30


def test_split_doubles_the_component_count():
    scene = _disk_scene(
        objects=(ObjectSpec(shape="disk", center=(24.0, 32.0), size=8.0,
                            split_at=4),),
    )
    _, masks = generate(scene)
    for t, mask in enumerate(masks):
        n = ndimage.label(mask.labels == 1)[1]
        assert n == (1 if t < 4 else 2)


def test_occluder_paints_pixels_and_erases_labels():
    occ = OccluderSpec(start=2, stop=5, x=16.0, width=6.0, intensity=30.0)
    scene = _disk_scene(occluder=occ)
    frames, masks = generate(scene)
    covered = np.abs(np.arange(64) - 16.0) <= 3.0
    for t in range(10):
        if 2 <= t < 5:
            assert (frames[t][:, covered] == 30).all()
            assert (masks[t].labels[:, covered] == 0).all()
        else:
            assert (masks[t].labels[:, covered] != 0).any() or t > 5
    # before the occluder window the object is whole
    assert masks[0].labels.sum() > masks[2].labels.sum()


def test_rotating_rectangle_changes_orientation():
    scene = SceneSpec(
        height=64, width=64, num_frames=6, seed=0,
        objects=(ObjectSpec(shape="rectangle", center=(32.0, 32.0),
                            size=(6.0, 14.0), rotation=15.0),),
    )
    _, masks = generate(scene)
    assert not np.array_equal(masks[0].labels, masks[1].labels)
    assert not scene.rigid_translation


def test_blob_shape_is_deterministic_and_connected():
    scene = SceneSpec(
        height=64, width=64, num_frames=3, seed=5,
        objects=(ObjectSpec(shape="blob", center=(32.0, 30.0), size=7.0,
                            velocity=(0.0, 0.5)),),
    )
    _, masks_a = generate(scene)
    _, masks_b = generate(scene)
    assert np.array_equal(masks_a[0].labels, masks_b[0].labels)
    assert masks_a[0].labels.any()
    assert ndimage.label(masks_a[0].labels == 1)[1] == 1


def test_two_objects_get_distinct_labels():
    scene = SceneSpec(
        height=64, width=64, num_frames=2, seed=0,
        objects=(ObjectSpec(center=(20.0, 20.0), size=6.0),
                 ObjectSpec(center=(44.0, 44.0), size=6.0, intensity=150.0)),
    )
    _, masks = generate(scene)
    assert masks[0].object_ids == [1, 2]
    assert (masks[0].labels == 1).any() and (masks[0].labels == 2).any()


def test_object_leaving_the_canvas_raises():
    scene = _disk_scene(num_frames=60)  # col 16 + 59 exceeds width 64
    with pytest.raises(ValueError, match="object out of bounds"):
        generate(scene)


@pytest.mark.parametrize(
    "kwargs, msg",
    [
        (dict(height=2), "canvas too small"),
        (dict(num_frames=0), "need at least one frame"),
        (dict(background="checker"), "unknown background 'checker'"),
        (dict(objects=()), "need at least one object"),
    ],
)
def test_scene_validation(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        _disk_scene(**kwargs)


def test_object_spec_validation():
    with pytest.raises(ValueError, match="unknown shape 'star'"):
        ObjectSpec(shape="star")
    with pytest.raises(ValueError, match="scale must be positive"):
        ObjectSpec(scale=0.0)
    assert ObjectSpec(velocity=(1.0, 0.0)).rigid_translation
    assert not ObjectSpec(rotation=5.0).rigid_translation
    assert not ObjectSpec(scale=1.01).rigid_translation
    assert not ObjectSpec(split_at=3).rigid_translation


# ---------------------------------------------------------------------------
# volume slicing
# ---------------------------------------------------------------------------


def test_volume_slices_match_analytic_areas():
    axes, dims = (6.0, 10.0, 12.0), (16, 32, 40)
    slices, masks = generate_volume(axes, dims)
    assert len(slices) == 16
    for z in range(16):
        got = int((masks[z].labels == 1).sum())
        want = slice_area(axes, dims, z)
        by = 10.0 * max(1.0 - ((z - 7.5) / 6.0) ** 2, 0.0) ** 0.5
        bx = 12.0 * max(1.0 - ((z - 7.5) / 6.0) ** 2, 0.0) ** 0.5
        # rasterization error is bounded by a perimeter band
        assert abs(got - want) <= 4.0 * (by + bx) + 4.0


def test_volume_edge_slices_are_empty_and_centre_is_largest():
    axes, dims = (5.0, 8.0, 8.0), (16, 24, 24)
    _, masks = generate_volume(axes, dims)
    areas = [(m.labels == 1).sum() for m in masks]
    assert areas[0] == 0 and areas[-1] == 0
    assert max(areas) == areas[7] or max(areas) == areas[8]
    assert slice_area(axes, dims, 0) == 0.0


def test_volume_intensities_and_validation():
    slices, masks = generate_volume((4.0, 6.0, 6.0), (8, 16, 16))
    mid = slices[4]
    fg = masks[4].labels == 1
    assert (mid[fg] == 200).all() and (mid[~fg] == 60).all()
    with pytest.raises(ValueError, match="axes must be positive"):
        generate_volume((0.0, 5.0, 5.0), (8, 16, 16))


# ---------------------------------------------------------------------------
# brute-force translation oracle
# ---------------------------------------------------------------------------


def test_oracle_tracks_integer_translation_exactly():
    scene = _disk_scene()
    frames, masks = generate(scene)
    tracked = oracle_track(frames, masks[0], annotated_index=0, scene=scene)
    for got, want in zip(tracked, masks):
        assert np.array_equal(got.labels, want.labels)


def test_oracle_accepts_a_middle_annotation():
    scene = _disk_scene(num_frames=6)
    frames, masks = generate(scene)
    tracked = oracle_track(frames, masks[3], annotated_index=3, scene=scene)
    for got, want in zip(tracked, masks):
        assert np.array_equal(got.labels, want.labels)


def test_oracle_rejects_non_rigid_scenes():
    scene = SceneSpec(
        height=64, width=64, num_frames=3, seed=0,
        objects=(ObjectSpec(center=(32.0, 32.0), size=6.0, rotation=3.0),),
    )
    frames, masks = generate(scene)
    with pytest.raises(ValueError, match="rigid translation only"):
        oracle_track(frames, masks[0], scene=scene)


def test_oracle_rejects_empty_annotations():
    frames, masks = generate(_disk_scene(num_frames=2))
    from memseg.grids import MaskMap
    empty = MaskMap.from_labels(np.zeros((48, 64), dtype=int), num_labels=1)
    with pytest.raises(ValueError, match="empty annotation"):
        oracle_track(frames, empty)
