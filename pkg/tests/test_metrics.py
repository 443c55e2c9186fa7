"""Tests for region/contour metrics and sequence report aggregation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from memseg.grids import MaskMap
from memseg.metrics import (
    FrameScore,
    boundary_f,
    boundary_pixels,
    default_tolerance,
    evaluate_sequence,
    format_mean_std,
    format_report,
    jaccard,
    report_records,
    report_to_dict,
)


def _naive_boundary_f(a, b, tol):
    """Quadratic-time reimplementation: explicit point sets, explicit
    nearest-distance matching."""

    def boundary(m):
        h, w = m.shape
        pts = []
        for i in range(h):
            for j in range(w):
                if not m[i, j]:
                    continue
                nbrs = [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                if any(not (0 <= y < h and 0 <= x < w) or not m[y, x]
                       for y, x in nbrs):
                    pts.append((i, j))
        return pts

    pa, pb = boundary(a), boundary(b)
    if not pa and not pb:
        return 1.0
    if not pa or not pb:
        return 0.0

    def matched(src, dst):
        return sum(1 for (i, j) in src
                   if min((i - y) ** 2 + (j - x) ** 2 for y, x in dst) <= tol * tol)

    precision = matched(pa, pb) / len(pa)
    recall = matched(pb, pa) / len(pb)
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# region similarity J
# ---------------------------------------------------------------------------


def test_jaccard_shifted_square_is_one_third():
    a = np.zeros((4, 4), dtype=int)
    b = np.zeros((4, 4), dtype=int)
    a[0:2, 0:2] = 1
    b[0:2, 1:3] = 1  # one-column shift: overlap 2, union 6
    assert jaccard(a, b) == pytest.approx(1.0 / 3.0, abs=1e-15)


def test_jaccard_edge_cases():
    full = np.ones((3, 3), dtype=int)
    empty = np.zeros((3, 3), dtype=int)
    assert jaccard(full, full) == 1.0
    assert jaccard(empty, empty) == 1.0  # both empty is perfect
    assert jaccard(full, empty) == 0.0
    assert jaccard(empty, full) == 0.0


def test_jaccard_selects_one_object_id():
    pred = np.array([[1, 2], [0, 2]])
    gt = np.array([[1, 2], [2, 2]])
    assert jaccard(pred, gt, object_id=1) == 1.0
    assert jaccard(pred, gt, object_id=2) == pytest.approx(2.0 / 3.0)


def test_jaccard_accepts_mask_maps_and_bool_arrays():
    m = MaskMap.from_labels(np.array([[1, 0], [0, 1]]))
    assert jaccard(m, np.array([[1, 0], [0, 1]])) == 1.0
    assert jaccard(m.binary(1), m) == 1.0


def test_jaccard_validation():
    with pytest.raises(ValueError, match="mask dimension mismatch"):
        jaccard(np.zeros((2, 2), dtype=int), np.zeros((3, 3), dtype=int))
    with pytest.raises(ValueError, match="mask must be 2-d"):
        jaccard(np.zeros(4, dtype=int), np.zeros(4, dtype=int))


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 12))
@settings(max_examples=60, deadline=None)
def test_jaccard_symmetric_and_bounded(seed, h, w):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, size=(h, w))
    b = rng.integers(0, 2, size=(h, w))
    j = jaccard(a, b)
    assert 0.0 <= j <= 1.0
    assert j == jaccard(b, a)
    assert jaccard(a, a) == 1.0


# ---------------------------------------------------------------------------
# contour similarity F
# ---------------------------------------------------------------------------


def test_boundary_pixels_of_a_solid_block_is_its_ring():
    m = np.zeros((5, 5), dtype=bool)
    m[1:4, 1:4] = True
    ring = boundary_pixels(m)
    assert ring.sum() == 8
    assert not ring[2, 2]
    assert (ring[1:4, 1:4] ^ (m[1:4, 1:4] & ~np.pad(np.ones((1, 1), bool), 1))).sum() == 0


def test_boundary_pixels_image_border_counts_as_background():
    full = np.ones((5, 5), dtype=bool)
    ring = boundary_pixels(full)
    assert ring.sum() == 16
    assert not ring[2, 2]


def test_boundary_f_perfect_and_empty_cases():
    m = np.zeros((6, 6), dtype=int)
    m[2:4, 2:4] = 1
    empty = np.zeros((6, 6), dtype=int)
    assert boundary_f(m, m, tol=1) == 1.0
    assert boundary_f(empty, empty, tol=1) == 1.0
    assert boundary_f(m, empty, tol=1) == 0.0
    assert boundary_f(empty, m, tol=1) == 0.0


def test_boundary_f_tolerance_threshold():
    a = np.zeros((9, 9), dtype=int)
    b = np.zeros((9, 9), dtype=int)
    a[:, 2] = 1
    b[:, 5] = 1  # parallel lines exactly 3 pixels apart
    assert boundary_f(a, b, tol=3) == 1.0
    assert boundary_f(a, b, tol=2.9) == 0.0
    assert boundary_f(a, b, tol=2) == 0.0


def test_boundary_f_matches_naive_reimplementation():
    rng = np.random.default_rng(77)
    for _ in range(10):
        a = rng.integers(0, 2, size=(12, 12))
        b = rng.integers(0, 2, size=(12, 12))
        for tol in (1, 2):
            got = boundary_f(a, b, tol=tol)
            want = _naive_boundary_f(a.astype(bool), b.astype(bool), tol)
            assert abs(got - want) <= 1e-12


def test_boundary_f_validation():
    with pytest.raises(ValueError, match="mask dimension mismatch"):
        boundary_f(np.zeros((2, 2), dtype=int), np.zeros((3, 3), dtype=int))
    m = np.ones((3, 3), dtype=int)
    with pytest.raises(ValueError, match="tol must be >= 0"):
        boundary_f(m, m, tol=-1)


def test_default_tolerance_scales_with_the_diagonal():
    assert default_tolerance(480, 854) == 8
    assert default_tolerance(64, 64) == 1
    assert default_tolerance(1, 1) == 1
    assert default_tolerance(1080, 1920) == 18


# ---------------------------------------------------------------------------
# sequence reports
# ---------------------------------------------------------------------------


def test_frame_score_jf_is_the_arithmetic_mean():
    s = FrameScore(frame_index=0, j=0.5, f=1.0)
    assert s.jf == 0.75


def _square(shift=0):
    m = np.zeros((8, 8), dtype=int)
    m[2:5, 2 + shift:5 + shift] = 1
    return m


def test_evaluate_sequence_population_statistics():
    gts = [_square(), _square()]
    preds = [_square(), np.zeros((8, 8), dtype=int)]  # scores 1.0 then 0.0
    report = evaluate_sequence(preds, gts, tol=1)
    assert report.evaluated_count == 2
    assert report.mean_j == pytest.approx(0.5)
    assert report.std_j == pytest.approx(0.5)  # population, not sample
    assert report.mean_jf == pytest.approx(0.5)
    assert [s.frame_index for s in report.frames] == [0, 1]


def test_evaluate_sequence_excludes_annotated_frames():
    gts = [_square(), _square(), _square()]
    preds = [np.zeros((8, 8), dtype=int), _square(), _square()]
    report = evaluate_sequence(preds, gts, exclude=(0,), tol=1)
    assert report.evaluated_count == 2
    assert report.mean_j == 1.0
    assert [s.frame_index for s in report.frames] == [1, 2]


def test_evaluate_sequence_relabels_frame_indices():
    gts = [_square(), _square()]
    report = evaluate_sequence(gts, gts, indices=[10, 20], tol=1)
    assert [s.frame_index for s in report.frames] == [10, 20]
    with pytest.raises(ValueError, match="indices length mismatch"):
        evaluate_sequence(gts, gts, indices=[10], tol=1)


def test_evaluate_sequence_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        evaluate_sequence([_square()], [])


def test_evaluate_sequence_averages_over_present_objects():
    gt = np.array([[1, 0, 3], [1, 0, 3]])  # labels 1 and 3, gap at 2
    pred_good1 = np.array([[1, 0, 0], [1, 0, 0]])
    report = evaluate_sequence([pred_good1], [gt], tol=1)
    # object 1 perfect (j=1), object 3 missing (j=0): mean 0.5
    assert report.frames[0].j == pytest.approx(0.5)


def test_evaluate_sequence_empty_ground_truth_scores_object_one():
    empty = np.zeros((4, 4), dtype=int)
    assert evaluate_sequence([empty], [empty]).mean_j == 1.0
    assert evaluate_sequence([np.ones((4, 4), dtype=int)], [empty]).mean_j == 0.0


def test_evaluate_sequence_explicit_object_ids():
    gt = np.array([[1, 2], [1, 2]])
    pred = np.array([[1, 0], [1, 0]])
    report = evaluate_sequence([pred], [gt], object_ids=[1], tol=1)
    assert report.mean_j == 1.0


def test_format_mean_std_three_decimals():
    assert format_mean_std(0.85, 0.2014) == "0.850(0.201)"
    assert format_mean_std(1.0, 0.0) == "1.000(0.000)"


def test_format_report_layout():
    report = evaluate_sequence([_square()], [_square()], tol=1)
    text = format_report(report, name="demo")
    lines = text.splitlines()
    assert lines[0] == "demo: 1 frames evaluated"
    assert "J&F" in lines[1]
    assert "1.0000" in lines[2]
    assert "1.000(0.000)" in lines[-1]


def test_report_records_exact_line():
    report = evaluate_sequence([_square()], [_square()], tol=1)
    assert report_records(report, name="x") == (
        "seq=x frames=1 j_mean=1.000000 j_std=0.000000"
        " f_mean=1.000000 f_std=0.000000 jf_mean=1.000000 jf_std=0.000000"
    )


def test_report_to_dict_structure():
    report = evaluate_sequence([_square()], [_square()], indices=[4], tol=1)
    d = report_to_dict(report)
    assert d["evaluated"] == 1
    assert d["frames"] == [{"frame": 4, "j": 1.0, "f": 1.0, "jf": 1.0}]
    assert d["mean"] == {"j": 1.0, "f": 1.0, "jf": 1.0}
    assert set(d["std"]) == {"j", "f", "jf"}
