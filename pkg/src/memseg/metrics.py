"""Region similarity J, contour similarity F, and their sequence-level
aggregation.

All metrics are pure functions of binary object masks. Reports carry the
mean and population standard deviation of each score and render either as
a plain-text table or as key=value records (one line per sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grids import MaskMap


def _binary(mask, object_id: int) -> np.ndarray:
    if isinstance(mask, MaskMap):
        return mask.binary(object_id)
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError("mask must be 2-d")
    return arr == object_id if arr.dtype.kind in "iu" else arr.astype(bool)


def default_tolerance(height: int, width: int) -> int:
    """Boundary-match tolerance: 0.8% of the image diagonal, rounded up."""
    return int(math.ceil(0.008 * math.hypot(height, width)))


def jaccard(pred, gt, object_id: int = 1) -> float:
    """Intersection over union of one object's binary masks.

    Both masks empty counts as a perfect 1.0.
    """
    a = _binary(pred, object_id)
    b = _binary(gt, object_id)
    if a.shape != b.shape:
        raise ValueError("mask dimension mismatch")
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def boundary_pixels(mask: np.ndarray) -> np.ndarray:
    """Mask pixels with at least one 4-connected background neighbor;
    positions outside the image count as background."""
    m = np.asarray(mask, dtype=bool)
    inner = np.zeros_like(m)
    inner[1:-1, 1:-1] = (m[1:-1, 1:-1] & m[:-2, 1:-1] & m[2:, 1:-1]
                         & m[1:-1, :-2] & m[1:-1, 2:])
    return m & ~inner


def _disk(tol: float) -> np.ndarray:
    radius = int(math.floor(tol))
    y, x = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return (y * y + x * x) <= tol * tol


def boundary_f(pred, gt, object_id: int = 1, tol: float | None = None) -> float:
    """Boundary F-measure: harmonic mean of boundary precision and recall
    under a disk-of-radius-``tol`` Euclidean match.

    ``tol=None`` uses :func:`default_tolerance`. Both boundaries empty is a
    perfect 1.0; zero precision+recall gives 0.0.
    """
    a = _binary(pred, object_id)
    b = _binary(gt, object_id)
    if a.shape != b.shape:
        raise ValueError("mask dimension mismatch")
    if tol is None:
        tol = default_tolerance(*a.shape)
    if tol < 0:
        raise ValueError("tol must be >= 0")
    pb = boundary_pixels(a)
    gb = boundary_pixels(b)
    if not pb.any() and not gb.any():
        return 1.0
    if not pb.any() or not gb.any():
        return 0.0
    disk = _disk(tol)
    gb_near = ndimage.binary_dilation(gb, structure=disk)
    pb_near = ndimage.binary_dilation(pb, structure=disk)
    precision = np.logical_and(pb, gb_near).sum() / pb.sum()
    recall = np.logical_and(gb, pb_near).sum() / gb.sum()
    if precision + recall == 0:
        return 0.0
    return float(2.0 * precision * recall / (precision + recall))


@dataclass(frozen=True)
class FrameScore:
    """Per-frame scores; jf is always the arithmetic mean of j and f."""

    frame_index: int
    j: float
    f: float

    @property
    def jf(self) -> float:
        return (self.j + self.f) / 2.0


@dataclass(frozen=True)
class SequenceReport:
    """Scores of one evaluated sequence (annotated frames excluded)."""

    frames: tuple[FrameScore, ...]
    mean_j: float
    std_j: float
    mean_f: float
    std_f: float
    mean_jf: float
    std_jf: float

    @property
    def evaluated_count(self) -> int:
        return len(self.frames)


def _mean_std(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    return float(arr.mean()), float(arr.std())


def evaluate_sequence(preds, gts, object_ids=None, exclude=(),
                      tol: float | None = None,
                      indices=None) -> SequenceReport:
    """Score preds against gts frame by frame.

    Per-frame J/F are averaged over ``object_ids`` (default: every object
    present in the ground truth of that frame, or object 1 when a frame is
    entirely background); frames listed in ``exclude`` (the annotated
    ones) are left out. ``indices`` relabels the reported frame numbers
    (default: list position). Standard deviations are population
    deviations.
    """
    if len(preds) != len(gts):
        raise ValueError("prediction/ground-truth length mismatch")
    if indices is not None and len(indices) != len(gts):
        raise ValueError("indices length mismatch")
    excluded = set(int(i) for i in exclude)
    frames: list[FrameScore] = []
    for i, (pred, gt) in enumerate(zip(preds, gts)):
        if i in excluded:
            continue
        if object_ids is None:
            if isinstance(gt, MaskMap):
                ids = gt.object_ids or [1]
            else:
                present = np.unique(np.asarray(gt))
                ids = [int(v) for v in present if v != 0] or [1]
        else:
            ids = list(object_ids)
        js = [jaccard(pred, gt, oid) for oid in ids]
        fs = [boundary_f(pred, gt, oid, tol=tol) for oid in ids]
        label = i if indices is None else int(indices[i])
        frames.append(FrameScore(frame_index=label, j=float(np.mean(js)),
                                 f=float(np.mean(fs))))
    mean_j, std_j = _mean_std([s.j for s in frames])
    mean_f, std_f = _mean_std([s.f for s in frames])
    mean_jf, std_jf = _mean_std([s.jf for s in frames])
    return SequenceReport(frames=tuple(frames), mean_j=mean_j, std_j=std_j,
                          mean_f=mean_f, std_f=std_f, mean_jf=mean_jf,
                          std_jf=std_jf)


def format_mean_std(mean: float, std: float) -> str:
    """Render a score pair in mean(std) form, e.g. ``0.850(0.201)``."""
    return f"{mean:.3f}({std:.3f})"


def format_report(report: SequenceReport, name: str = "sequence") -> str:
    """Plain-text table with one row per frame and a mean(std) footer."""
    lines = [f"{name}: {report.evaluated_count} frames evaluated",
             f"{'frame':>6}  {'J':>7}  {'F':>7}  {'J&F':>7}"]
    for s in report.frames:
        lines.append(f"{s.frame_index:>6}  {s.j:7.4f}  {s.f:7.4f}  {s.jf:7.4f}")
    lines.append(f"{'mean':>6}  {format_mean_std(report.mean_j, report.std_j):>12}"
                 f"  {format_mean_std(report.mean_f, report.std_f):>12}"
                 f"  {format_mean_std(report.mean_jf, report.std_jf):>12}")
    return "\n".join(lines)


def report_records(report: SequenceReport, name: str = "sequence") -> str:
    """One key=value record line for machine consumption."""
    return (f"seq={name} frames={report.evaluated_count}"
            f" j_mean={report.mean_j:.6f} j_std={report.std_j:.6f}"
            f" f_mean={report.mean_f:.6f} f_std={report.std_f:.6f}"
            f" jf_mean={report.mean_jf:.6f} jf_std={report.std_jf:.6f}")


def report_to_dict(report: SequenceReport) -> dict:
    """JSON-ready structure used by the service report endpoint."""
    return {
        "frames": [{"frame": s.frame_index, "j": s.j, "f": s.f, "jf": s.jf}
                   for s in report.frames],
        "mean": {"j": report.mean_j, "f": report.mean_f, "jf": report.mean_jf},
        "std": {"j": report.std_j, "f": report.std_f, "jf": report.std_jf},
        "evaluated": report.evaluated_count,
    }
