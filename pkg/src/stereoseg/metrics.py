"""Region similarity (IoU), contour accuracy (boundary F-measure) and the
mean / recall / decay aggregation used for sequence reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, EmptyInput
from .media_io import BinaryMask

DEFAULT_BOUNDARY_TOL = 2
RECALL_THRESHOLD = 0.5


@dataclass(frozen=True)
class FrameScore:
    """Per-frame region similarity j and boundary F-measure f, both in [0, 1]."""

    j: float
    f: float


@dataclass(frozen=True)
class SequenceReport:
    """Mean, recall and decay for both measures over a frame sequence."""

    j_mean: float
    j_recall: float
    j_decay: float
    f_mean: float
    f_recall: float
    f_decay: float


def _require_same_shape(pred: BinaryMask, gt: BinaryMask) -> None:
    if (pred.height, pred.width) != (gt.height, gt.width):
        raise DimensionMismatch(
            f"pred {pred.width}x{pred.height} vs gt {gt.width}x{gt.height}"
        )


def region_similarity(pred: BinaryMask, gt: BinaryMask) -> float:
    """Intersection over union of the two foregrounds; 1.0 when both are empty."""
    _require_same_shape(pred, gt)
    p = pred.label.astype(bool)
    g = gt.label.astype(bool)
    union = np.logical_or(p, g).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(p, g).sum() / union)


def boundary_pixels(mask: BinaryMask) -> np.ndarray:
    """Foreground pixels 4-adjacent to background or to the image border."""
    fg = mask.label.astype(bool)
    padded = np.pad(fg, 1, mode="constant", constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return fg & ~interior


def contour_f_measure(
    pred: BinaryMask, gt: BinaryMask, tol: int = DEFAULT_BOUNDARY_TOL
) -> float:
    """F-measure over boundary pixels matched within Chebyshev distance `tol`."""
    _require_same_shape(pred, gt)
    pb = boundary_pixels(pred)
    gb = boundary_pixels(gt)
    n_pb = int(pb.sum())
    n_gb = int(gb.sum())
    if n_pb == 0 and n_gb == 0:
        return 1.0
    if n_pb == 0 or n_gb == 0:
        return 0.0
    # Chebyshev ball of radius tol == square structuring element of side 2*tol+1
    footprint = np.ones((2 * tol + 1, 2 * tol + 1), dtype=bool)
    gb_zone = ndimage.binary_dilation(gb, structure=footprint)
    pb_zone = ndimage.binary_dilation(pb, structure=footprint)
    precision = float((pb & gb_zone).sum() / n_pb)
    recall = float((gb & pb_zone).sum() / n_gb)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def score_frame(pred: BinaryMask, gt: BinaryMask, tol: int = DEFAULT_BOUNDARY_TOL) -> FrameScore:
    return FrameScore(j=region_similarity(pred, gt), f=contour_f_measure(pred, gt, tol))


def _aggregate_one(values: np.ndarray) -> tuple[float, float, float]:
    mean = float(values.mean())
    recall = float((values > RECALL_THRESHOLD).mean())
    if values.size < 4:
        decay = 0.0
    else:
        q = values.size // 4
        decay = float(values[:q].mean() - values[-q:].mean())
    return mean, recall, decay


def aggregate(scores: list) -> SequenceReport:
    """Mean, recall (fraction of frames scoring above 0.5) and decay
    (first-quartile mean minus last-quartile mean; 0 for fewer than 4 frames)."""
    if not scores:
        raise EmptyInput("no frame scores to aggregate")
    js = np.array([s.j for s in scores], dtype=np.float64)
    fs = np.array([s.f for s in scores], dtype=np.float64)
    j_mean, j_recall, j_decay = _aggregate_one(js)
    f_mean, f_recall, f_decay = _aggregate_one(fs)
    return SequenceReport(j_mean, j_recall, j_decay, f_mean, f_recall, f_decay)
