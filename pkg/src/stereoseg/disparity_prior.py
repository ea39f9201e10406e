"""Automatic foreground prior from the disparity histogram.

The foreground is assumed to be the part of the scene closest to the camera,
i.e. the part with the largest disparity. A peak bin of the disparity
histogram is selected, grown into an interval holding more than a tenth of
the pixels, and the pixels inside that interval form the prior mask whose
bounding rectangle becomes the region of interest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMask, NoForegroundPeak, NoValidDisparity
from .media_io import BinaryMask, DisparityMap

PEAK_RULES = ("nearest", "most_frequent")


def round_half_up(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer with ties going up."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).astype(np.int64)


@dataclass
class DisparityHistogram:
    """Counts per integer disparity bin (disparity rounded half-up)."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.ascontiguousarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 1 or (self.counts < 0).any():
            raise ValueError("histogram counts must be a 1-D non-negative array")

    @classmethod
    def from_counts(cls, counts: dict) -> "DisparityHistogram":
        arr = np.zeros(max(counts) + 1, dtype=np.int64)
        for d, n in counts.items():
            arr[d] = n
        return cls(arr)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def d_max_bin(self) -> int:
        populated = np.flatnonzero(self.counts)
        return int(populated[-1]) if populated.size else 0

    def f(self, d: int) -> int:
        """Frequency of disparity bin d; empty and out-of-range bins count 0."""
        if d < 0 or d >= self.counts.size:
            return 0
        return int(self.counts[d])


@dataclass(frozen=True)
class PriorThresholds:
    """Pixel-count thresholds for peak selection (n_th1) and growth (n_th2)."""

    n_th1: int
    n_th2: int

    def __post_init__(self):
        if self.n_th1 > self.n_th2:
            raise ValueError("n_th1 must not exceed n_th2")

    @classmethod
    def from_total(cls, total: int, nth1_divisor: int = 100, nth2_divisor: int = 10):
        return cls(n_th1=total // nth1_divisor, n_th2=total // nth2_divisor)


@dataclass(frozen=True)
class DisparityInterval:
    """Closed disparity-bin interval [d_lo, d_hi] around the peak d_th."""

    d_lo: int
    d_hi: int
    d_th: int

    def __post_init__(self):
        if not self.d_lo <= self.d_th <= self.d_hi:
            raise ValueError("interval must satisfy d_lo <= d_th <= d_hi")


@dataclass(frozen=True)
class RoiRect:
    """Inclusive pixel rectangle (x0, y0)..(x1, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0 or self.x0 > self.x1 or self.y0 > self.y1:
            raise ValueError(f"invalid rectangle {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1


def disparity_histogram(dm: DisparityMap) -> DisparityHistogram:
    """Histogram of valid disparities, binned by round-half-up."""
    dv = dm.d[dm.valid]
    if dv.size == 0:
        raise NoValidDisparity("all disparity pixels are invalid")
    bins = round_half_up(dv)
    return DisparityHistogram(np.bincount(bins))


def find_foreground_peak(
    h: DisparityHistogram,
    thresholds: PriorThresholds | None = None,
    rule: str = "nearest",
) -> int:
    """Select the foreground peak bin d_th.

    A bin qualifies when it is a strict local maximum with count above
    n_th1. Under the default "nearest" rule the qualifying bin with the
    largest disparity wins (nearest object = foreground); under
    "most_frequent" the qualifying bin with the largest count wins.
    """
    if rule not in PEAK_RULES:
        raise ValueError(f"unknown peak rule {rule!r}")
    if thresholds is None:
        thresholds = PriorThresholds.from_total(h.total)
    c = h.counts
    padded = np.concatenate([[0], c, [0]])
    qualifying = np.flatnonzero(
        (c > padded[:-2]) & (c > padded[2:]) & (c > thresholds.n_th1)
    )
    if qualifying.size == 0:
        raise NoForegroundPeak(
            f"no bin is a strict local maximum with count > {thresholds.n_th1}"
        )
    if rule == "nearest":
        return int(qualifying[-1])
    best = qualifying[np.argmax(c[qualifying])]
    ties = qualifying[c[qualifying] == c[best]]
    return int(ties[-1])


def grow_interval(
    h: DisparityHistogram,
    d_th: int,
    thresholds: PriorThresholds | None = None,
) -> DisparityInterval:
    """Grow [d_th, d_th] until its cumulative count exceeds n_th2.

    Each step extends one bin at whichever boundary neighbor has the larger
    count, ties extending upward (toward larger disparity). Growth stops
    when the count condition is met or the interval spans the whole
    histogram range.
    """
    if thresholds is None:
        thresholds = PriorThresholds.from_total(h.total)
    lo = hi = d_th
    cum = h.f(d_th)
    top = h.d_max_bin
    while cum <= thresholds.n_th2:
        can_down = lo > 0
        can_up = hi < top
        if not can_down and not can_up:
            break
        below = h.f(lo - 1) if can_down else -1
        above = h.f(hi + 1) if can_up else -1
        if above >= below:
            hi += 1
            cum += h.f(hi)
        else:
            lo -= 1
            cum += h.f(lo)
    return DisparityInterval(d_lo=lo, d_hi=hi, d_th=d_th)


def build_prior_mask(dm: DisparityMap, interval: DisparityInterval) -> BinaryMask:
    """Mask of valid pixels whose rounded disparity falls inside the interval."""
    bins = round_half_up(dm.d)
    inside = dm.valid & (bins >= interval.d_lo) & (bins <= interval.d_hi)
    return BinaryMask(inside.astype(np.uint8))


def bounding_rect(mask: BinaryMask, margin: int = 0) -> RoiRect:
    """Tightest rectangle around the foreground, expanded by `margin` and
    clamped to the image bounds."""
    ys, xs = np.nonzero(mask.label)
    if xs.size == 0:
        raise EmptyMask("mask has no foreground pixel")
    return RoiRect(
        x0=max(0, int(xs.min()) - margin),
        y0=max(0, int(ys.min()) - margin),
        x1=min(mask.width - 1, int(xs.max()) + margin),
        y1=min(mask.height - 1, int(ys.max()) + margin),
    )


def estimate_prior(
    dm: DisparityMap,
    nth1_divisor: int = 100,
    nth2_divisor: int = 10,
    peak_rule: str = "nearest",
    roi_margin: int = 0,
) -> tuple[DisparityInterval, RoiRect]:
    """Run the full prior chain on one disparity map: histogram, peak,
    interval, mask, bounding rectangle."""
    h = disparity_histogram(dm)
    thresholds = PriorThresholds.from_total(h.total, nth1_divisor, nth2_divisor)
    d_th = find_foreground_peak(h, thresholds, peak_rule)
    interval = grow_interval(h, d_th, thresholds)
    mask = build_prior_mask(dm, interval)
    roi = bounding_rect(mask, roi_margin)
    return interval, roi
