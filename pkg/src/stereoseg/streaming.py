"""Streaming segmentation over fixed-length subsequence windows.

The first window is segmented from the disparity prior alone; every later
window additionally splats the previous window's last frame, carrying its
solved mask as foreground/background evidence, and is solved with the
propagated data term. State between windows is one frame plus one mask, so
memory stays constant in the video length.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bilateral_grid import (
    DEFAULT_GRID_DIMS,
    DEFAULT_INVALID_D,
    build_grid,
    observed_disparity_range,
    slice_labels,
    window_grid_params,
)
from .disparity_prior import RoiRect, estimate_prior
from .errors import EmptyMask, NoForegroundPeak, NoValidDisparity
from .graph_cut import GraphParams, build_graph, energy, min_cut
from .media_io import BinaryMask, DisparityMap, Frame, StereoSequence

PRIOR_MODES = ("window", "sequence", "frame")

_PRIOR_ERRORS = (NoValidDisparity, NoForegroundPeak, EmptyMask)


@dataclass(frozen=True)
class SubsequenceWindow:
    """Half-open global frame range [start, end) of subsequence `index` (1-based)."""

    index: int
    start: int
    end: int
    overlap_frame: int | None = None

    def __len__(self) -> int:
        return self.end - self.start


@dataclass
class StreamState:
    """What one window hands to the next: its last frame, that frame's
    disparity, and its solved mask."""

    prev_frame: Frame
    prev_disparity: DisparityMap
    prev_mask: BinaryMask


@dataclass(frozen=True)
class SegmentationParams:
    """Everything the streaming segmenter needs besides the video itself."""

    l: int = 10
    grid_dims: tuple = DEFAULT_GRID_DIMS
    graph: GraphParams = field(default_factory=GraphParams)
    tau: float = 0.5
    peak_rule: str = "nearest"
    nth1_divisor: int = 100
    nth2_divisor: int = 10
    roi_margin: int = 0
    prior_mode: str = "window"
    invalid_d: str = DEFAULT_INVALID_D

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("subsequence length l must be >= 1")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.prior_mode not in PRIOR_MODES:
            raise ValueError(f"unknown prior mode {self.prior_mode!r}")


@dataclass(frozen=True)
class WindowStats:
    """Per-window progress numbers (also the machine-readable stderr line)."""

    index: int
    start: int
    end: int
    vertices: int
    energy: float
    fg_pixels: int
    warning: str | None = None

    def progress_line(self) -> str:
        return (
            f"window={self.index} frames={self.start}..{self.end - 1} "
            f"vertices={self.vertices} energy={self.energy!r} fg_pixels={self.fg_pixels}"
        )


def split_subsequences(n_frames: int, l: int) -> list:
    """Partition [0, n_frames) into consecutive windows of length l (the last
    one possibly shorter)."""
    if n_frames < 1 or l < 1:
        raise ValueError("need n_frames >= 1 and l >= 1")
    windows = []
    start = 0
    index = 1
    while start < n_frames:
        end = min(start + l, n_frames)
        windows.append(
            SubsequenceWindow(
                index=index,
                start=start,
                end=end,
                overlap_frame=start - 1 if index > 1 else None,
            )
        )
        start = end
        index += 1
    return windows


def _window_prior(disparities, params: SegmentationParams):
    """Prior interval and ROI for one window per the configured mode."""
    if params.prior_mode != "frame":
        return estimate_prior(
            disparities[0],
            nth1_divisor=params.nth1_divisor,
            nth2_divisor=params.nth2_divisor,
            peak_rule=params.peak_rule,
            roi_margin=params.roi_margin,
        )
    # per-frame recomputation: the window ROI is the union of the per-frame
    # rectangles so the grid covers the prior of every frame
    interval = None
    rect = None
    last_error = None
    for dm in disparities:
        try:
            frame_interval, frame_roi = estimate_prior(
                dm,
                nth1_divisor=params.nth1_divisor,
                nth2_divisor=params.nth2_divisor,
                peak_rule=params.peak_rule,
                roi_margin=params.roi_margin,
            )
        except _PRIOR_ERRORS as exc:
            last_error = exc
            continue
        if interval is None:
            interval = frame_interval
            rect = frame_roi
        else:
            rect = RoiRect(
                x0=min(rect.x0, frame_roi.x0),
                y0=min(rect.y0, frame_roi.y0),
                x1=max(rect.x1, frame_roi.x1),
                y1=max(rect.y1, frame_roi.y1),
            )
    if interval is None:
        raise last_error
    return interval, rect


def _background_window(window, frames, disparities):
    h, w = frames[0].height, frames[0].width
    masks = [BinaryMask(np.zeros((h, w), dtype=np.uint8)) for _ in frames]
    state = StreamState(
        prev_frame=frames[-1], prev_disparity=disparities[-1], prev_mask=masks[-1]
    )
    return masks, state


def segment_window(
    window: SubsequenceWindow,
    sequence: StereoSequence,
    state: StreamState | None,
    params: SegmentationParams,
    prior=None,
    debug_dir=None,
):
    """Segment one window; returns (masks, next state, stats).

    `state` must be present exactly for windows after the first. When the
    prior cannot be derived the window emits all-background masks and keeps
    streaming. `prior` overrides the per-window prior (used by the frozen
    sequence mode).
    """
    if (state is None) != (window.index == 1):
        raise ValueError("state must be supplied iff the window is not the first")
    frames = sequence.frames[window.start : window.end]
    disparities = sequence.disparities[window.start : window.end]

    if prior is None:
        try:
            prior = _window_prior(disparities, params)
        except _PRIOR_ERRORS as exc:
            masks, new_state = _background_window(window, frames, disparities)
            stats = WindowStats(
                index=window.index,
                start=window.start,
                end=window.end,
                vertices=0,
                energy=0.0,
                fg_pixels=0,
                warning=f"{type(exc).__name__}: {exc}",
            )
            return masks, new_state, stats
    interval, roi = prior

    d_range = observed_disparity_range(disparities)
    grid_params = window_grid_params(
        params.grid_dims, roi, (window.start, window.end - 1), d_range
    )
    if state is None:
        grid = build_grid(
            frames, disparities, roi, grid_params, invalid_d=params.invalid_d
        )
        graph = build_graph(grid, params.graph, "first_window")
    else:
        grid = build_grid(
            [state.prev_frame] + frames,
            [state.prev_disparity] + disparities,
            roi,
            grid_params,
            propagation_masks=[state.prev_mask] + [None] * len(frames),
            invalid_d=params.invalid_d,
        )
        graph = build_graph(grid, params.graph, "propagated")

    labels = min_cut(graph)
    breakdown = energy(graph, labels)
    if debug_dir is not None:
        debug_dir = Path(debug_dir)
        debug_dir.mkdir(parents=True, exist_ok=True)
        with open(debug_dir / f"window_{window.index:04d}_grid.txt", "w") as fh:
            grid.dump(fh)
        with open(debug_dir / f"window_{window.index:04d}_graph.txt", "w") as fh:
            graph.dump(fh)
    masks = slice_labels(
        grid, labels, frames, disparities, roi, tau=params.tau, invalid_d=params.invalid_d
    )
    fg_pixels = sum(m.foreground_count() for m in masks)
    new_state = StreamState(
        prev_frame=frames[-1], prev_disparity=disparities[-1], prev_mask=masks[-1]
    )
    stats = WindowStats(
        index=window.index,
        start=window.start,
        end=window.end,
        vertices=len(grid),
        energy=breakdown.total,
        fg_pixels=fg_pixels,
    )
    return masks, new_state, stats


def segment_stream(
    sequence: StereoSequence,
    params: SegmentationParams,
    progress: bool = True,
    debug_dir=None,
) -> list:
    """Segment a whole video window by window; returns one mask per frame."""
    if len(sequence) == 0:
        raise ValueError("empty sequence")
    windows = split_subsequences(len(sequence), params.l)

    fixed_prior = None
    sequence_prior_error = None
    if params.prior_mode == "sequence":
        try:
            fixed_prior = estimate_prior(
                sequence.disparities[0],
                nth1_divisor=params.nth1_divisor,
                nth2_divisor=params.nth2_divisor,
                peak_rule=params.peak_rule,
                roi_margin=params.roi_margin,
            )
        except _PRIOR_ERRORS as exc:
            sequence_prior_error = exc

    out = []
    state = None
    for window in windows:
        if sequence_prior_error is not None:
            frames = sequence.frames[window.start : window.end]
            disparities = sequence.disparities[window.start : window.end]
            masks, state = _background_window(window, frames, disparities)
            stats = WindowStats(
                index=window.index,
                start=window.start,
                end=window.end,
                vertices=0,
                energy=0.0,
                fg_pixels=0,
                warning=f"{type(sequence_prior_error).__name__}: {sequence_prior_error}",
            )
        else:
            masks, state, stats = segment_window(
                window, sequence, state, params, prior=fixed_prior, debug_dir=debug_dir
            )
        if progress:
            if stats.warning:
                print(
                    f"window={stats.index} warning: {stats.warning}; emitting background",
                    file=sys.stderr,
                )
            print(stats.progress_line(), file=sys.stderr)
        out.extend(masks)
    return out
