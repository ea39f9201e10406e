"""Frame, disparity and mask I/O.

Frames are 8-bit RGB images on disk and YUV in memory (full-range BT.601).
Disparity maps are 16-bit single-channel images with fixed-point x16 values;
a raw value of 0 marks an invalid pixel. Masks are written as 8-bit grayscale
with 0 = background and 255 = foreground.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    CountMismatch,
    DimensionMismatch,
    IoFailure,
    MissingFile,
    UnsupportedFormat,
)

FRAME_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp")
DISPARITY_SCALE = 16.0

# Fixed-point overlay tint: foreground blended 50/50 with red.
OVERLAY_COLOR = (255, 0, 0)
OVERLAY_ALPHA = 0.5


@dataclass
class Frame:
    """One video frame as (H, W, 3) uint8 YUV, plus its temporal index."""

    yuv: np.ndarray
    index: int = 0

    def __post_init__(self):
        self.yuv = np.ascontiguousarray(self.yuv)
        if self.yuv.ndim != 3 or self.yuv.shape[2] != 3 or self.yuv.dtype != np.uint8:
            raise ValueError("Frame.yuv must be (H, W, 3) uint8")
        if self.yuv.shape[0] < 1 or self.yuv.shape[1] < 1:
            raise ValueError("Frame must have positive dimensions")

    @property
    def height(self) -> int:
        return self.yuv.shape[0]

    @property
    def width(self) -> int:
        return self.yuv.shape[1]


@dataclass
class DisparityMap:
    """Per-pixel disparity in pixels with a validity flag per pixel."""

    d: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        self.d = np.ascontiguousarray(self.d, dtype=np.float32)
        self.valid = np.ascontiguousarray(self.valid, dtype=bool)
        if self.d.ndim != 2 or self.d.shape != self.valid.shape:
            raise ValueError("DisparityMap arrays must be matching 2-D")
        dv = self.d[self.valid]
        if dv.size and (not np.all(np.isfinite(dv)) or dv.min() < 0):
            raise ValueError("valid disparities must be finite and >= 0")

    @property
    def height(self) -> int:
        return self.d.shape[0]

    @property
    def width(self) -> int:
        return self.d.shape[1]


@dataclass
class BinaryMask:
    """Per-pixel label in {0, 1}; 1 marks foreground."""

    label: np.ndarray

    def __post_init__(self):
        self.label = np.ascontiguousarray(self.label, dtype=np.uint8)
        if self.label.ndim != 2:
            raise ValueError("BinaryMask.label must be 2-D")
        if self.label.max(initial=0) > 1:
            raise ValueError("BinaryMask values must be 0 or 1")

    @property
    def height(self) -> int:
        return self.label.shape[0]

    @property
    def width(self) -> int:
        return self.label.shape[1]

    def foreground_count(self) -> int:
        return int(self.label.sum())


@dataclass
class StereoSequence:
    """Aligned left-view frames and disparity maps of uniform size."""

    frames: list = field(default_factory=list)
    disparities: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.frames) != len(self.disparities):
            raise CountMismatch(
                f"{len(self.frames)} frames vs {len(self.disparities)} disparity maps"
            )
        if self.frames:
            h, w = self.frames[0].height, self.frames[0].width
            for i, (fr, dm) in enumerate(zip(self.frames, self.disparities)):
                if (fr.height, fr.width) != (h, w) or (dm.height, dm.width) != (h, w):
                    raise DimensionMismatch(f"frame {i} size differs from frame 0")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width


def rgb_to_yuv(r, g, b):
    """Full-range BT.601 RGB -> YUV, rounded half-up and clamped to [0, 255].

    Accepts scalars or arrays; returns uint8 of the broadcast shape.
    """
    r = np.asarray(r, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    u = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    v = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    out = []
    for ch in (y, u, v):
        out.append(np.clip(np.floor(ch + 0.5), 0, 255).astype(np.uint8))
    if out[0].ndim == 0:
        return int(out[0]), int(out[1]), int(out[2])
    return out[0], out[1], out[2]


def yuv_to_rgb(y, u, v):
    """Exact inverse of the rgb_to_yuv affine map, rounded and clamped."""
    y = np.asarray(y, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64) - 128.0
    v = np.asarray(v, dtype=np.float64) - 128.0
    r = y + 1.402 * v
    g = y - 0.344136286201022 * u - 0.714136286201022 * v
    b = y + 1.772 * u
    out = []
    for ch in (r, g, b):
        out.append(np.clip(np.floor(ch + 0.5), 0, 255).astype(np.uint8))
    if out[0].ndim == 0:
        return int(out[0]), int(out[1]), int(out[2])
    return out[0], out[1], out[2]


def rgb_image_to_frame(rgb: np.ndarray, index: int = 0) -> Frame:
    """Convert an (H, W, 3) uint8 RGB image into a YUV Frame."""
    y, u, v = rgb_to_yuv(rgb[..., 0], rgb[..., 1], rgb[..., 2])
    return Frame(np.stack([y, u, v], axis=-1), index=index)


def frame_to_rgb(frame: Frame) -> np.ndarray:
    """Reconstruct an (H, W, 3) uint8 RGB image from a YUV Frame."""
    r, g, b = yuv_to_rgb(frame.yuv[..., 0], frame.yuv[..., 1], frame.yuv[..., 2])
    return np.stack([r, g, b], axis=-1)


def decode_disparity(raw: np.ndarray) -> DisparityMap:
    """Decode a 16-bit fixed-point disparity image: d = raw / 16, raw 0 = invalid."""
    raw = np.asarray(raw)
    if raw.ndim != 2:
        raise UnsupportedFormat(f"disparity image must be single-channel, got shape {raw.shape}")
    if raw.dtype == np.uint16:
        pass
    elif raw.dtype in (np.int32, np.int64) and raw.min(initial=0) >= 0 and raw.max(initial=0) <= 0xFFFF:
        raw = raw.astype(np.uint16)
    else:
        raise UnsupportedFormat(f"disparity image must be 16-bit unsigned, got dtype {raw.dtype}")
    d = raw.astype(np.float32) / DISPARITY_SCALE
    return DisparityMap(d=d, valid=raw != 0)


def encode_disparity(dm: DisparityMap) -> np.ndarray:
    """Encode a DisparityMap as a 16-bit raw image (inverse of decode_disparity).

    Valid pixels are clamped to raw >= 1 so they cannot collide with the
    invalid sentinel 0.
    """
    raw = np.floor(dm.d.astype(np.float64) * DISPARITY_SCALE + 0.5)
    raw = np.clip(raw, 1, 0xFFFF).astype(np.uint16)
    raw[~dm.valid] = 0
    return raw


def numbered_files(directory, extensions) -> list:
    """All files in `directory` whose stem is numeric, sorted by value.

    Raises MissingFile on a gap in the numbering.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise IoFailure(f"not a directory: {directory}")
    entries = []
    for p in sorted(directory.iterdir()):
        if p.suffix.lower() in extensions and re.fullmatch(r"\d+", p.stem):
            entries.append((int(p.stem), p))
    entries.sort(key=lambda e: e[0])
    for k, (num, _) in enumerate(entries):
        expected = entries[0][0] + k
        if num != expected:
            raise MissingFile(f"index {expected} missing in {directory}")
    return [p for _, p in entries]


def load_frame(path, index: int = 0) -> Frame:
    """Load an 8-bit RGB image file as a YUV Frame."""
    try:
        with Image.open(path) as im:
            rgb = np.asarray(im.convert("RGB"))
    except OSError as exc:
        raise IoFailure(f"cannot read frame {path}: {exc}") from exc
    return rgb_image_to_frame(rgb, index=index)


def load_disparity(path) -> DisparityMap:
    """Load a 16-bit single-channel disparity image file."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("I", "I;16", "I;16B", "I;16L", "I;16N"):
                raise UnsupportedFormat(f"{path}: expected 16-bit grayscale, got mode {im.mode}")
            raw = np.asarray(im)
    except OSError as exc:
        raise IoFailure(f"cannot read disparity {path}: {exc}") from exc
    return decode_disparity(raw)


def load_sequence(frame_dir, disparity_dir) -> StereoSequence:
    """Load a frame directory plus a disparity directory into a StereoSequence.

    Files must carry zero-padded numeric names; numeric order is temporal
    order. Counts must match and all images must share dimensions.
    """
    frame_paths = numbered_files(frame_dir, FRAME_EXTENSIONS)
    disp_paths = numbered_files(disparity_dir, (".png",))
    if len(frame_paths) != len(disp_paths):
        raise CountMismatch(
            f"{len(frame_paths)} frames in {frame_dir} vs {len(disp_paths)} disparity maps in {disparity_dir}"
        )
    if not frame_paths:
        raise MissingFile(f"no numbered frames found in {frame_dir}")
    frames = [load_frame(p, index=i) for i, p in enumerate(frame_paths)]
    disparities = [load_disparity(p) for p in disp_paths]
    for i, (fr, dm) in enumerate(zip(frames, disparities)):
        if (dm.height, dm.width) != (fr.height, fr.width):
            raise DimensionMismatch(
                f"frame {i}: image {fr.width}x{fr.height} vs disparity {dm.width}x{dm.height}"
            )
    return StereoSequence(frames=frames, disparities=disparities)


def write_mask(mask: BinaryMask, path) -> None:
    """Write a mask as 8-bit grayscale, 0 = background, 255 = foreground."""
    arr = (mask.label * np.uint8(255)).astype(np.uint8)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(arr, mode="L").save(path)
    except OSError as exc:
        raise IoFailure(f"cannot write mask {path}: {exc}") from exc


def read_mask(path) -> BinaryMask:
    """Read a grayscale mask; values above 127 become foreground."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    except OSError as exc:
        raise IoFailure(f"cannot read mask {path}: {exc}") from exc
    return BinaryMask((arr > 127).astype(np.uint8))


def write_overlay(frame: Frame, mask: BinaryMask, path) -> None:
    """Write the frame as RGB with the foreground region tinted at alpha 0.5."""
    if (mask.height, mask.width) != (frame.height, frame.width):
        raise DimensionMismatch(
            f"mask {mask.width}x{mask.height} vs frame {frame.width}x{frame.height}"
        )
    rgb = frame_to_rgb(frame).astype(np.float64)
    tint = np.asarray(OVERLAY_COLOR, dtype=np.float64)
    fg = mask.label.astype(bool)
    rgb[fg] = (1.0 - OVERLAY_ALPHA) * rgb[fg] + OVERLAY_ALPHA * tint
    out = np.clip(np.floor(rgb + 0.5), 0, 255).astype(np.uint8)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(out, mode="RGB").save(path)
    except OSError as exc:
        raise IoFailure(f"cannot write overlay {path}: {exc}") from exc


def write_rgb_image(rgb: np.ndarray, path) -> None:
    """Write an (H, W, 3) uint8 RGB array as an image file."""
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)
    except OSError as exc:
        raise IoFailure(f"cannot write image {path}: {exc}") from exc


def write_disparity(dm: DisparityMap, path) -> None:
    """Write a disparity map as a 16-bit PNG in the fixed-point x16 convention."""
    raw = encode_disparity(dm)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(raw).save(path)
    except OSError as exc:
        raise IoFailure(f"cannot write disparity {path}: {exc}") from exc
