"""Sparse 7-D bilateral grid: lifting, splatting, accumulation and slicing.

Pixels are lifted into a 7-dimensional space (Y, U, V, x, y, d, t) where
each dimension is rescaled so the data range spans [0, l_i] for a grid of
l_i + 1 vertex planes. A pixel's unit mass is split between its nearest
vertex and the axis neighbors of that vertex: the factor per dimension is
1 - |v_i - b_i| clamped to zero, so only the neighbor a coordinate leans
toward receives weight. Occupied vertices carry the total weight S and the
disparity affinities A_FG / A_BG (plus mask affinities M_FG / M_BG when a
propagation mask was splatted); slicing reads per-vertex labels back to
pixel resolution with the same weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .disparity_prior import RoiRect
from .errors import EmptyRoi
from .media_io import BinaryMask, DisparityMap, Frame

DIM_NAMES = ("Y", "U", "V", "x", "y", "d", "t")
DEFAULT_GRID_DIMS = (7, 9, 9, 13, 13, 2, 2)
INVALID_D_MODES = ("nearest_valid", "zero")
DEFAULT_INVALID_D = "nearest_valid"

# Above this many lattice cells the dense scratch accumulator would not fit
# comfortably in memory and a sorting-based sparse path is used instead.
DENSE_CELL_LIMIT = 1 << 23


@dataclass(frozen=True)
class GridParams:
    """Grid span per dimension plus the raw value range each span covers."""

    dims: tuple
    ranges: tuple

    def __post_init__(self):
        if len(self.dims) != 7 or len(self.ranges) != 7:
            raise ValueError("GridParams needs 7 dims and 7 ranges")
        if any(int(l) < 1 for l in self.dims):
            raise ValueError("every grid span must be >= 1")
        for lo, hi in self.ranges:
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi < lo:
                raise ValueError(f"bad range ({lo}, {hi})")
        object.__setattr__(self, "dims", tuple(int(l) for l in self.dims))
        object.__setattr__(
            self, "ranges", tuple((float(lo), float(hi)) for lo, hi in self.ranges)
        )

    @property
    def sizes(self) -> np.ndarray:
        """Vertex count per dimension (l_i + 1)."""
        return np.asarray(self.dims, dtype=np.int64) + 1

    @property
    def strides(self) -> np.ndarray:
        sizes = self.sizes
        strides = np.ones(7, dtype=np.int64)
        for j in range(5, -1, -1):
            strides[j] = strides[j + 1] * sizes[j + 1]
        return strides

    @property
    def total_cells(self) -> int:
        return int(self.sizes.prod())

    @property
    def rates(self) -> np.ndarray:
        """Sampling rate per dimension; 0 for a degenerate (collapsed) range."""
        out = np.zeros(7, dtype=np.float64)
        for j, (lo, hi) in enumerate(self.ranges):
            if hi > lo:
                out[j] = self.dims[j] / (hi - lo)
        return out

    def pack(self, keys: np.ndarray) -> np.ndarray:
        return (np.asarray(keys, dtype=np.int64) @ self.strides).astype(np.int64)

    def unpack(self, packed: np.ndarray) -> np.ndarray:
        packed = np.asarray(packed, dtype=np.int64)
        out = np.empty(packed.shape + (7,), dtype=np.int64)
        sizes = self.sizes
        strides = self.strides
        for j in range(7):
            out[..., j] = (packed // strides[j]) % sizes[j]
        return out


def window_grid_params(dims, roi: RoiRect, t_range, d_range) -> GridParams:
    """Assemble GridParams for one subsequence window.

    Y/U/V span the full 8-bit range, x/y span the region of interest,
    d spans the observed valid-disparity range and t the window's frame
    indices.
    """
    return GridParams(
        dims=tuple(dims),
        ranges=(
            (0.0, 255.0),
            (0.0, 255.0),
            (0.0, 255.0),
            (float(roi.x0), float(roi.x1)),
            (float(roi.y0), float(roi.y1)),
            (float(d_range[0]), float(d_range[1])),
            (float(t_range[0]), float(t_range[1])),
        ),
    )


def observed_disparity_range(disparities: Sequence[DisparityMap]) -> tuple:
    """Min / max of valid disparities over the given maps; (0, 0) if none."""
    lo = np.inf
    hi = -np.inf
    for dm in disparities:
        dv = dm.d[dm.valid]
        if dv.size:
            lo = min(lo, float(dv.min()))
            hi = max(hi, float(dv.max()))
    if not np.isfinite(lo):
        return (0.0, 0.0)
    return (lo, hi)


def lift(raw: np.ndarray, params: GridParams, valid: np.ndarray | None = None) -> np.ndarray:
    """Map raw values (..., 7) into bilateral coordinates b_i in [0, l_i].

    Values are clamped to their declared range first; a degenerate range
    maps everything to coordinate 0. Where `valid` is False the disparity
    coordinate is forced to 0.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1] != 7:
        raise ValueError("expected raw values with last axis of length 7")
    rates = params.rates
    b = np.empty_like(raw)
    for j, (lo, hi) in enumerate(params.ranges):
        b[..., j] = (np.clip(raw[..., j], lo, hi) - lo) * rates[j]
    if valid is not None:
        b[..., 5] = np.where(np.asarray(valid, dtype=bool), b[..., 5], 0.0)
    return b


def nearest_vertex(b: np.ndarray, params: GridParams) -> np.ndarray:
    """Per-dimension round to nearest vertex, ties up, clamped to bounds."""
    b = np.asarray(b, dtype=np.float64)
    n = np.floor(b + 0.5).astype(np.int64)
    return np.clip(n, 0, np.asarray(params.dims, dtype=np.int64))


def splat_weights(b: np.ndarray, params: GridParams) -> list:
    """Nonzero adjacent weights of one coordinate as (vertex key, weight) pairs.

    The candidate set is the nearest vertex plus its in-bounds axis
    neighbors; the weight is the product over dimensions of
    max(0, 1 - |v_i - b_i|), and zero-weight candidates are omitted.
    """
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (7,):
        raise ValueError("splat_weights expects a single 7-D coordinate")
    center = nearest_vertex(b, params)
    factors = 1.0 - np.abs(center - b)
    out = []
    w0 = float(np.prod(factors))
    if w0 > 0.0:
        out.append((tuple(int(k) for k in center), w0))
    dims = params.dims
    for j in range(7):
        for step in (1, -1):
            v = center.copy()
            v[j] += step
            if v[j] < 0 or v[j] > dims[j]:
                continue
            fj = 1.0 - abs(v[j] - b[j])
            if fj <= 0.0:
                continue
            w = float(np.prod(factors[:j]) * fj * np.prod(factors[j + 1 :]))
            if w > 0.0:
                out.append((tuple(int(k) for k in v), w))
    return out


@dataclass(frozen=True)
class GridVertex:
    """Accumulated statistics of one occupied vertex."""

    S: float
    A_FG: float
    A_BG: float
    M_FG: float = 0.0
    M_BG: float = 0.0


class SparseGrid:
    """Occupied vertices of the bilateral grid, sorted by packed coordinate."""

    def __init__(self, params, packed, S, A_FG, A_BG, M_FG=None, M_BG=None, pixel_count=0):
        self.params = params
        self.packed = packed
        self.S = S
        self.A_FG = A_FG
        self.A_BG = A_BG
        self.M_FG = M_FG
        self.M_BG = M_BG
        self.pixel_count = int(pixel_count)

    def __len__(self) -> int:
        return int(self.packed.size)

    @property
    def has_masks(self) -> bool:
        return self.M_FG is not None

    @property
    def keys(self) -> np.ndarray:
        """Occupied vertex keys as an (n, 7) integer array."""
        return self.params.unpack(self.packed)

    def vertex(self, key) -> GridVertex:
        packed_key = int(self.params.pack(np.asarray(key, dtype=np.int64)))
        i = int(np.searchsorted(self.packed, packed_key))
        if i >= len(self) or self.packed[i] != packed_key:
            raise KeyError(key)
        return GridVertex(
            S=float(self.S[i]),
            A_FG=float(self.A_FG[i]),
            A_BG=float(self.A_BG[i]),
            M_FG=float(self.M_FG[i]) if self.has_masks else 0.0,
            M_BG=float(self.M_BG[i]) if self.has_masks else 0.0,
        )

    def dump(self, stream) -> None:
        """Write one text line per occupied vertex:
        k_Y k_U k_V k_x k_y k_d k_t S A_FG A_BG [M_FG M_BG]."""
        keys = self.keys
        for i in range(len(self)):
            parts = [str(int(k)) for k in keys[i]]
            parts += [repr(float(self.S[i])), repr(float(self.A_FG[i])), repr(float(self.A_BG[i]))]
            if self.has_masks:
                parts += [repr(float(self.M_FG[i])), repr(float(self.M_BG[i]))]
            stream.write(" ".join(parts) + "\n")


def _roi_slices(roi: RoiRect):
    return slice(roi.y0, roi.y1 + 1), slice(roi.x0, roi.x1 + 1)


def _nearest_valid_fill(dm: DisparityMap) -> np.ndarray:
    """Disparity with invalid pixels replaced by the nearest valid value."""
    from scipy import ndimage

    if dm.valid.all():
        return dm.d
    if not dm.valid.any():
        return dm.d
    idx = ndimage.distance_transform_edt(~dm.valid, return_distances=False, return_indices=True)
    return dm.d[tuple(idx)]


def _lift_columns(
    frame: Frame,
    dm: DisparityMap,
    roi: RoiRect,
    params: GridParams,
    invalid_d: str = DEFAULT_INVALID_D,
) -> np.ndarray:
    """Lift every ROI pixel of one frame; returns (7, n) coordinates in
    row-major pixel order."""
    ys, xs = _roi_slices(roi)
    rates = params.rates
    ranges = params.ranges
    n_rows = roi.height
    n_cols = roi.width
    n = n_rows * n_cols
    b = np.empty((7, n), dtype=np.float64)
    for ch in range(3):
        lo, hi = ranges[ch]
        vals = frame.yuv[ys, xs, ch].ravel().astype(np.float64)
        b[ch] = (np.clip(vals, lo, hi) - lo) * rates[ch]
    lo_x, hi_x = ranges[3]
    lo_y, hi_y = ranges[4]
    col_coords = (np.clip(np.arange(roi.x0, roi.x1 + 1, dtype=np.float64), lo_x, hi_x) - lo_x) * rates[3]
    row_coords = (np.clip(np.arange(roi.y0, roi.y1 + 1, dtype=np.float64), lo_y, hi_y) - lo_y) * rates[4]
    b[3] = np.broadcast_to(col_coords, (n_rows, n_cols)).ravel()
    b[4] = np.repeat(row_coords, n_cols)
    if invalid_d == "nearest_valid":
        d = _nearest_valid_fill(dm)[ys, xs].ravel().astype(np.float64)
        valid = None
    else:
        d = dm.d[ys, xs].ravel().astype(np.float64)
        valid = dm.valid[ys, xs].ravel()
    lo, hi = ranges[5]
    bd = (np.clip(d, lo, hi) - lo) * rates[5]
    if valid is not None:
        bd[~valid] = 0.0
    b[5] = bd
    lo_t, hi_t = ranges[6]
    b[6] = (min(max(float(frame.index), lo_t), hi_t) - lo_t) * rates[6]
    return b


def _candidate_groups(b: np.ndarray, strides: np.ndarray):
    """Packed keys and weights of the 8 candidate groups per pixel.

    Returns (keys (8, n) int64, weights (8, n) float64) ordered
    center-first then one axis neighbor per dimension; weights are zero for
    candidates a pixel does not lean toward. Row-major ravel of the
    transposed arrays reproduces the kernels' pixel-major accumulation
    order.
    """
    nearest = np.floor(b + 0.5)
    f = b - nearest
    c = 1.0 - np.abs(f)
    w0 = c.prod(axis=0)
    base = (nearest.astype(np.int64) * strides[:, None]).sum(axis=0)
    n = b.shape[1]
    keys = np.empty((8, n), dtype=np.int64)
    wts = np.empty((8, n), dtype=np.float64)
    keys[0] = base
    wts[0] = w0
    for j in range(7):
        wts[j + 1] = w0 * (np.abs(f[j]) / c[j])
        offset = np.where(f[j] > 0.0, strides[j], np.where(f[j] < 0.0, -strides[j], 0))
        keys[j + 1] = base + offset
    return keys, wts


FIELD_NAMES = ("S", "A_FG", "A_BG", "M_FG", "M_BG")


class _Accumulator:
    """Per-cell accumulation over frames.

    Uses dense scratch arrays plus the numba kernels when the lattice is
    small enough, otherwise a sorting-based sparse reduction. The two paths
    agree to floating-point reassociation (1e-12 relative in tests).
    """

    def __init__(self, params: GridParams, with_masks: bool):
        self.params = params
        self.with_masks = with_masks
        self.dense = params.total_cells <= DENSE_CELL_LIMIT
        if self.dense:
            n_cells = params.total_cells
            self.fields = {name: np.zeros(n_cells) for name in FIELD_NAMES[:3]}
            if with_masks:
                self.fields.update({name: np.zeros(n_cells) for name in FIELD_NAMES[3:]})
        else:
            self._pending = []  # (uniq keys, {field: per-key sums}) per frame

    def add_data(self, b: np.ndarray, dhat: np.ndarray) -> None:
        if self.dense:
            from . import _kernels

            _kernels.scatter_data(
                b, self.params.strides, dhat,
                self.fields["S"], self.fields["A_FG"], self.fields["A_BG"],
            )
        else:
            self._reduce_frame(b, {"S": None, "A_FG": dhat, "A_BG": 1.0 - dhat})

    def add_mask(self, b: np.ndarray, fg: np.ndarray) -> None:
        if self.dense:
            from . import _kernels

            _kernels.scatter_mask(
                b, self.params.strides, fg, self.fields["M_FG"], self.fields["M_BG"]
            )
        else:
            self._reduce_frame(b, {"M_FG": fg, "M_BG": 1.0 - fg})

    def _reduce_frame(self, b: np.ndarray, channels: dict) -> None:
        keys, wts = _candidate_groups(b, self.params.strides)
        flat_keys = keys.T.ravel()
        flat_wts = wts.T.ravel()
        nz = np.flatnonzero(flat_wts > 0.0)
        flat_keys = flat_keys[nz]
        flat_wts = flat_wts[nz]
        order = np.argsort(flat_keys, kind="stable")
        sorted_keys = flat_keys[order]
        starts = np.concatenate([[0], np.flatnonzero(np.diff(sorted_keys)) + 1])
        sums = {}
        for name, ch in channels.items():
            vals = flat_wts if ch is None else flat_wts * np.repeat(ch, 8)[nz]
            sums[name] = np.add.reduceat(vals[order], starts)
        self._pending.append((sorted_keys[starts], sums))

    def finish(self, pixel_count: int) -> SparseGrid:
        names = FIELD_NAMES[:5] if self.with_masks else FIELD_NAMES[:3]
        if self.dense:
            occ = np.flatnonzero(self.fields["S"] > 0.0)
            gathered = {name: self.fields[name][occ].copy() for name in self.fields}
        else:
            all_keys = np.concatenate([k for k, _ in self._pending])
            order = np.argsort(all_keys, kind="stable")
            sorted_keys = all_keys[order]
            starts = np.concatenate([[0], np.flatnonzero(np.diff(sorted_keys)) + 1])
            uniq = sorted_keys[starts]
            gathered = {}
            for name in names:
                col = np.concatenate(
                    [sums.get(name, np.zeros(k.size)) for k, sums in self._pending]
                )
                gathered[name] = np.add.reduceat(col[order], starts)
            keep = gathered["S"] > 0.0
            occ = uniq[keep]
            gathered = {name: vals[keep] for name, vals in gathered.items()}
        return SparseGrid(
            params=self.params,
            packed=occ,
            S=gathered["S"],
            A_FG=gathered["A_FG"],
            A_BG=gathered["A_BG"],
            M_FG=gathered.get("M_FG") if self.with_masks else None,
            M_BG=gathered.get("M_BG") if self.with_masks else None,
            pixel_count=pixel_count,
        )


def build_grid(
    frames: Sequence[Frame],
    disparities: Sequence[DisparityMap],
    roi: RoiRect,
    params: GridParams,
    propagation_masks: Sequence | None = None,
    invalid_d: str = DEFAULT_INVALID_D,
) -> SparseGrid:
    """Splat every ROI pixel of the given frames into a sparse grid.

    Frames paired with a propagation mask contribute only the mask
    affinities M_FG / M_BG (their labels are evidence, not data); frames
    without one contribute the vertex weight S and the disparity affinities
    A_FG = sum(w * dhat), A_BG = sum(w * (1 - dhat)) with
    dhat = b_d / l_d. Pixels outside the ROI never enter the grid.
    """
    if len(frames) != len(disparities):
        raise ValueError("frames and disparities must pair up")
    if not frames:
        raise ValueError("need at least one frame")
    if invalid_d not in INVALID_D_MODES:
        raise ValueError(f"unknown invalid_d mode {invalid_d!r}")
    if propagation_masks is None:
        propagation_masks = [None] * len(frames)
    if len(propagation_masks) != len(frames):
        raise ValueError("propagation_masks must align with frames")
    h, w = frames[0].height, frames[0].width
    if roi.x1 >= w or roi.y1 >= h:
        raise EmptyRoi(f"roi {roi} exceeds image {w}x{h}")

    acc = _Accumulator(params, with_masks=any(m is not None for m in propagation_masks))
    l_d = float(params.dims[5])
    ys, xs = _roi_slices(roi)
    pixel_count = 0
    for frame, dm, mask in zip(frames, disparities, propagation_masks):
        b = np.ascontiguousarray(_lift_columns(frame, dm, roi, params, invalid_d))
        if mask is None:
            dhat = b[5] / l_d
            acc.add_data(b, dhat)
            pixel_count += b.shape[1]
        else:
            fg = mask.label[ys, xs].ravel().astype(np.float64)
            acc.add_mask(b, fg)
    return acc.finish(pixel_count)


def slice_labels(
    grid: SparseGrid,
    labels: np.ndarray,
    frames: Sequence[Frame],
    disparities: Sequence[DisparityMap],
    roi: RoiRect,
    tau: float = 0.5,
    invalid_d: str = DEFAULT_INVALID_D,
) -> list:
    """Read per-vertex labels back to pixels.

    labels must align with the grid's vertex order. A pixel becomes
    foreground when its weight-averaged label probability reaches `tau`;
    pixels outside the ROI or with zero total weight stay background.
    """
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (len(grid),):
        raise ValueError("labels must cover every occupied vertex")
    if len(grid) == 0:
        return [
            BinaryMask(np.zeros((fr.height, fr.width), dtype=np.uint8)) for fr in frames
        ]
    strides = grid.params.strides
    masks = []
    for frame, dm in zip(frames, disparities):
        b = _lift_columns(frame, dm, roi, grid.params, invalid_d)
        keys, wts = _candidate_groups(b, strides)
        num = np.zeros(b.shape[1])
        den = np.zeros(b.shape[1])
        for g in range(8):
            pos = np.searchsorted(grid.packed, keys[g])
            pos_c = np.minimum(pos, len(grid) - 1)
            hit = (grid.packed[pos_c] == keys[g]) & (wts[g] > 0.0)
            wg = np.where(hit, wts[g], 0.0)
            num += wg * labels[pos_c]
            den += wg
        prob = np.divide(num, den, out=np.zeros_like(num), where=den > 0.0)
        fg = (prob >= tau) & (den > 0.0)
        full = np.zeros((frame.height, frame.width), dtype=np.uint8)
        full[_roi_slices(roi)] = fg.reshape(roi.height, roi.width)
        masks.append(BinaryMask(full))
    return masks
