"""Deterministic synthetic stereo scenes and the exhaustive min-cut oracle.

Scenes place a moving foreground shape with a distinct color and a near
 disparity in front of a far background, add per-pixel uniform jitter, and
mark a fraction of disparity pixels invalid (never near the shape boundary,
so ground truth stays clean). All randomness comes from one seeded
numpy PCG64 generator; identical specs give bitwise-identical scenes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ShapeOutOfBounds, TooLarge
from .graph_cut import EnergyGraph
from .media_io import (
    BinaryMask,
    DisparityMap,
    StereoSequence,
    rgb_image_to_frame,
    write_disparity,
    write_mask,
    write_rgb_image,
)

RNG_ALGORITHM = "numpy-pcg64"
BRUTE_FORCE_LIMIT = 20
SHAPES = ("ellipse", "rectangle")

# Invalid pixels stay this far (Chebyshev) from the shape boundary.
INVALID_MARGIN = 2


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of one synthetic scene; defaults give the stock test scene."""

    width: int = 160
    height: int = 120
    n_frames: int = 20
    shape: str = "ellipse"
    cx: float = 60.0
    cy: float = 60.0
    vx: float = 0.5
    vy: float = 0.25
    rx: float = 34.0
    ry: float = 24.0
    fg_disparity: float = 40.0
    fg_jitter: float = 2.0
    bg_disparity: float = 5.0
    bg_jitter: float = 2.0
    fg_color: tuple = (200, 90, 60)
    bg_color: tuple = (40, 120, 180)
    color_noise: int = 8
    invalid_fraction: float = 0.05
    seed: int = 7

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.fg_disparity <= self.bg_disparity:
            raise ValueError("foreground disparity must exceed background disparity")
        if not 0.0 <= self.invalid_fraction < 1.0:
            raise ValueError("invalid_fraction must be in [0, 1)")
        for t in (0, self.n_frames - 1):
            cx = self.cx + t * self.vx
            cy = self.cy + t * self.vy
            if (
                cx - self.rx < 0
                or cx + self.rx > self.width - 1
                or cy - self.ry < 0
                or cy + self.ry > self.height - 1
            ):
                raise ShapeOutOfBounds(
                    f"shape leaves the {self.width}x{self.height} image at frame {t}"
                )


@dataclass
class SynthScene:
    """Generated sequence plus exact ground truth and the source RGB frames."""

    spec: SceneSpec
    sequence: StereoSequence
    gt_masks: list = field(default_factory=list)
    rgb_frames: list = field(default_factory=list)


def _shape_support(spec: SceneSpec, t: int) -> np.ndarray:
    cx = spec.cx + t * spec.vx
    cy = spec.cy + t * spec.vy
    ys = np.arange(spec.height, dtype=np.float64)[:, None]
    xs = np.arange(spec.width, dtype=np.float64)[None, :]
    if spec.shape == "ellipse":
        return ((xs - cx) / spec.rx) ** 2 + ((ys - cy) / spec.ry) ** 2 <= 1.0
    return (np.abs(xs - cx) <= spec.rx) & (np.abs(ys - cy) <= spec.ry)


def _quantize_disparity(d: np.ndarray) -> np.ndarray:
    """Snap to the 1/16 fixed-point lattice used by the file format, so an
    in-memory scene equals its disk round trip."""
    return np.maximum(np.floor(d * 16.0 + 0.5), 1.0) / 16.0


def generate_scene(spec: SceneSpec) -> SynthScene:
    """Render the scene described by `spec` (deterministic given its seed)."""
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    footprint = np.ones((2 * INVALID_MARGIN + 1,) * 2, dtype=bool)
    frames = []
    disparities = []
    gt_masks = []
    rgb_frames = []
    for t in range(spec.n_frames):
        support = _shape_support(spec, t)

        base = np.where(
            support[..., None],
            np.asarray(spec.fg_color, dtype=np.int64),
            np.asarray(spec.bg_color, dtype=np.int64),
        )
        noise = rng.integers(-spec.color_noise, spec.color_noise + 1, size=(h, w, 3))
        rgb = np.clip(base + noise, 0, 255).astype(np.uint8)

        jitter = np.where(
            support,
            rng.uniform(-spec.fg_jitter, spec.fg_jitter, size=(h, w)),
            rng.uniform(-spec.bg_jitter, spec.bg_jitter, size=(h, w)),
        )
        d = np.where(support, spec.fg_disparity, spec.bg_disparity) + jitter
        d = _quantize_disparity(d)

        valid = np.ones((h, w), dtype=bool)
        n_invalid = int(np.floor(spec.invalid_fraction * h * w))
        if n_invalid:
            band = ndimage.binary_dilation(support, structure=footprint) & ~ndimage.binary_erosion(
                support, structure=footprint
            )
            eligible = np.flatnonzero(~band.ravel())
            chosen = rng.choice(eligible, size=min(n_invalid, eligible.size), replace=False)
            valid.ravel()[chosen] = False
            d.ravel()[chosen] = 0.0  # match the file format's invalid encoding

        frames.append(rgb_image_to_frame(rgb, index=t))
        disparities.append(DisparityMap(d=d.astype(np.float32), valid=valid))
        gt_masks.append(BinaryMask(support.astype(np.uint8)))
        rgb_frames.append(rgb)
    sequence = StereoSequence(frames=frames, disparities=disparities)
    return SynthScene(spec=spec, sequence=sequence, gt_masks=gt_masks, rgb_frames=rgb_frames)


def scene_metadata(spec: SceneSpec) -> str:
    """Key = value echo of the spec plus the RNG algorithm identifier."""
    lines = []
    for name in (
        "width", "height", "n_frames", "shape", "cx", "cy", "vx", "vy", "rx", "ry",
        "fg_disparity", "fg_jitter", "bg_disparity", "bg_jitter",
        "fg_color", "bg_color", "color_noise", "invalid_fraction", "seed",
    ):
        value = getattr(spec, name)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{name} = {value}")
    lines.append(f"rng = {RNG_ALGORITHM}")
    return "\n".join(lines) + "\n"


def write_scene(scene: SynthScene, out_dir) -> None:
    """Materialize a scene in the loader's directory layout:
    frames/, disparity/, gt/ plus scene.txt metadata."""
    out = Path(out_dir)
    for t in range(scene.spec.n_frames):
        name = f"{t:06d}.png"
        write_rgb_image(scene.rgb_frames[t], out / "frames" / name)
        write_disparity(scene.sequence.disparities[t], out / "disparity" / name)
        write_mask(scene.gt_masks[t], out / "gt" / name)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scene.txt").write_text(scene_metadata(scene.spec))


def brute_force_mincut(graph: EnergyGraph) -> tuple:
    """Exhaustive minimum of the graph energy over all 2^n labelings.

    Ties are broken toward the lexicographically smallest labeling in node
    order. This is the independent oracle for min_cut; instances above 20
    nodes are refused.
    """
    n = graph.n_nodes
    if n > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"{n} nodes exceed the exhaustive limit of {BRUTE_FORCE_LIMIT}")
    if n == 0:
        return np.empty(0, dtype=np.uint8), 0.0
    codes = np.arange(1 << n, dtype=np.int64)
    shifts = n - 1 - np.arange(n)
    labelings = ((codes[:, None] >> shifts[None, :]) & 1).astype(np.float64)
    totals = labelings @ graph.cost1 + (1.0 - labelings) @ graph.cost0
    for (u, v), wt in zip(graph.edges, graph.weights):
        totals += wt * (labelings[:, u] != labelings[:, v])
    best = int(np.argmin(totals))
    return labelings[best].astype(np.uint8), float(totals[best])
