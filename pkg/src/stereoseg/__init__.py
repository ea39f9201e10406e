"""Unsupervised foreground segmentation for stereo video.

Pipeline: a disparity-histogram prior selects the near object and its region
of interest; pixels are lifted into a sparse 7-D bilateral grid; an exact
graph cut labels the occupied vertices; labels are sliced back to pixels.
Arbitrary-length videos stream through fixed-length subsequence windows that
propagate the previous window's mask.
"""

from .bilateral_grid import (
    DEFAULT_GRID_DIMS,
    GridParams,
    GridVertex,
    SparseGrid,
    build_grid,
    lift,
    nearest_vertex,
    observed_disparity_range,
    slice_labels,
    splat_weights,
    window_grid_params,
)
from .disparity_prior import (
    DisparityHistogram,
    DisparityInterval,
    PriorThresholds,
    RoiRect,
    bounding_rect,
    build_prior_mask,
    disparity_histogram,
    estimate_prior,
    find_foreground_peak,
    grow_interval,
)
from .graph_cut import (
    EnergyBreakdown,
    EnergyGraph,
    GraphParams,
    build_graph,
    energy,
    gaussian_affinity,
    min_cut,
)
from .media_io import (
    BinaryMask,
    DisparityMap,
    Frame,
    StereoSequence,
    decode_disparity,
    load_sequence,
    read_mask,
    rgb_to_yuv,
    write_mask,
    write_overlay,
    yuv_to_rgb,
)
from .metrics import (
    FrameScore,
    SequenceReport,
    aggregate,
    contour_f_measure,
    region_similarity,
    score_frame,
)
from .streaming import (
    SegmentationParams,
    StreamState,
    SubsequenceWindow,
    segment_stream,
    segment_window,
    split_subsequences,
)
from .synth import SceneSpec, SynthScene, brute_force_mincut, generate_scene, write_scene

__version__ = "0.1.0"
