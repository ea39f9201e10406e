"""Command line driver: `segment`, `eval` and `synth` subcommands.

Configuration is plain `key = value` text ('#' starts a comment); precedence
is built-in defaults, then the config file, then key=value pairs on the
command line. The resolved configuration is echoed to standard error in the
same format, so an echo is itself a valid config file.

Exit codes: 0 success, 1 usage/config error, 2 I/O error, 3 pipeline error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from .bilateral_grid import DEFAULT_INVALID_D, INVALID_D_MODES
from .disparity_prior import PEAK_RULES
from .errors import (
    BadValue,
    CountMismatch,
    DimensionMismatch,
    IoFailure,
    MissingFile,
    ShapeOutOfBounds,
    StereosegError,
    UnknownKey,
    UnsupportedFormat,
)
from .graph_cut import GraphParams
from .media_io import (
    load_sequence,
    numbered_files,
    read_mask,
    write_mask,
    write_overlay,
)
from .metrics import aggregate, score_frame
from .report import format_report, write_report_files
from .streaming import PRIOR_MODES, SegmentationParams, segment_stream
from .synth import SceneSpec, generate_scene, scene_metadata, write_scene


@dataclass
class Config:
    """Resolved configuration for the `segment` subcommand."""

    frames_dir: str = ""
    disparity_dir: str = ""
    out_dir: str = ""
    overlay_dir: str = ""
    debug_dir: str = ""
    l: int = 10
    lam: float = 1.0
    lam_i: float = 0.5
    lam_d: float = 0.5
    sigma: tuple = (1.0,) * 7
    tau: float = 0.5
    grid_intensity: int = 7
    grid_chroma: int = 9
    grid_spatial: int = 13
    grid_temporal: int = 2
    grid_disparity: int = 2
    nth1_divisor: int = 100
    nth2_divisor: int = 10
    peak_rule: str = "nearest"
    prior_mode: str = "window"
    roi_margin: int = 0
    invalid_d: str = DEFAULT_INVALID_D
    invert_disparity_costs: bool = False
    boundary_tol: int = 2


def _parse_int(key, text, minimum):
    try:
        value = int(text)
    except ValueError:
        raise BadValue(key, f"expected an integer, got {text!r}") from None
    if value < minimum:
        raise BadValue(key, f"must be >= {minimum}, got {value}")
    return value


def _parse_float(key, text, minimum=None, exclusive=None):
    try:
        value = float(text)
    except ValueError:
        raise BadValue(key, f"expected a number, got {text!r}") from None
    if minimum is not None and value < minimum:
        raise BadValue(key, f"must be >= {minimum}, got {value}")
    if exclusive is not None:
        lo, hi = exclusive
        if not lo < value < hi:
            raise BadValue(key, f"must lie strictly between {lo} and {hi}, got {value}")
    return value


def _parse_bool(key, text):
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise BadValue(key, f"expected true/false, got {text!r}")


def _parse_choice(key, text, choices):
    if text not in choices:
        raise BadValue(key, f"must be one of {', '.join(choices)}; got {text!r}")
    return text


def _parse_sigma(key, text):
    parts = [p.strip() for p in text.split(",")]
    values = tuple(_parse_float(key, p) for p in parts)
    if len(values) == 1:
        values = values * 7
    if len(values) != 7:
        raise BadValue(key, f"expected 1 or 7 comma-separated values, got {len(parts)}")
    if any(v <= 0 for v in values):
        raise BadValue(key, "bandwidths must be > 0")
    return values


# external key -> (field name, parser)
CONFIG_KEYS = {
    "frames_dir": ("frames_dir", lambda k, t: t),
    "disparity_dir": ("disparity_dir", lambda k, t: t),
    "out_dir": ("out_dir", lambda k, t: t),
    "overlay_dir": ("overlay_dir", lambda k, t: t),
    "debug_dir": ("debug_dir", lambda k, t: t),
    "l": ("l", lambda k, t: _parse_int(k, t, 1)),
    "lambda": ("lam", lambda k, t: _parse_float(k, t, minimum=0.0)),
    "lambda_i": ("lam_i", lambda k, t: _parse_float(k, t, minimum=0.0)),
    "lambda_d": ("lam_d", lambda k, t: _parse_float(k, t, minimum=0.0)),
    "sigma": ("sigma", _parse_sigma),
    "tau": ("tau", lambda k, t: _parse_float(k, t, exclusive=(0.0, 1.0))),
    "grid_intensity": ("grid_intensity", lambda k, t: _parse_int(k, t, 1)),
    "grid_chroma": ("grid_chroma", lambda k, t: _parse_int(k, t, 1)),
    "grid_spatial": ("grid_spatial", lambda k, t: _parse_int(k, t, 1)),
    "grid_temporal": ("grid_temporal", lambda k, t: _parse_int(k, t, 1)),
    "grid_disparity": ("grid_disparity", lambda k, t: _parse_int(k, t, 1)),
    "nth1_divisor": ("nth1_divisor", lambda k, t: _parse_int(k, t, 1)),
    "nth2_divisor": ("nth2_divisor", lambda k, t: _parse_int(k, t, 1)),
    "peak_rule": ("peak_rule", lambda k, t: _parse_choice(k, t, PEAK_RULES)),
    "prior_mode": ("prior_mode", lambda k, t: _parse_choice(k, t, PRIOR_MODES)),
    "roi_margin": ("roi_margin", lambda k, t: _parse_int(k, t, 0)),
    "invalid_d": ("invalid_d", lambda k, t: _parse_choice(k, t, INVALID_D_MODES)),
    "invert_disparity_costs": ("invert_disparity_costs", _parse_bool),
    "boundary_tol": ("boundary_tol", lambda k, t: _parse_int(k, t, 0)),
}

_FIELD_TO_KEY = {field: key for key, (field, _) in CONFIG_KEYS.items()}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        if len(set(value)) == 1:
            return repr(value[0])
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def echo_config(config: Config) -> str:
    """The resolved config as `key = value` lines (itself a valid config)."""
    lines = []
    for f in fields(Config):
        key = _FIELD_TO_KEY[f.name]
        lines.append(f"{key} = {_format_value(getattr(config, f.name))}")
    return "\n".join(lines) + "\n"


def _config_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise BadValue(f"line {lineno}", f"expected key = value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        yield key.strip(), value.strip()


def parse_config(path=None, overrides=(), echo: bool = True) -> Config:
    """Resolve defaults < config file < command-line overrides.

    A missing config file is treated as empty (defaults apply). The
    resolved configuration is echoed to standard error.
    """
    resolved = {}
    pairs = []
    if path is not None:
        p = Path(path)
        if p.is_file():
            pairs.extend(_config_lines(p.read_text()))
    for item in overrides:
        if "=" not in item:
            raise BadValue(item, "overrides take the form key=value")
        key, value = item.split("=", 1)
        pairs.append((key.strip(), value.strip()))
    for key, value in pairs:
        if key not in CONFIG_KEYS:
            raise UnknownKey(f"unknown configuration key {key!r}")
        field_name, parser = CONFIG_KEYS[key]
        resolved[field_name] = parser(key, value)
    config = Config(**resolved)
    if echo:
        sys.stderr.write(echo_config(config))
    return config


def segmentation_params(config: Config) -> SegmentationParams:
    """Map a Config onto the streaming segmenter's parameter objects."""
    dims = (
        config.grid_intensity,
        config.grid_chroma,
        config.grid_chroma,
        config.grid_spatial,
        config.grid_spatial,
        config.grid_disparity,
        config.grid_temporal,
    )
    graph = GraphParams(
        lam=config.lam,
        lam_i=config.lam_i,
        lam_d=config.lam_d,
        sigma=config.sigma,
        invert_disparity_costs=config.invert_disparity_costs,
    )
    return SegmentationParams(
        l=config.l,
        grid_dims=dims,
        graph=graph,
        tau=config.tau,
        peak_rule=config.peak_rule,
        nth1_divisor=config.nth1_divisor,
        nth2_divisor=config.nth2_divisor,
        roi_margin=config.roi_margin,
        prior_mode=config.prior_mode,
        invalid_d=config.invalid_d,
    )


def cmd_segment(config: Config) -> int:
    for key in ("frames_dir", "disparity_dir", "out_dir"):
        if not getattr(config, key):
            raise BadValue(key, "required for segment")
    sequence = load_sequence(config.frames_dir, config.disparity_dir)
    params = segmentation_params(config)
    masks = segment_stream(
        sequence, params, progress=True, debug_dir=config.debug_dir or None
    )
    out_dir = Path(config.out_dir)
    for i, mask in enumerate(masks):
        write_mask(mask, out_dir / f"{i:06d}.png")
    if config.overlay_dir:
        overlay_dir = Path(config.overlay_dir)
        for i, (frame, mask) in enumerate(zip(sequence.frames, masks)):
            write_overlay(frame, mask, overlay_dir / f"{i:06d}.png")
    return 0


def cmd_eval(pred_dir, gt_dir, tol: int = 2, report_dir=None) -> int:
    pred_paths = numbered_files(pred_dir, (".png",))
    gt_paths = numbered_files(gt_dir, (".png",))
    if len(pred_paths) != len(gt_paths):
        raise CountMismatch(f"{len(pred_paths)} predictions vs {len(gt_paths)} ground-truth masks")
    if not pred_paths:
        raise MissingFile(f"no masks found in {pred_dir}")
    scores = []
    for pp, gp in zip(pred_paths, gt_paths):
        scores.append(score_frame(read_mask(pp), read_mask(gp), tol=tol))
    report = aggregate(scores)
    sys.stdout.write(format_report(scores, report))
    if report_dir is not None:
        write_report_files(scores, report, report_dir)
    return 0


SCENE_KEYS = {
    "width": lambda k, t: _parse_int(k, t, 1),
    "height": lambda k, t: _parse_int(k, t, 1),
    "n_frames": lambda k, t: _parse_int(k, t, 1),
    "shape": lambda k, t: _parse_choice(k, t, ("ellipse", "rectangle")),
    "cx": lambda k, t: _parse_float(k, t),
    "cy": lambda k, t: _parse_float(k, t),
    "vx": lambda k, t: _parse_float(k, t),
    "vy": lambda k, t: _parse_float(k, t),
    "rx": lambda k, t: _parse_float(k, t, minimum=1.0),
    "ry": lambda k, t: _parse_float(k, t, minimum=1.0),
    "fg_disparity": lambda k, t: _parse_float(k, t, minimum=0.0),
    "fg_jitter": lambda k, t: _parse_float(k, t, minimum=0.0),
    "bg_disparity": lambda k, t: _parse_float(k, t, minimum=0.0),
    "bg_jitter": lambda k, t: _parse_float(k, t, minimum=0.0),
    "fg_color": lambda k, t: _parse_color(k, t),
    "bg_color": lambda k, t: _parse_color(k, t),
    "color_noise": lambda k, t: _parse_int(k, t, 0),
    "invalid_fraction": lambda k, t: _parse_float(k, t, minimum=0.0),
    "seed": lambda k, t: _parse_int(k, t, 0),
}


def _parse_color(key, text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise BadValue(key, f"expected R,G,B, got {text!r}")
    channels = tuple(_parse_int(key, p, 0) for p in parts)
    if any(c > 255 for c in channels):
        raise BadValue(key, "channels must be in [0, 255]")
    return channels


def parse_scene_spec(path=None) -> SceneSpec:
    """Read a scene spec file (key = value); a missing path gives defaults."""
    values = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise IoFailure(f"cannot read scene spec {path}")
        for key, value in _config_lines(p.read_text()):
            if key not in SCENE_KEYS:
                raise UnknownKey(f"unknown scene key {key!r}")
            values[key] = SCENE_KEYS[key](key, value)
    try:
        return SceneSpec(**values)
    except ValueError as exc:
        raise BadValue("scene", str(exc)) from exc


def cmd_synth(spec_path, out_dir) -> int:
    spec = parse_scene_spec(spec_path)
    scene = generate_scene(spec)
    write_scene(scene, out_dir)
    sys.stderr.write(scene_metadata(spec))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stereoseg",
        description="Unsupervised stereo-video foreground segmentation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_segment = sub.add_parser("segment", help="segment a frame + disparity sequence")
    p_segment.add_argument("--config", help="key = value configuration file")
    p_segment.add_argument(
        "overrides", nargs="*", metavar="key=value", help="config overrides"
    )

    p_eval = sub.add_parser("eval", help="score predicted masks against ground truth")
    p_eval.add_argument("--pred", required=True, help="directory of predicted masks")
    p_eval.add_argument("--gt", required=True, help="directory of ground-truth masks")
    p_eval.add_argument("--tol", type=int, default=2, help="boundary match tolerance in pixels")
    p_eval.add_argument(
        "--report-dir", default=None, help="write report.txt, per_frame.tsv and scores.png here"
    )

    p_synth = sub.add_parser("synth", help="generate a synthetic stereo scene")
    p_synth.add_argument("--spec", default=None, help="scene spec file (defaults if omitted)")
    p_synth.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        if args.command == "segment":
            config = parse_config(args.config, args.overrides)
            return cmd_segment(config)
        if args.command == "eval":
            if args.tol < 0:
                raise BadValue("tol", "must be >= 0")
            return cmd_eval(args.pred, args.gt, tol=args.tol, report_dir=args.report_dir)
        if args.command == "synth":
            return cmd_synth(args.spec, args.out)
        parser.error(f"unknown command {args.command!r}")
    except (UnknownKey, BadValue, ShapeOutOfBounds) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (MissingFile, CountMismatch, UnsupportedFormat, IoFailure, DimensionMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except StereosegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
