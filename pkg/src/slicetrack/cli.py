"""Command-line entry points.

Subcommands: detect (print auto-detected keypoints in seed-file form),
track (run the full pipeline and save results), evaluate (DSC of a saved
run against annotations), reconstruct (stack saved masks into a voxel
blob), serve (HTTP session service for the companion UI). Exit status is
0 only when no error was emitted.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io, pipeline
from .core import Roi, TrackParams
from .errors import SliceTrackError
from .wavelet import DetectParams

_DETECT_DEFAULTS = DetectParams()
_TRACK_DEFAULTS = TrackParams()


def _parse_roi(text: str) -> Roi:
    parts = text.split(",")
    if len(parts) != 4:
        raise argparse.ArgumentTypeError("roi must be x0,y0,width,height")
    try:
        x0, y0, w, h = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError("roi values must be integers") from None
    return Roi(x0=x0, y0=y0, width=w, height=h)


def _parse_start(text: str):
    if text == "center":
        return "center"
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("start slice must be an index or 'center'") from None


def _parse_fb(text: str):
    if text.lower() in ("none", "off"):
        return None
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("fb-error must be a number or 'none'") from None


def _parse_max_keypoints(text: str):
    n = int(text)
    return None if n <= 0 else n


def _add_volume_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--volume", required=True, help="directory of slice images")
    p.add_argument("--pattern", default="*.png", help="filename glob (default *.png)")
    p.add_argument(
        "--numeric-sort",
        action="store_true",
        help="order slices by embedded numbers instead of lexicographically",
    )
    p.add_argument(
        "--strict", action="store_true", help="reject non-grayscale inputs"
    )
    p.add_argument(
        "--spacing-mm",
        type=float,
        default=1.0,
        help="distance between slices in mm (default 1.0)",
    )


def _add_detect_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--threshold",
        type=float,
        default=_DETECT_DEFAULTS.threshold,
        help="magnitude cut; a quantile in (0,1) or an absolute value",
    )
    p.add_argument(
        "--threshold-mode",
        choices=("quantile", "absolute"),
        default=_DETECT_DEFAULTS.threshold_mode,
    )
    p.add_argument(
        "--min-spacing",
        type=float,
        default=_DETECT_DEFAULTS.min_spacing,
        help="minimum keypoint separation in pixels",
    )
    p.add_argument(
        "--max-keypoints",
        type=_parse_max_keypoints,
        default=_DETECT_DEFAULTS.max_keypoints,
        help="cap on detected keypoints; 0 for unlimited",
    )


def _add_track_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--pyramid-levels", type=int, default=_TRACK_DEFAULTS.pyramid_levels
    )
    p.add_argument(
        "--window-radius", type=int, default=_TRACK_DEFAULTS.window_radius
    )
    p.add_argument(
        "--max-iterations", type=int, default=_TRACK_DEFAULTS.max_iterations
    )
    p.add_argument(
        "--eps",
        type=float,
        default=_TRACK_DEFAULTS.convergence_eps,
        help="stop iterating when the update step is below this",
    )
    p.add_argument(
        "--min-eigenvalue", type=float, default=_TRACK_DEFAULTS.min_eigenvalue
    )
    p.add_argument(
        "--fb-error",
        type=_parse_fb,
        default=_TRACK_DEFAULTS.fb_error_max,
        help="forward-backward drift gate in pixels, or 'none' to disable",
    )


def _detect_params(args) -> DetectParams:
    return DetectParams(
        threshold=args.threshold,
        threshold_mode=args.threshold_mode,
        min_spacing=args.min_spacing,
        max_keypoints=args.max_keypoints,
    )


def _track_params(args) -> TrackParams:
    return TrackParams(
        pyramid_levels=args.pyramid_levels,
        window_radius=args.window_radius,
        max_iterations=args.max_iterations,
        convergence_eps=args.eps,
        min_eigenvalue=args.min_eigenvalue,
        fb_error_max=args.fb_error,
    )


def _load_volume(args):
    return io.load_volume(
        args.volume,
        pattern=args.pattern,
        numeric_sort=args.numeric_sort,
        strict=args.strict,
        slice_spacing_mm=args.spacing_mm,
    )


def cmd_detect(args) -> int:
    volume = _load_volume(args)
    seed = pipeline.SeedSpec.auto(
        roi=args.roi, detect=_detect_params(args), start_slice=args.start_slice
    )
    found = pipeline.seed_keypoints(volume, seed)
    # seed-file format, so the output can feed `track --seed-file` directly
    print(f"start_slice {found.slice_index}")
    for p in found.points:
        print(f"{p.x} {p.y}")
    return 0


def cmd_track(args) -> int:
    volume = _load_volume(args)
    if args.seed_file is not None:
        start, points = io.read_seed_file(args.seed_file)
        if args.start_slice is not None:
            start = args.start_slice
        seed = pipeline.SeedSpec.manual(points, start_slice=start)
    else:
        seed = pipeline.SeedSpec.auto(
            roi=args.roi,
            detect=_detect_params(args),
            start_slice=args.start_slice if args.start_slice is not None else "center",
        )
    result = pipeline.segment(volume, seed, _track_params(args))
    io.save_result(
        result,
        args.out,
        in_plane_mm=args.in_plane_mm,
        spacing_mm=args.spacing_mm,
        source_ids=volume.source_ids,
    )
    n_masks = sum(1 for r in result.per_slice.values() if r.mask is not None)
    print(
        f"tracked slices {result.stop_up}..{result.stop_down} "
        f"({n_masks} masks) -> {args.out}"
    )
    return 0


def cmd_evaluate(args) -> int:
    manifest = io.load_manifest(args.result)
    source_ids = manifest.get("source_ids")
    if source_ids is None:
        if args.volume is None:
            raise SliceTrackError(
                "manifest records no source filenames; pass --volume to resolve "
                "annotation slice ids"
            )
        source_ids = [p.name for p in sorted(Path(args.volume).glob("*")) if p.is_file()]
    height, width = manifest["slice_shape"]
    predicted = io.load_masks(args.result)
    truth = io.rasterize_annotations(
        args.annotations, tuple(source_ids), height, width, label=args.label
    )
    report = pipeline.evaluate_masks(
        predicted, truth, (height, width), include_empty_truth=args.include_empty
    )
    print("slice_index,dsc")
    for i in sorted(report.per_slice_dsc):
        print(f"{i},{report.per_slice_dsc[i]:.6f}")
    print(f"mean,{report.mean:.6f}")
    print(f"std,{report.std:.6f}")
    print(f"median,{report.median:.6f}")
    print(f"iqr,{report.iqr_low:.6f}..{report.iqr_high:.6f}")
    print(f"n_evaluated,{report.n_evaluated}")
    print(f"n_zero,{report.n_zero}")
    return 0


def cmd_reconstruct(args) -> int:
    manifest = io.load_manifest(args.result)
    height, width = manifest["slice_shape"]
    masks = io.load_masks(args.result)
    voxels = pipeline.reconstruct_masks(
        masks,
        (height, width),
        manifest["n_slices"],
        in_plane_mm=args.in_plane_mm,
        spacing_mm=args.spacing_mm,
    )
    io.save_voxels(voxels, args.out)
    nx, ny, nz = voxels.dims
    print(f"voxel volume {nx}x{ny}x{nz}, {voxels.count} foreground -> {args.out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.volume_root, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicetrack",
        description="Propagate a seeded cross-section through an image stack.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="auto-detect keypoints on one slice")
    _add_volume_args(p)
    p.add_argument("--roi", type=_parse_roi, required=True, help="x0,y0,width,height")
    p.add_argument("--start-slice", type=_parse_start, default="center")
    _add_detect_args(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("track", help="run the full pipeline and save results")
    _add_volume_args(p)
    seed_src = p.add_mutually_exclusive_group(required=True)
    seed_src.add_argument("--seed-file", help="manual seeds: 'start_slice N' then 'x y' lines")
    seed_src.add_argument("--roi", type=_parse_roi, help="auto-detect inside x0,y0,width,height")
    p.add_argument(
        "--start-slice",
        type=_parse_start,
        default=None,
        help="overrides the seed file header / defaults to center",
    )
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--in-plane-mm", type=float, default=1.0)
    _add_detect_args(p)
    _add_track_args(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="DSC of a saved run against annotations")
    p.add_argument("--result", required=True, help="directory written by track")
    p.add_argument("--annotations", required=True, help="directory of annotation JSON files")
    p.add_argument("--label", default=None, help="only polygons with this label")
    p.add_argument(
        "--include-empty",
        action="store_true",
        help="also score slices whose ground truth is empty",
    )
    p.add_argument("--volume", default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reconstruct", help="stack saved masks into a voxel blob")
    p.add_argument("--result", required=True, help="directory written by track")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--in-plane-mm", type=float, default=1.0)
    p.add_argument("--spacing-mm", type=float, default=1.0)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("serve", help="HTTP session service for the companion UI")
    p.add_argument("--volume-root", required=True, help="directory of volume directories")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--ui-dir", default=None, help="also serve this static UI directory at /")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SliceTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
