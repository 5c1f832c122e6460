"""Command-line entry point.

Subcommands: ``map`` (run the full pipeline over a sequence), ``degrade``
(write a synthetic-underwater copy of a sequence), ``eval`` (trajectory
ATE) and ``stats`` (counts of an exported mesh).  Exit codes: 0 success,
1 runtime failure, 2 usage error.  Progress goes to stderr; machine
readable results to stdout and the requested output files.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
import time
from pathlib import Path

from .config import PipelineConfig, load_config
from .dataset import (export_mesh, import_ply, load_sequence,
                      load_trajectory, read_color, read_depth, write_color)
from .evaluation import ate, map_stats, timing_report
from .expansion import MeshMap, expand
from .underwater import WaterParams, degrade, enhancement_stage


def _progress(msg: str):
    print(msg, file=sys.stderr)


def _load_cli_config(path: str | None) -> PipelineConfig:
    return load_config(path) if path else PipelineConfig()


def cmd_map(args) -> int:
    config = _load_cli_config(args.config)
    expansion = config.expansion
    if args.window is not None:
        expansion = type(expansion)(window_size=args.window,
                                    min_pixel_distance=expansion.min_pixel_distance,
                                    d_min=expansion.d_min)

    enhance = None
    color_dir = None
    if args.enhance.startswith("dir="):
        color_dir = args.enhance[4:]
        if not Path(color_dir).is_dir():
            raise FileNotFoundError(f"enhancement directory not found: {color_dir}")
    elif args.enhance != "none":
        enhance = enhancement_stage(args.enhance)

    manifest = load_sequence(args.sequence, config)
    mesh_map = MeshMap()
    log = []
    feature_counts = []
    vertices_added = []
    frames = 0
    t_prev = time.perf_counter()
    for frame in manifest.frames(color_dir=color_dir,
                                 max_frames=args.max_frames):
        t0 = time.perf_counter()
        decode_s = t0 - t_prev
        color = frame.color
        if enhance is not None:
            color = enhance(color)
            frame = type(frame)(frame.timestamp, color, frame.depth,
                                frame.pose, frame.index)
        t1 = time.perf_counter()
        stats = expand(mesh_map, frame, config.camera, expansion,
                       config.thresholds, config.sampling)
        t2 = time.perf_counter()
        log.append({"decode": decode_s, "enhance": t1 - t0, "expand": t2 - t1})
        feature_counts.append(stats.features_detected)
        vertices_added.append(stats.vertices_added)
        frames += 1
        if frames % 25 == 0:
            _progress(f"processed {frames} frames "
                      f"({mesh_map.vertex_count} vertices)")
        t_prev = time.perf_counter()
    if frames == 0:
        raise RuntimeError("sequence produced no frames")

    export_mesh(mesh_map, args.output)
    stats = map_stats(mesh_map)
    report = timing_report(log)
    print(f"frames={frames} vertices={stats.vertex_count} "
          f"triangles={stats.triangle_count} "
          f"dense_points={stats.dense_point_count} "
          f"warnings={manifest.skipped}")
    print(report.format())

    summary = {
        "frames": frames,
        "vertices": stats.vertex_count,
        "triangles": stats.triangle_count,
        "dense_points": stats.dense_point_count,
        "warnings": manifest.skipped,
        "enhance": args.enhance,
        "output": str(args.output),
        "feature_counts": feature_counts,
        "vertices_added": vertices_added,
        "timing": report.to_dict(),
    }
    if args.stats_out:
        Path(args.stats_out).write_text(json.dumps(summary, indent=2))
    if args.timing_out:
        timing = report.to_dict()
        timing["per_frame_ms"] = [
            {k: v * 1000.0 for k, v in entry.items()} for entry in log]
        Path(args.timing_out).write_text(json.dumps(timing, indent=2))
    return 0


def cmd_degrade(args) -> int:
    config = _load_cli_config(args.config)
    water = config.water
    if args.beta:
        water = WaterParams(beta=tuple(args.beta), backlight=water.backlight)
    if args.backlight:
        water = WaterParams(beta=water.beta, backlight=tuple(args.backlight))

    root = Path(args.sequence)
    out = Path(args.out)
    manifest = load_sequence(root, config)
    out.mkdir(parents=True, exist_ok=True)
    rgb_lines, depth_lines = [], []
    for t, color_rel, depth_rel in manifest.entries:
        color = read_color(root / color_rel)
        depth_path = root / depth_rel
        if not depth_path.exists():
            raise FileNotFoundError(f"missing depth file: {depth_path}")
        depth = read_depth(depth_path, config.depth_scale)
        hazed = degrade(color, depth, water)
        dst = out / color_rel
        dst.parent.mkdir(parents=True, exist_ok=True)
        write_color(dst, hazed)
        dst_depth = out / depth_rel
        dst_depth.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(depth_path, dst_depth)
        rgb_lines.append(f"{float(t)!r} {color_rel}")
        depth_lines.append(f"{float(t)!r} {depth_rel}")
    (out / "rgb.txt").write_text("\n".join(rgb_lines) + "\n")
    (out / "depth.txt").write_text("\n".join(depth_lines) + "\n")
    shutil.copyfile(root / "groundtruth.txt", out / "groundtruth.txt")
    (out / "degrade_manifest.json").write_text(json.dumps({
        "source": str(root),
        "beta": list(water.beta),
        "backlight": list(water.backlight),
        "frames": len(manifest.entries),
    }, indent=2))
    _progress(f"degraded {len(manifest.entries)} frames into {out}")
    return 0


def cmd_eval(args) -> int:
    est = load_trajectory(args.est)
    gt = load_trajectory(args.gt)
    report = ate(est, gt, args.max_dt)
    print(report.format())
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_stats(args) -> int:
    mesh = import_ply(args.mesh)
    print(f"vertices={mesh.vertex_count} triangles={mesh.triangle_count}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshmap",
        description="Incremental RGB-D mesh mapping and evaluation tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_map = sub.add_parser("map", help="build a mesh map from a sequence")
    p_map.add_argument("sequence", help="sequence directory (TUM layout)")
    p_map.add_argument("--config", help="TOML config file")
    p_map.add_argument("-o", "--output", required=True,
                       help="output mesh path (.ply or .obj)")
    p_map.add_argument("--enhance", default="none",
                       help="none | baseline | dir=PATH (default: none)")
    p_map.add_argument("--window", type=int, default=None,
                       help="override sliding window size")
    p_map.add_argument("--max-frames", type=int, default=None,
                       help="process at most this many frames")
    p_map.add_argument("--stats-out", help="write a JSON run summary here")
    p_map.add_argument("--timing-out", help="write per-frame timings here")
    p_map.set_defaults(func=cmd_map)

    p_deg = sub.add_parser("degrade",
                           help="write a synthetic-underwater sequence copy")
    p_deg.add_argument("sequence", help="clean sequence directory")
    p_deg.add_argument("--out", required=True, help="output directory")
    p_deg.add_argument("--config", help="TOML config file (water params)")
    p_deg.add_argument("--beta", type=_csv3, default=None,
                       help="attenuation r,g,b (1/m)")
    p_deg.add_argument("--backlight", type=_csv3, default=None,
                       help="veiling light r,g,b in [0,1]")
    p_deg.set_defaults(func=cmd_degrade)

    p_eval = sub.add_parser("eval", help="absolute trajectory error")
    p_eval.add_argument("est", help="estimated trajectory (TUM format)")
    p_eval.add_argument("gt", help="ground-truth trajectory (TUM format)")
    p_eval.add_argument("--max-dt", type=float, default=0.02,
                        help="association tolerance in seconds")
    p_eval.add_argument("--json-out", help="also write the report as JSON")
    p_eval.set_defaults(func=cmd_eval)

    p_stats = sub.add_parser("stats", help="counts of an exported mesh")
    p_stats.add_argument("mesh", help="PLY file written by map")
    p_stats.set_defaults(func=cmd_stats)
    return parser


def _csv3(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated values")
    return parts


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "max_frames", None) is not None and args.max_frames <= 0:
        parser.error("--max-frames must be a positive integer")
    if getattr(args, "window", None) is not None and args.window <= 0:
        parser.error("--window must be a positive integer")
    enhance = getattr(args, "enhance", None)
    if enhance is not None and enhance not in ("none", "baseline") \
            and not enhance.startswith("dir="):
        parser.error(f"invalid --enhance mode: {enhance}")
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
