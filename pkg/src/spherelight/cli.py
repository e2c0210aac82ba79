"""Command-line interface.

Subcommands: record-synthetic, replay, eval-entropy, eval-mismatch,
eval-encoding, bench-pipeline, serve. Every malformed input exits nonzero
with a one-line error on stderr.
"""

from __future__ import annotations

import argparse
import importlib
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .geometry import build_grid, generate_anchors
from .metrics import (
    encoding_stats,
    mismatch_rate,
    sampler_relative_entropies,
    uniform_cube_points,
)
from .recording import MalformedRecordingError, read_recording, record_scene, write_recording
from .replay import ReplayConfig, run_replay
from .sampling import backproject, translate_to
from .scene import SCENARIOS
from .server import run_server
from .service import EdgeService


def _parse_grid(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        width, height = int(w), int(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must look like 1024x512, got {text!r}") from exc
    if width < 1 or height < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return width, height


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spherelight")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("record-synthetic", help="render a synthetic scenario to a recording")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), required=True)
    p.add_argument("--frames", type=int, default=300)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=192)
    p.add_argument("--anchors", type=int, default=1280)
    p.set_defaults(func=cmd_record_synthetic)

    p = sub.add_parser("replay", help="drive a recording through the pipeline and report")
    p.add_argument("--recording", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--server", help="edge server URL; default runs in-process")
    group.add_argument("--in-process", action="store_true")
    p.add_argument("--theta", type=float, default=0.6)
    p.add_argument("--window", type=int, default=4)
    p.add_argument("--grid", type=_parse_grid, default=(1024, 512))
    p.add_argument("--report", help="write the CSV report here")
    p.add_argument("--force-trigger", action="store_true", help="send on every frame")
    p.add_argument("--no-baseline", action="store_true")
    p.add_argument("--no-truth", action="store_true")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("eval-entropy", help="compare downsampler completeness on a recording")
    p.add_argument("--recording", required=True)
    p.add_argument("--samplers", default="uspc,random,fps")
    p.add_argument("--k", type=int, default=0, help="sample budget; 0 means match uspc")
    p.add_argument("--frame", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", type=_parse_grid, default=(1024, 512))
    p.set_defaults(func=cmd_eval_entropy)

    p = sub.add_parser("eval-mismatch", help="grid-vs-exhaustive nearest anchor agreement")
    p.add_argument("--anchors", type=int, default=1280)
    p.add_argument("--grid", type=_parse_grid, default=(1024, 512))
    p.add_argument("--points", type=int, default=1_000_000)
    p.add_argument("--cube", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval_mismatch)

    p = sub.add_parser("eval-encoding", help="wire-size accounting over a recording")
    p.add_argument("--recording", required=True)
    p.add_argument("--grid", type=_parse_grid, default=(1024, 512))
    p.set_defaults(func=cmd_eval_encoding)

    p = sub.add_parser("bench-pipeline", help="per-frame client processing latency")
    p.add_argument("--recording", required=True)
    p.add_argument("--grid", type=_parse_grid, default=(1024, 512))
    p.add_argument(
        "--backend",
        choices=("active", "python", "compiled", "both"),
        default="active",
        help="kernel backend to benchmark",
    )
    p.add_argument("--theta", type=float, default=0.6)
    p.add_argument("--window", type=int, default=4)
    p.set_defaults(func=cmd_bench_pipeline)

    p = sub.add_parser("serve", help="run the edge service over HTTP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--min-anchors", type=int, default=512)
    p.add_argument("--max-anchors", type=int, default=4096)
    p.add_argument(
        "--estimator",
        default="projector",
        help="'projector' or a dotted path module:callable",
    )
    p.add_argument("--share-observations", action="store_true")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_serve)

    return parser


def cmd_record_synthetic(args) -> int:
    if args.frames < 1:
        print("error: --frames must be positive", file=sys.stderr)
        return 1
    scene = SCENARIOS[args.scenario](
        frames=args.frames, width=args.width, height=args.height
    )
    recording = record_scene(scene, anchor_count=args.anchors)
    out = write_recording(recording, args.out)
    size = (out / "frames.bin").stat().st_size
    print(f"wrote {args.frames} frames ({size} bytes) to {out}")
    return 0


def cmd_replay(args) -> int:
    recording = read_recording(args.recording)
    config = ReplayConfig(
        theta=args.theta,
        window=args.window,
        grid_width=args.grid[0],
        grid_height=args.grid[1],
        server_url=args.server,
        force_trigger=args.force_trigger,
        compute_truth=not args.no_truth,
        compute_baseline=not args.no_baseline,
    )
    report = run_replay(recording, config)
    print(report.summary())
    if args.report:
        Path(args.report).write_bytes(report.csv_bytes())
        print(f"report written to {args.report}")
    return 0


def cmd_eval_entropy(args) -> int:
    recording = read_recording(args.recording)
    if not 0 <= args.frame < len(recording.frames):
        print(f"error: frame {args.frame} out of range", file=sys.stderr)
        return 1
    if recording.estimation_positions.shape[0] == 0:
        print("error: recording has no estimation positions", file=sys.stderr)
        return 1
    wanted = [s.strip() for s in args.samplers.split(",") if s.strip()]
    unknown = [s for s in wanted if s not in ("uspc", "random", "fps")]
    if unknown:
        print(f"error: unknown samplers {unknown}", file=sys.stderr)
        return 1

    frame = recording.frames[args.frame].to_frame_input()
    cloud = backproject(
        frame.rgb, frame.depth, recording.manifest.intrinsics(), frame.pose
    )
    cloud = translate_to(cloud, recording.estimation_positions[0])
    anchors = generate_anchors(recording.manifest.anchor_count)
    grid = build_grid(anchors, *args.grid)
    ratios = sampler_relative_entropies(
        cloud, anchors, grid, seed=args.seed, k=args.k or None
    )
    print("sampler,relative_entropy")
    for name in wanted:
        print(f"{name},{ratios[name]:.6f}")
    return 0


def cmd_eval_mismatch(args) -> int:
    if args.points < 1:
        print("error: --points must be positive", file=sys.stderr)
        return 1
    started = time.perf_counter()
    anchors = generate_anchors(args.anchors)
    grid = build_grid(anchors, *args.grid)
    directions = uniform_cube_points(args.points, args.cube, args.seed)
    rate = mismatch_rate(anchors, grid, directions)
    elapsed = time.perf_counter() - started
    print(
        f"anchors={args.anchors} grid={args.grid[0]}x{args.grid[1]} "
        f"points={args.points} mismatch_rate={rate:.6f} elapsed_s={elapsed:.2f}"
    )
    return 0


def cmd_eval_encoding(args) -> int:
    from . import codec
    from .pipeline import TRIGGERED

    recording = read_recording(args.recording)
    config = ReplayConfig(
        grid_width=args.grid[0],
        grid_height=args.grid[1],
        force_trigger=True,
        compute_truth=False,
        compute_baseline=False,
    )
    from .replay import _run_pass

    _, outcomes, _, _ = _run_pass(recording, config, force_trigger=True)
    sizes = [
        o.bytes_sent
        for rows in outcomes.values()
        for o in rows
        if o.status == TRIGGERED
    ]
    if not sizes:
        print("error: no packets produced (recording never active?)", file=sys.stderr)
        return 1
    raw = recording.manifest.width * recording.manifest.height * 5
    report = encoding_stats(sizes, raw)
    sys.stdout.write(report.to_csv())
    expected_max = codec.HEADER_SIZE + codec.ENTRY_SIZE * recording.manifest.anchor_count
    print(f"# size law max 10+7*{recording.manifest.anchor_count} = {expected_max} bytes")
    return 0


def _bench_once(recording, args) -> dict[str, tuple[float, float]]:
    config = ReplayConfig(
        theta=args.theta,
        window=args.window,
        grid_width=args.grid[0],
        grid_height=args.grid[1],
        force_trigger=True,
        compute_truth=False,
        compute_baseline=False,
    )
    from .replay import _run_pass

    _, _, _, timings = _run_pass(recording, config, force_trigger=True)
    return {
        stage: (float(np.percentile(v, 50)), float(np.percentile(v, 95)))
        for stage, v in timings.items()
        if v
    }


def cmd_bench_pipeline(args) -> int:
    recording = read_recording(args.recording)
    backends: list[str]
    if args.backend == "active":
        backends = [kernels.active_backend()]
    elif args.backend == "both":
        backends = list(kernels.available_backends())
    else:
        backends = [args.backend]

    for name in backends:
        if name not in kernels.available_backends():
            print(f"error: backend {name!r} not available", file=sys.stderr)
            return 1
        with kernels.backend(name):
            stats = _bench_once(recording, args)
        print(f"backend={name}")
        for stage in sorted(stats):
            p50, p95 = stats[stage]
            print(f"  {stage}: p50={p50:.2f}ms p95={p95:.2f}ms")
    return 0


def cmd_serve(args) -> int:
    if args.estimator == "projector":
        estimator = None
    else:
        try:
            module_name, _, attr = args.estimator.partition(":")
            estimator = getattr(importlib.import_module(module_name), attr)
        except (ImportError, AttributeError, ValueError) as exc:
            print(f"error: cannot load estimator {args.estimator!r}: {exc}", file=sys.stderr)
            return 1
    service = EdgeService(
        estimator=estimator,
        share_observations=args.share_observations,
        min_anchor_count=args.min_anchors,
        max_anchor_count=args.max_anchors,
    )
    print(f"serving on {args.host}:{args.port} (kernels: {kernels.active_backend()})")
    run_server(args.host, args.port, service, verbose=not args.quiet)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MalformedRecordingError as exc:
        print(f"error: malformed recording: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
