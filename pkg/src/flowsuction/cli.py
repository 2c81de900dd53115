"""Command line entry point: ``flowsuction <command> ...``.

Exit codes: 0 success, 1 usage error, 2 bad input data, 3 tick budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, PipelineConfig, default_config, load_config
from .evaluation import compare_baseline, removal_percent, run_suction, write_metrics_csv
from .flow_estimation import FlowEstimatorKind, FrameBuffer, detect
from .fluid_sim import FluidState, evaluation_scenes, get_scene, scene_names, simulate
from .region_extraction import extract_region
from .suction_controller import ControllerParams, ExecutionReport, TickBudgetExceeded
from .temporal_filter import FilterState, filter_step
from .trajectory_gen import PlanningError, gate_and_emit, generate_trajectory, update_age
from .types import AgeCountMap, DimensionError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BUDGET = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config(path: str | None) -> PipelineConfig:
    if path is None:
        return default_config()
    if not Path(path).is_file():
        raise UsageError(f"config file not found: {path}")
    return load_config(path)


def _scene(name: str, seed: int | None = None):
    try:
        return get_scene(name, seed)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None


# --- simulate ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    scene = _scene(args.scene, args.seed)
    out = io.ensure_dir(args.out)
    h, w = scene.shape
    for t, (_, sim) in enumerate(simulate(scene, args.frames)):
        io.write_pgm(out / io.frame_name(t), sim.frame)
        io.write_pbm(out / io.truth_mask_name(t), sim.truth_mask)
        io.write_raw(out / io.truth_flow_name(t), sim.truth_u, sim.truth_v)
    io.write_manifest(out, io.Manifest(scene.name, args.frames, w, h))
    print(f"{scene.name}: wrote {args.frames} frames ({w}x{h}) to {out}")
    return EXIT_OK


# --- detect -----------------------------------------------------------------


def cmd_detect(args) -> int:
    cfg = _config(args.config)
    kind = FlowEstimatorKind.parse(args.estimator)
    frames_dir = Path(args.frames)
    if not frames_dir.is_dir():
        raise UsageError(f"frame directory not found: {frames_dir}")
    manifest = io.read_manifest(frames_dir)
    out = io.ensure_dir(args.out or frames_dir / "detect")

    buffer = FrameBuffer(args.history)
    filt = None
    ages = None
    last_region = None
    for t in range(manifest.frames):
        frame = io.read_netpbm(frames_dir / io.frame_name(t))
        if frame.shape != (manifest.height, manifest.width):
            raise DimensionError(f"frame {t} is {frame.shape}, manifest says {manifest.height}x{manifest.width}")
        truth = None
        if kind is FlowEstimatorKind.GROUND_TRUTH:
            flow_path = frames_dir / io.truth_flow_name(t)
            if not flow_path.is_file():
                raise io.FormatError(f"ground-truth estimator needs {flow_path.name}")
            uv = io.read_raw(flow_path)
            if uv.shape[0] != 2:
                raise io.FormatError(f"{flow_path.name}: expected 2 channels, found {uv.shape[0]}")
            truth = (uv[0], uv[1])
        buffer.push(frame, truth)
        if not buffer.ready:
            continue
        flow = buffer.estimate(kind, cfg.flow_downscale)
        z = detect(flow, cfg.gamma_o)
        if filt is None:
            filt = FilterState.initial(z.shape, cfg)
            ages = np.zeros(z.shape, dtype=np.int64)
        filt = filter_step(filt, z)
        io.write_pbm(out / f"detect_{t:04d}.pbm", z)
        io.write_raw(out / f"flow_{t:04d}.raw", flow.u, flow.v)
        if args.dump_posterior:
            io.write_raw(out / f"posterior_{t:04d}.raw", filt.posterior)
        region = extract_region(filt.posterior, cfg.gamma_B, cfg.connectivity)
        if region is not None:
            ages = update_age(ages, region)
            last_region = region
        if args.dump_mask:
            io.write_pbm(out / f"mask_{t:04d}.pbm", region if region is not None else np.zeros(z.shape, bool))

    if filt is None:
        raise io.FormatError(f"need at least {args.history} frames, manifest lists {manifest.frames}")
    io.write_raw(out / "ages.raw", ages)
    if last_region is not None:
        io.write_pbm(out / "region.pbm", last_region)
    print(f"{manifest.scene}: {kind.value} detections for {manifest.frames} frames in {out}")
    return EXIT_OK


# --- plan -------------------------------------------------------------------


def cmd_plan(args) -> int:
    cfg = _config(args.config)
    for p in (args.mask, args.ages):
        if not Path(p).is_file():
            raise UsageError(f"file not found: {p}")
    mask = io.read_netpbm(args.mask)
    if mask.dtype != bool:
        raise io.FormatError(f"{args.mask}: mask must be a P4 bitmap")
    ages_raw = io.read_raw(args.ages)
    if ages_raw.shape[0] != 1:
        raise io.FormatError(f"{args.ages}: expected one channel")
    ages = AgeCountMap(np.round(ages_raw[0]).astype(np.int64)).counts
    if ages.shape != mask.shape:
        raise DimensionError(f"mask {mask.shape} and age map {ages.shape} differ")
    if not mask.any():
        raise io.FormatError(f"{args.mask}: mask is empty")
    traj = generate_trajectory(ages, mask, cfg.r, cfg.gamma_r, cfg.connectivity)
    io.write_trajectory(args.out, traj)
    overlay_path = Path(args.overlay) if args.overlay else Path(args.out).with_suffix(".ppm")
    io.write_ppm(overlay_path, io.overlay(mask, traj))
    gated = gate_and_emit(traj, cfg.gamma_T) is not None
    print(f"trajectory of {len(traj)} waypoints ({'passes' if gated else 'below'} gamma_T={cfg.gamma_T})")
    return EXIT_OK


# --- run --------------------------------------------------------------------

REPORT_HEADER = ("tick", "x", "y", "depth", "removed_cumulative")


def write_report(path, report: ExecutionReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_HEADER)
        for tick, x, y, z, removed, _ in report.trace:
            writer.writerow([tick, f"{x:.6f}", f"{y:.6f}", f"{z:.6f}", f"{removed:.6f}"])


def summary_line(scene: str, state: FluidState, report: ExecutionReport | None, reacted) -> str:
    ticks = report.ticks if report else 0
    return (
        f"scene={scene} removal_pct={removal_percent(state):.3f} emitted={state.total_emitted:.6f} "
        f"removed={state.total_removed:.6f} remaining={float(state.volume.sum()):.6f} "
        f"ticks={ticks} reacted_at_frame={'' if reacted is None else reacted}"
    )


def cmd_run(args) -> int:
    cfg = _config(args.config)
    scene = _scene(args.scene, args.seed)
    params = ControllerParams()
    if args.tick_budget is not None:
        if args.tick_budget < 1:
            raise UsageError("--tick-budget must be positive")
        params = replace(params, tick_budget=args.tick_budget)
    try:
        res = run_suction(scene, cfg, args.estimator, params, max_frames=args.max_frames)
    except TickBudgetExceeded as exc:
        write_report(args.report, exc.report)
        print(summary_line(scene.name, exc.state, exc.report, None) + " status=budget_exceeded")
        return EXIT_BUDGET
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_metrics_csv(res.records, fh)
    if res.report is None:
        write_report(args.report, ExecutionReport())
        print(summary_line(scene.name, res.state, None, None) + " status=no_trajectory")
        return EXIT_OK
    write_report(args.report, res.report)
    print(summary_line(scene.name, res.state, res.report, res.pipeline.reacted_at_frame) + " status=done")
    return EXIT_OK


# --- eval -------------------------------------------------------------------


def cmd_eval(args) -> int:
    cfg = _config(args.config)
    if args.scenes == "all":
        scenes = evaluation_scenes()
    else:
        scenes = [_scene(n.strip()) for n in args.scenes.split(",") if n.strip()]
        if not scenes:
            raise UsageError("--scenes is empty")
    records = []
    for scene in scenes:
        s = compare_baseline(scene, cfg, args.estimator, n_frames=args.frames)
        records.extend(s.records)
        print(
            f"{s.scene:14s} filtered median {s.filtered.median:.3f} "
            f"[{s.filtered.q1:.3f}, {s.filtered.q3:.3f}]  raw median {s.raw.median:.3f} "
            f"[{s.raw.q1:.3f}, {s.raw.q3:.3f}]  reacted {s.reacted_at_frame}"
        )
    with open(args.csv, "w", newline="") as fh:
        write_metrics_csv(records, fh)
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="flowsuction", description="Flow-based liquid detection and suction planning.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    estimators = [k.value for k in FlowEstimatorKind]

    s = sub.add_parser("simulate", help="render a builtin scene to frames")
    s.add_argument("scene", help=f"one of: {', '.join(scene_names())}")
    s.add_argument("--out", required=True)
    s.add_argument("--frames", type=int, default=61)
    s.add_argument("--seed", type=int, default=None, help="texture seed")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("detect", help="detect and filter liquid in a frame directory")
    d.add_argument("--frames", required=True, help="directory written by 'simulate'")
    d.add_argument("--config")
    d.add_argument("--estimator", choices=estimators, default="classical")
    d.add_argument("--dump-posterior", action="store_true")
    d.add_argument("--dump-mask", action="store_true")
    d.add_argument("--out", help="output directory (default FRAMES/detect)")
    d.add_argument("--history", type=int, default=3)
    d.set_defaults(func=cmd_detect)

    pl = sub.add_parser("plan", help="plan a suction path over a mask")
    pl.add_argument("--mask", required=True, help="P4 region mask")
    pl.add_argument("--ages", required=True, help="raw age count map")
    pl.add_argument("--config")
    pl.add_argument("--out", required=True, help="trajectory text file")
    pl.add_argument("--overlay", help="P6 overlay path (default OUT with .ppm)")
    pl.set_defaults(func=cmd_plan)

    r = sub.add_parser("run", help="detect, plan and execute suction in a builtin scene")
    r.add_argument("scene")
    r.add_argument("--config")
    r.add_argument("--report", required=True)
    r.add_argument("--csv", help="also write per-frame metrics")
    r.add_argument("--estimator", choices=estimators, default="gt")
    r.add_argument("--max-frames", type=int, default=200)
    r.add_argument("--tick-budget", type=int)
    r.add_argument("--seed", type=int, default=None)
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("eval", help="filtered vs raw IoU on builtin scenes")
    e.add_argument("--scenes", default="all", help="'all' or comma-separated names")
    e.add_argument("--config")
    e.add_argument("--csv", required=True)
    e.add_argument("--estimator", choices=estimators, default="gt")
    e.add_argument("--frames", type=int, default=61)
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"flowsuction: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (io.FormatError, ConfigError, DimensionError, PlanningError) as exc:
        print(f"flowsuction: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
