"""End-to-end detection/suction loop, metrics and the raw-threshold baseline."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable

import numpy as np

from . import fluid_sim
from .config import PipelineConfig, validate_config
from .flow_estimation import FlowEstimatorKind, FrameBuffer, detect, upsample_nearest
from .fluid_sim import CavityScene, FluidState
from .region_extraction import denoise, largest_component, threshold_mask
from .suction_controller import ControllerParams, ExecutionReport, execute
from .temporal_filter import FilterState, predict, update
from .trajectory_gen import clearance_reward, gate_and_emit, plan, select_endpoints, update_age
from .types import PixelTrajectory, check_same_shape

CSV_HEADER = (
    "scene",
    "frame",
    "iou_filtered",
    "iou_raw",
    "reacted_at_frame",
    "removal_pct",
    "trajectory_len",
)
SCENE_FRAMES = 61
WARMUP_FRAMES = 10


def iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union; two empty masks count as perfect agreement."""
    check_same_shape(a, b)
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union


@dataclass
class MetricsRecord:
    scene: str
    frame: int
    iou_filtered: float
    iou_raw: float
    reacted_at_frame: int | None = None
    removal_pct: float | None = None
    trajectory_len: int | None = None

    def row(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                out.append("")
            elif isinstance(v, float):
                out.append(f"{v:.6f}")
            else:
                out.append(str(v))
        return out


def write_metrics_csv(records: Iterable[MetricsRecord], stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in records:
        writer.writerow(rec.row())


def metrics_csv(records: Iterable[MetricsRecord]) -> str:
    buf = io.StringIO()
    write_metrics_csv(records, buf)
    return buf.getvalue()


@dataclass
class PipelineRun:
    scene: str
    records: list[MetricsRecord]
    trajectory: PixelTrajectory | None = None
    gate_frame: int | None = None
    first_visible: int | None = None
    reacted_at_frame: int | None = None
    state: FluidState | None = None  # simulator state after the last processed frame
    next_frame: int = 0
    counts: np.ndarray | None = None
    region: np.ndarray | None = None


def run_pipeline(
    scene: CavityScene,
    cfg: PipelineConfig,
    estimator: FlowEstimatorKind | str = FlowEstimatorKind.GROUND_TRUTH,
    *,
    n_frames: int = SCENE_FRAMES,
    history: int = 3,
    stop_at_gate: bool = True,
    on_stage: Callable[[str, int], None] | None = None,
    on_frame: Callable[[int, dict], None] | None = None,
) -> PipelineRun:
    """Detect, filter and plan frame by frame until a long enough trajectory appears.

    With ``stop_at_gate=False`` the detection part keeps running for all
    ``n_frames`` (used for the IoU comparison); planning stops once the gate
    has passed.  ``reacted_at_frame`` is the number of frames between the
    first frame with visible fluid and the frame whose trajectory passed the
    length gate.
    """
    validate_config(cfg)
    estimator = FlowEstimatorKind.parse(estimator)
    ds = cfg.flow_downscale
    stage = on_stage or (lambda name, t: None)

    buffer = FrameBuffer(history)
    state = FluidState.empty(scene.shape)
    run = PipelineRun(scene.name, [])
    filt: FilterState | None = None

    for t in range(n_frames):
        state, out = fluid_sim.step(scene, state, t)
        run.state, run.next_frame = state, t + 1
        if run.first_visible is None and out.truth_mask.any():
            run.first_visible = t
        buffer.push(out.frame, (out.truth_u, out.truth_v))

        if not buffer.ready:
            empty = np.zeros(scene.shape, dtype=bool)
            run.records.append(
                MetricsRecord(scene.name, t, iou(empty, out.truth_mask), iou(empty, out.truth_mask))
            )
            continue

        flow = buffer.estimate(estimator, ds)
        stage("detect", t)
        z = detect(flow, cfg.gamma_o)
        if filt is None:
            filt = FilterState.initial(z.shape, cfg)
            run.counts = np.zeros(z.shape, dtype=np.int64)
        stage("predict", t)
        predicted = predict(filt.posterior, cfg)
        stage("update", t)
        filt = FilterState(update(predicted, z, cfg), cfg, filt.t + 1)

        stage("extract", t)
        closed = denoise(threshold_mask(filt.posterior))
        largest = largest_component(closed, 0, cfg.connectivity)
        if largest is None:
            largest = np.zeros(z.shape, dtype=bool)
        rec = MetricsRecord(
            scene.name,
            t,
            iou(upsample_nearest(largest, ds, scene.shape), out.truth_mask),
            iou(upsample_nearest(z, ds, scene.shape), out.truth_mask),
        )
        run.records.append(rec)
        if on_frame is not None:
            on_frame(t, {"flow": flow, "z": z, "posterior": filt.posterior, "region": largest, "out": out})

        if run.gate_frame is not None:
            continue
        stage("gate_region", t)
        if np.count_nonzero(largest) <= cfg.gamma_B:
            continue
        region = largest

        stage("age", t)
        run.counts = update_age(run.counts, region)
        stage("endpoints", t)
        start, end = select_endpoints(run.counts, region)
        stage("plan", t)
        reward = clearance_reward(region, cfg.r, cfg.gamma_r)
        traj = plan(start, end, region, reward, cfg.connectivity)
        stage("gate_trajectory", t)
        if gate_and_emit(traj, cfg.gamma_T) is None:
            continue

        run.trajectory, run.gate_frame, run.region = traj, t, region
        if run.first_visible is not None:
            run.reacted_at_frame = t - run.first_visible
        rec.reacted_at_frame = run.reacted_at_frame
        rec.trajectory_len = len(traj)
        if stop_at_gate:
            break
    return run


@dataclass
class SuctionRun:
    pipeline: PipelineRun
    report: ExecutionReport | None
    state: FluidState
    removal_pct: float | None

    @property
    def records(self) -> list[MetricsRecord]:
        return self.pipeline.records


def removal_percent(state: FluidState) -> float:
    if state.total_emitted <= 0:
        return 0.0
    return 100.0 * state.total_removed / state.total_emitted


def run_suction(
    scene: CavityScene,
    cfg: PipelineConfig,
    estimator: FlowEstimatorKind | str = FlowEstimatorKind.GROUND_TRUTH,
    params: ControllerParams = ControllerParams(),
    *,
    max_frames: int = 200,
    on_stage: Callable[[str, int], None] | None = None,
) -> SuctionRun:
    """Detection loop followed by execution of the first trajectory that passes the gate.

    Raises TickBudgetExceeded (carrying the partial report) if the controller
    runs out of ticks.
    """
    run = run_pipeline(scene, cfg, estimator, n_frames=max_frames, on_stage=on_stage)
    if run.trajectory is None:
        return SuctionRun(run, None, run.state, None)
    if on_stage:
        on_stage("execute", run.gate_frame)
    state, report = execute(
        run.trajectory, scene, run.state, params, scale=cfg.flow_downscale, t0=run.next_frame
    )
    pct = removal_percent(state)
    last = run.records[-1]
    last.removal_pct = pct
    return SuctionRun(run, report, state, pct)


@dataclass
class ArmSummary:
    median: float
    q1: float
    q3: float

    @classmethod
    def of(cls, values) -> "ArmSummary":
        if len(values) == 0:
            return cls(float("nan"), float("nan"), float("nan"))
        q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
        return cls(float(med), float(q1), float(q3))


@dataclass
class BaselineSummary:
    scene: str
    filtered: ArmSummary
    raw: ArmSummary
    records: list[MetricsRecord] = field(repr=False)
    reacted_at_frame: int | None = None


def compare_baseline(
    scene: CavityScene,
    cfg: PipelineConfig,
    estimator: FlowEstimatorKind | str = FlowEstimatorKind.GROUND_TRUTH,
    *,
    n_frames: int = SCENE_FRAMES,
    warmup: int = WARMUP_FRAMES,
) -> BaselineSummary:
    """Per-frame IoU of the filtered region vs raw thresholded detections."""
    run = run_pipeline(scene, cfg, estimator, n_frames=n_frames, stop_at_gate=False)
    kept = [r for r in run.records if r.frame >= warmup]
    return BaselineSummary(
        scene.name,
        ArmSummary.of([r.iou_filtered for r in kept]),
        ArmSummary.of([r.iou_raw for r in kept]),
        run.records,
        run.reacted_at_frame,
    )
