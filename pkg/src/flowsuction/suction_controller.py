"""Step-clamped Cartesian controller driving a suction tip through the cavity.

The tool is a free point ``(x, y, z)`` in grid units with ``z`` along the
floor height axis (gravity points to ``-z``).  Each control tick moves at most
``gamma_s`` towards the current goal and sucks fluid under the tip; every
``tick_rate`` ticks the fluid simulator advances one frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fluid_sim
from .fluid_sim import CavityScene, FluidState
from .trajectory_gen import decimate
from .types import PixelTrajectory

TRAVELING = "traveling"
PROBING = "probing"


@dataclass(frozen=True)
class ControllerParams:
    gamma_s: float = 0.75
    arrive_tol: float = 2.0
    probe_depth: float = 5.0
    tick_rate: int = 4
    # capture radius (grid units) and volume removed per tick; calibration constants
    suction_radius: float = 20.0
    suction_capacity: float = 60.0
    decimation: int = 3
    tick_budget: int = 10_000

    def __post_init__(self):
        if self.gamma_s <= 0 or self.arrive_tol <= 0:
            raise ValueError("gamma_s and arrive_tol must be positive")
        if self.tick_rate < 1:
            raise ValueError("tick_rate must be at least 1")


@dataclass(frozen=True)
class ToolState:
    position: tuple[float, float, float]
    phase: str = TRAVELING

    def __post_init__(self):
        pos = tuple(float(p) for p in self.position)
        if len(pos) != 3 or not all(math.isfinite(p) for p in pos):
            raise ValueError(f"tool position must be a finite 3-vector, got {self.position}")
        object.__setattr__(self, "position", pos)


class TickBudgetExceeded(RuntimeError):
    def __init__(self, report: "ExecutionReport", state: FluidState):
        super().__init__(f"tick budget exhausted after {report.ticks} ticks")
        self.report = report
        self.state = state


@dataclass
class ExecutionReport:
    ticks: int = 0
    frames: int = 0
    arrival_ticks: list[int] = field(default_factory=list)
    arrival_distances: list[float] = field(default_factory=list)
    volume_removed: float = 0.0
    # (tick, x, y, z, removed_cumulative, phase); row 0 is the start pose
    trace: list[tuple[int, float, float, float, float, str]] = field(default_factory=list)
    aborted: bool = False


def step_toward(tool: ToolState, goal, params: ControllerParams) -> ToolState:
    """Move the whole way if within ``gamma_s`` of ``goal``, else exactly ``gamma_s`` towards it."""
    pos = np.asarray(tool.position, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    if not np.all(np.isfinite(goal)):
        raise ValueError("goal must be finite")
    d = goal - pos
    dist = float(np.linalg.norm(d))
    if dist > params.gamma_s:
        new = pos + params.gamma_s * d / dist
    else:
        new = goal  # pos + d, without the rounding
    return ToolState(tuple(new), tool.phase)


def pixel_to_world(p: tuple[int, int], scene: CavityScene) -> tuple[float, float, float]:
    """Pixel centre with the (scaled) floor height as ``z``.

    The simulator's floor stands in for stereo depth estimation.
    """
    c, r = p
    h, w = scene.shape
    if not (0 <= c < w and 0 <= r < h):
        raise IndexError(f"pixel {p} outside {w}x{h} scene")
    return (c + 0.5, r + 0.5, float(scene.floor_height[r, c]) * scene.height_scale)


def scale_waypoint(p: tuple[int, int], factor: int) -> tuple[int, int]:
    """Flow-resolution pixel -> centre pixel of its block at frame resolution."""
    c, r = p
    return (c * factor + factor // 2, r * factor + factor // 2)


def home_position(scene: CavityScene) -> tuple[float, float, float]:
    h, w = scene.shape
    return pixel_to_world((w // 2, h // 2), scene)


def execute(
    traj: PixelTrajectory,
    scene: CavityScene,
    state: FluidState,
    params: ControllerParams = ControllerParams(),
    *,
    tool: ToolState | None = None,
    scale: int = 1,
    t0: int = 0,
) -> tuple[FluidState, ExecutionReport]:
    """Follow ``traj`` (pixels at ``1/scale`` of scene resolution) while sucking.

    Each decimated waypoint is approached until within ``arrive_tol`` and
    then probed once: down by ``probe_depth`` and back up.
    """
    if len(traj) == 0:
        raise ValueError("cannot execute an empty trajectory")
    tool = tool or ToolState(home_position(scene))
    h, w = scene.shape
    report = ExecutionReport()
    start_removed = state.total_removed
    t = t0
    report.trace.append((0, *tool.position, 0.0, tool.phase))

    def tick(tool: ToolState) -> None:
        nonlocal state, t
        x, y, _ = tool.position
        at = (min(max(int(math.floor(x)), 0), w - 1), min(max(int(math.floor(y)), 0), h - 1))
        state = fluid_sim.apply_suction(state, at, params.suction_radius, params.suction_capacity)
        report.ticks += 1
        if report.ticks % params.tick_rate == 0:
            state, _ = fluid_sim.step(scene, state, t)
            t += 1
            report.frames += 1
        report.volume_removed = state.total_removed - start_removed
        report.trace.append((report.ticks, *tool.position, report.volume_removed, tool.phase))
        if report.ticks >= params.tick_budget:
            report.aborted = True
            raise TickBudgetExceeded(report, state)

    for wp in decimate(traj, params.decimation):
        goal = np.asarray(pixel_to_world(scale_waypoint(wp, scale), scene))
        tool = ToolState(tool.position, TRAVELING)
        while np.linalg.norm(goal - np.asarray(tool.position)) >= params.arrive_tol:
            tool = step_toward(tool, goal, params)
            tick(tool)
        report.arrival_ticks.append(report.ticks)
        report.arrival_distances.append(float(np.linalg.norm(goal - np.asarray(tool.position))))

        top = np.asarray(tool.position)
        bottom = top - np.array([0.0, 0.0, params.probe_depth])
        tool = ToolState(tool.position, PROBING)
        for target in (bottom, top):
            while not np.array_equal(np.asarray(tool.position), target):
                tool = step_toward(tool, target, params)
                tick(tool)

    return state, report
