"""Optical-flow liquid detection, per-pixel temporal filtering and suction planning."""

from .config import ConfigError, PipelineConfig, default_config, load_config, parse_config, validate_config
from .evaluation import MetricsRecord, compare_baseline, iou, run_pipeline, run_suction
from .flow_estimation import FlowEstimatorKind, detect, estimate_flow
from .fluid_sim import CavityScene, FluidState, builtin_scenes, get_scene, simulate, step
from .region_extraction import extract_region
from .suction_controller import ControllerParams, ExecutionReport, TickBudgetExceeded, execute
from .temporal_filter import FilterState, filter_step
from .trajectory_gen import PlanningError, generate_trajectory, plan
from .types import BloodMask, DimensionError, FlowField, Frame, PixelTrajectory, PosteriorMap

__version__ = "0.1.0"
