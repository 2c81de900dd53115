"""Pipeline hyperparameters and their plain-text key=value format."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """A configuration value breaks one of the pipeline invariants."""


@dataclass(frozen=True)
class PipelineConfig:
    gamma_o: float = 0.45  # flow magnitude threshold, pixels/frame at flow resolution
    gamma_B: int = 20  # minimum region size, pixels
    gamma_r: int = 4  # max clearance erosions
    gamma_T: int = 30  # minimum trajectory length, waypoints
    r: float = 0.2  # clearance reward per erosion
    p_det_tp: float = 0.95
    p_det_fp: float = 0.2
    p_prior: float = 0.1
    p_bb: float = 0.98
    p_nb_k: float = 0.85
    p_nb_nk: float = 0.01
    connectivity: int = 4
    flow_downscale: int = 4

    def with_(self, **changes) -> "PipelineConfig":
        return replace(self, **changes)


def default_config() -> PipelineConfig:
    return PipelineConfig()


_PROBS = ("p_det_tp", "p_det_fp", "p_prior", "p_bb", "p_nb_k", "p_nb_nk")


def validate_config(cfg: PipelineConfig) -> PipelineConfig:
    """Return ``cfg`` unchanged or raise ConfigError naming the first broken invariant."""
    for name in _PROBS:
        value = getattr(cfg, name)
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"probability out of range: {name}={value}")
    if not cfg.p_det_tp > cfg.p_det_fp:
        raise ConfigError("detector not informative: p_det_tp must exceed p_det_fp")
    if not cfg.p_bb >= cfg.p_nb_k >= cfg.p_nb_nk:
        raise ConfigError("transition ordering violated: need p_bb >= p_nb_k >= p_nb_nk")
    if cfg.gamma_o < 0:
        raise ConfigError("gamma_o must be non-negative")
    if cfg.gamma_B < 0 or cfg.gamma_T < 0 or cfg.gamma_r < 0:
        raise ConfigError("gamma_B, gamma_r and gamma_T must be non-negative")
    if cfg.r < 0:
        raise ConfigError("clearance reward r must be non-negative")
    if not cfg.r * cfg.gamma_r < 1.0:
        raise ConfigError(
            f"reward exceeds unit edge cost: r*gamma_r = {cfg.r * cfg.gamma_r:g} >= 1"
        )
    if cfg.connectivity not in (4, 8):
        raise ConfigError("connectivity must be 4 or 8")
    if cfg.flow_downscale < 1:
        raise ConfigError("flow_downscale must be a positive integer")
    return cfg


def dump_config(cfg: PipelineConfig) -> str:
    return "".join(f"{k}={v}\n" for k, v in asdict(cfg).items())


def parse_config(text: str) -> PipelineConfig:
    """Parse key=value lines; blank lines and ``#`` comments are ignored.

    Keys not present fall back to the defaults.
    """
    types = {f.name: f.type for f in fields(PipelineConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = int(value) if types[key] in (int, "int") else float(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    return validate_config(PipelineConfig(**values))


def load_config(path: str | Path) -> PipelineConfig:
    return parse_config(Path(path).read_text())


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(dump_config(cfg))
