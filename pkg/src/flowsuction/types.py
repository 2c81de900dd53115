"""Shared containers and grid geometry.

Images are numpy arrays of shape ``(height, width)`` in row-major order with
the origin at the top-left corner.  Pixel coordinates are ``(col, row)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MIN_SIDE = 8


class DimensionError(ValueError):
    """Raised when two grids that must agree in shape do not."""


@dataclass(frozen=True)
class GridDims:
    width: int
    height: int

    def __post_init__(self):
        if int(self.width) < MIN_SIDE or int(self.height) < MIN_SIDE:
            raise DimensionError(
                f"grid must be at least {MIN_SIDE}x{MIN_SIDE}, got {self.width}x{self.height}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @classmethod
    def of(cls, array: np.ndarray) -> "GridDims":
        h, w = array.shape[:2]
        return cls(int(w), int(h))

    def scaled_down(self, factor: int) -> "GridDims":
        return GridDims(self.width // factor, self.height // factor)


def check_same_shape(*arrays: np.ndarray) -> tuple[int, int]:
    """Return the common 2-D shape of ``arrays`` or raise DimensionError."""
    shape = arrays[0].shape[:2]
    for a in arrays[1:]:
        if a.shape[:2] != shape:
            raise DimensionError(f"shape mismatch: {shape} vs {a.shape[:2]}")
    return shape


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Frame:
    """Single-channel intensity image with values in [0, 1]."""

    pixels: np.ndarray
    timestamp: int = 0

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise DimensionError("frame pixels must be 2-D")
        if not np.all((px >= 0.0) & (px <= 1.0)):
            raise ValueError("frame intensities must lie in [0, 1]")
        if self.timestamp < 0:
            raise ValueError("timestamp must be non-negative")
        object.__setattr__(self, "pixels", _frozen(px.copy()))

    @property
    def dims(self) -> GridDims:
        return GridDims.of(self.pixels)

    def __eq__(self, other):
        return (
            isinstance(other, Frame)
            and self.timestamp == other.timestamp
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class FlowField:
    """Per-pixel apparent motion in pixels/frame at flow resolution."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        check_same_shape(u, v)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("flow contains non-finite values")
        object.__setattr__(self, "u", _frozen(u.copy()))
        object.__setattr__(self, "v", _frozen(v.copy()))

    @property
    def dims(self) -> GridDims:
        return GridDims.of(self.u)

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    @classmethod
    def zeros(cls, shape: tuple[int, int]) -> "FlowField":
        return cls(np.zeros(shape), np.zeros(shape))

    def __eq__(self, other):
        return (
            isinstance(other, FlowField)
            and np.array_equal(self.u, other.u)
            and np.array_equal(self.v, other.v)
        )


@dataclass(frozen=True, eq=False)
class PosteriorMap:
    prob: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.prob, dtype=np.float64)
        if not np.all((p >= 0.0) & (p <= 1.0)):
            raise ValueError("posterior values must lie in [0, 1]")
        object.__setattr__(self, "prob", _frozen(p.copy()))

    @property
    def dims(self) -> GridDims:
        return GridDims.of(self.prob)

    def __eq__(self, other):
        return isinstance(other, PosteriorMap) and np.array_equal(self.prob, other.prob)


@dataclass(frozen=True, eq=False)
class BloodMask:
    bits: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "bits", _frozen(np.asarray(self.bits, dtype=bool).copy()))

    @property
    def dims(self) -> GridDims:
        return GridDims.of(self.bits)

    def __eq__(self, other):
        return isinstance(other, BloodMask) and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class AgeCountMap:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.size and (c.min() < 0 or not np.array_equal(c, np.round(c))):
            raise ValueError("age counts must be non-negative integers")
        object.__setattr__(self, "counts", _frozen(c.astype(np.int64)))

    @property
    def dims(self) -> GridDims:
        return GridDims.of(self.counts)

    def __eq__(self, other):
        return isinstance(other, AgeCountMap) and np.array_equal(self.counts, other.counts)


@dataclass(frozen=True)
class PixelTrajectory:
    """Ordered ``(col, row)`` waypoints from start (newest) to end (oldest)."""

    waypoints: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(
            self, "waypoints", tuple((int(c), int(r)) for c, r in self.waypoints)
        )

    def __len__(self) -> int:
        return len(self.waypoints)

    def __iter__(self):
        return iter(self.waypoints)
