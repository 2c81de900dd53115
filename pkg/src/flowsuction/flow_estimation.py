"""Optical flow estimation and magnitude-threshold detection.

Two estimators share one contract (flow in pixels/frame at flow resolution):

* ``ground_truth`` block-averages the simulator's fluid velocity;
* ``classical`` runs a two-level pyramidal least-squares (Lucas-Kanade)
  estimator with a 5x5 window on frames box-downsampled to flow resolution.

Both average over the ``l - 1`` consecutive pairs in the frame buffer.
"""

from __future__ import annotations

from collections import deque
from enum import Enum
from typing import Sequence

import numpy as np
from scipy import ndimage

from .types import DimensionError, FlowField

DEFAULT_FRAMES = 3
WINDOW = 5
MIN_EIGEN = 1e-4


class FlowEstimatorKind(str, Enum):
    GROUND_TRUTH = "gt"
    CLASSICAL = "classical"

    @classmethod
    def parse(cls, value) -> "FlowEstimatorKind":
        if isinstance(value, cls):
            return value
        aliases = {"gt": cls.GROUND_TRUTH, "ground_truth": cls.GROUND_TRUTH, "classical": cls.CLASSICAL}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown estimator {value!r}") from None


def block_mean(a: np.ndarray, factor: int) -> np.ndarray:
    """Average non-overlapping ``factor x factor`` blocks; trailing rows/cols are dropped."""
    if factor == 1:
        return np.asarray(a, dtype=np.float64).copy()
    h, w = a.shape
    h2, w2 = h // factor, w // factor
    a = np.asarray(a, dtype=np.float64)[: h2 * factor, : w2 * factor]
    return a.reshape(h2, factor, w2, factor).mean(axis=(1, 3))


def upsample_nearest(a: np.ndarray, factor: int, shape: tuple[int, int] | None = None) -> np.ndarray:
    up = np.repeat(np.repeat(a, factor, axis=0), factor, axis=1)
    if shape is None:
        return up
    out = np.zeros(shape, dtype=a.dtype)
    h = min(shape[0], up.shape[0])
    w = min(shape[1], up.shape[1])
    out[:h, :w] = up[:h, :w]
    return out


def truth_to_flow(u: np.ndarray, v: np.ndarray, downscale: int) -> FlowField:
    """Full-resolution velocity -> flow-resolution velocity (block mean, rescaled)."""
    return FlowField(block_mean(u, downscale) / downscale, block_mean(v, downscale) / downscale)


# --- classical estimator --------------------------------------------------


def _gradients(a, b):
    avg = 0.5 * (a + b)
    ix = ndimage.sobel(avg, axis=1, mode="nearest") / 8.0
    iy = ndimage.sobel(avg, axis=0, mode="nearest") / 8.0
    it = b - a
    return ix, iy, it


def _warp(img, u, v):
    h, w = img.shape
    rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
    return ndimage.map_coordinates(img, [rows + v, cols + u], order=1, mode="nearest")


def lucas_kanade_step(a: np.ndarray, b: np.ndarray, window: int = WINDOW):
    """Windowed least-squares solve of Ix*u + Iy*v = -It at every pixel."""
    ix, iy, it = _gradients(a, b)
    box = lambda x: ndimage.uniform_filter(x, window, mode="nearest")  # noqa: E731
    sxx, syy, sxy = box(ix * ix), box(iy * iy), box(ix * iy)
    sxt, syt = box(ix * it), box(iy * it)
    det = sxx * syy - sxy * sxy
    trace = sxx + syy
    min_eig = 0.5 * (trace - np.sqrt(np.maximum(trace * trace - 4 * det, 0.0)))
    ok = min_eig > MIN_EIGEN
    safe = np.where(ok, det, 1.0)
    u = np.where(ok, (-syy * sxt + sxy * syt) / safe, 0.0)
    v = np.where(ok, (sxy * sxt - sxx * syt) / safe, 0.0)
    return u, v, ok


def _pyr_down(img):
    smooth = ndimage.gaussian_filter(img, 1.0, mode="nearest")
    return smooth[::2, ::2]


def _residual(a, b, u, v, window=WINDOW):
    return ndimage.uniform_filter((_warp(b, u, v) - a) ** 2, window, mode="nearest")


def pyramid_lk(a: np.ndarray, b: np.ndarray, levels: int = 2, iterations: int = 3):
    """Coarse-to-fine Lucas-Kanade flow from ``a`` to ``b``.

    Fine texture aliases at the coarse level and can drag the estimate the
    wrong way, so each pixel keeps whichever of the pyramid and the
    single-level solution leaves the smaller windowed warp residual.
    """
    coarse = _pyramid_lk(a, b, levels, iterations)
    if levels == 1:
        return coarse
    fine = _pyramid_lk(a, b, 1, iterations)
    pick = _residual(a, b, *fine) < _residual(a, b, *coarse)
    return np.where(pick, fine[0], coarse[0]), np.where(pick, fine[1], coarse[1])


def _pyramid_lk(a, b, levels, iterations):
    pyr = [(a, b)]
    for _ in range(levels - 1):
        pa, pb = pyr[-1]
        pyr.append((_pyr_down(pa), _pyr_down(pb)))
    u = v = None
    for la, lb in reversed(pyr):
        if u is None:
            u = np.zeros(la.shape)
            v = np.zeros(la.shape)
        else:
            zoom = (la.shape[0] / u.shape[0], la.shape[1] / u.shape[1])
            u = 2.0 * ndimage.zoom(u, zoom, order=1, mode="nearest")
            v = 2.0 * ndimage.zoom(v, zoom, order=1, mode="nearest")
        for _ in range(iterations):
            du, dv, _ = lucas_kanade_step(la, _warp(lb, u, v))
            u = u + du
            v = v + dv
    return u, v


def textured(img: np.ndarray, window: int = WINDOW) -> np.ndarray:
    """Pixels whose structure tensor is well conditioned (both eigenvalues large)."""
    _, _, ok = lucas_kanade_step(img, img, window)
    return ok


# --- public API -------------------------------------------------------------


def estimate_flow(
    frames: Sequence[np.ndarray],
    kind: FlowEstimatorKind | str = FlowEstimatorKind.CLASSICAL,
    downscale: int = 4,
    truth: Sequence[tuple[np.ndarray, np.ndarray]] | None = None,
) -> FlowField:
    """Flow at ``input dims // downscale`` averaged over consecutive frame pairs.

    ``truth`` holds the simulator velocity ``(u, v)`` that produced each frame;
    the ground-truth estimator averages the entries for frames ``1..l-1``
    (the transport between each consecutive pair).
    """
    kind = FlowEstimatorKind.parse(kind)
    if len(frames) < 2:
        raise ValueError(f"need at least 2 frames, got {len(frames)}")
    shape = np.shape(frames[0])
    for f in frames[1:]:
        if np.shape(f) != shape:
            raise DimensionError(f"frame shapes differ: {shape} vs {np.shape(f)}")
    pairs = len(frames) - 1

    if kind is FlowEstimatorKind.GROUND_TRUTH:
        if truth is None or len(truth) != len(frames):
            raise ValueError("ground-truth flow needs one truth field per frame")
        u = sum(np.asarray(tu, dtype=np.float64) for tu, _ in truth[1:]) / pairs
        v = sum(np.asarray(tv, dtype=np.float64) for _, tv in truth[1:]) / pairs
        if u.shape != shape:
            raise DimensionError("truth flow does not match the frames")
        return truth_to_flow(u, v, downscale)

    small = [block_mean(np.asarray(f, dtype=np.float64), downscale) for f in frames]
    u = np.zeros(small[0].shape)
    v = np.zeros(small[0].shape)
    for a, b in zip(small, small[1:]):
        du, dv = pyramid_lk(a, b)
        u += du
        v += dv
    return FlowField(u / pairs, v / pairs)


def detect(flow: FlowField, gamma_o: float) -> np.ndarray:
    """Detected blood where the flow magnitude strictly exceeds ``gamma_o``."""
    if gamma_o < 0:
        raise ValueError("gamma_o must be non-negative")
    return np.hypot(flow.u, flow.v) > gamma_o


class FrameBuffer:
    """Ring buffer of the last ``length`` frames (and their truth flow, if any)."""

    def __init__(self, length: int = DEFAULT_FRAMES):
        if length < 2:
            raise ValueError("buffer length must be at least 2")
        self.length = length
        self.frames: deque = deque(maxlen=length)
        self.truth: deque = deque(maxlen=length)

    def push(self, frame: np.ndarray, truth: tuple[np.ndarray, np.ndarray] | None = None) -> None:
        if self.frames and np.shape(frame) != np.shape(self.frames[0]):
            raise DimensionError("frame shape changed mid-stream")
        self.frames.append(np.asarray(frame))
        self.truth.append(truth)

    @property
    def ready(self) -> bool:
        return len(self.frames) == self.length

    def estimate(self, kind: FlowEstimatorKind | str, downscale: int) -> FlowField:
        if not self.ready:
            raise ValueError(f"buffer holds {len(self.frames)} of {self.length} frames")
        kind = FlowEstimatorKind.parse(kind)
        truth = list(self.truth) if kind is FlowEstimatorKind.GROUND_TRUTH else None
        if truth is not None and any(t is None for t in truth):
            raise ValueError("ground-truth estimator requires simulator flow for every frame")
        return estimate_flow(list(self.frames), kind, downscale, truth)
