"""Deterministic heightfield fluid simulator for a 2-D cavity.

Fluid sits on a floor heightfield.  Every sub-step each wet cell hands part of
its volume to 4-neighbours whose surface (floor + fluid) is lower, in
proportion to the surface drop, never more than it holds.  The simulator
renders a grey frame in which fluid darkens the background texture, a truth
mask of visibly wet pixels and a truth flow field of fluid velocity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .types import DimensionError

RENDER_THRESHOLD = 0.05
TRANSPORT_CAP = 0.25
DARKENING = 0.6


@dataclass(frozen=True)
class Source:
    pixel: tuple[int, int]  # (col, row)
    rate: float  # volume per frame
    start_frame: int = 0
    end_frame: int | None = None  # exclusive; None keeps emitting

    def active(self, t: int) -> bool:
        return t >= self.start_frame and (self.end_frame is None or t < self.end_frame)


@dataclass(frozen=True, eq=False)
class CavityScene:
    name: str
    floor_height: np.ndarray
    texture: np.ndarray
    sources: tuple[Source, ...]
    transfer_rate: float = 0.2  # fraction of the surface drop moved per sub-step
    substeps: int = 3
    stain: np.ndarray | None = None  # static dark patch, for evaluation only
    height_scale: float = 1.0  # grid units per floor-height unit, for the tool's z axis

    def __post_init__(self):
        floor = np.asarray(self.floor_height, dtype=np.float64)
        tex = np.asarray(self.texture, dtype=np.float64)
        if floor.shape != tex.shape:
            raise DimensionError("floor and texture differ in shape")
        if not np.all(np.isfinite(floor)):
            raise ValueError("floor height must be finite")
        if not np.all((tex >= 0) & (tex <= 1)):
            raise ValueError("texture must lie in [0, 1]")
        if not 0 < self.transfer_rate <= TRANSPORT_CAP:
            raise ValueError(f"transfer_rate must be in (0, {TRANSPORT_CAP}]")
        h, w = floor.shape
        for s in self.sources:
            c, r = s.pixel
            if not (0 <= c < w and 0 <= r < h):
                raise ValueError(f"source {s.pixel} outside the grid")
        object.__setattr__(self, "floor_height", floor)
        object.__setattr__(self, "texture", tex)
        object.__setattr__(self, "sources", tuple(self.sources))

    @property
    def shape(self) -> tuple[int, int]:
        return self.floor_height.shape

    def with_sources(self, sources, name: str | None = None) -> "CavityScene":
        return replace(self, sources=tuple(sources), name=name or self.name)


@dataclass(frozen=True, eq=False)
class FluidState:
    volume: np.ndarray
    total_emitted: float = 0.0
    total_removed: float = 0.0

    @classmethod
    def empty(cls, shape: tuple[int, int]) -> "FluidState":
        return cls(np.zeros(shape))

    def balance_error(self) -> float:
        return abs(self.total_emitted - self.total_removed - float(self.volume.sum()))


@dataclass(frozen=True, eq=False)
class SimOutputs:
    frame: np.ndarray
    truth_mask: np.ndarray
    truth_u: np.ndarray
    truth_v: np.ndarray
    t: int


def _transport(floor: np.ndarray, vol: np.ndarray, rate: float):
    """One explicit transport sub-step.

    Returns the new volumes and the net face fluxes: ``fx[r, c]`` is the
    volume moved from ``(r, c)`` to ``(r, c+1)`` (negative means leftwards),
    ``fy[r, c]`` from ``(r, c)`` to ``(r+1, c)``.
    """
    surf = floor + vol
    dx = surf[:, :-1] - surf[:, 1:]  # >0: left cell is higher
    dy = surf[:-1, :] - surf[1:, :]
    right = np.zeros_like(vol)
    left = np.zeros_like(vol)
    down = np.zeros_like(vol)
    up = np.zeros_like(vol)
    right[:, :-1] = rate * np.maximum(dx, 0.0)
    left[:, 1:] = rate * np.maximum(-dx, 0.0)
    down[:-1, :] = rate * np.maximum(dy, 0.0)
    up[1:, :] = rate * np.maximum(-dy, 0.0)
    want = right + left + down + up
    scale = np.ones_like(vol)
    np.divide(vol, want, out=scale, where=want > vol)
    right *= scale
    left *= scale
    down *= scale
    up *= scale
    out = right + left + down + up

    new = vol - out
    new[:, 1:] += right[:, :-1]
    new[:, :-1] += left[:, 1:]
    new[1:, :] += down[:-1, :]
    new[:-1, :] += up[1:, :]
    np.maximum(new, 0.0, out=new)

    fx = right[:, :-1] - left[:, 1:]
    fy = down[:-1, :] - up[1:, :]
    return new, fx, fy


def _cell_velocity(fx, fy, vol_before, vol_after):
    """Face fluxes averaged onto cells, divided by the visible depth."""
    h, w = vol_before.shape
    u = np.zeros((h, w))
    v = np.zeros((h, w))
    u[:, :-1] += 0.5 * fx
    u[:, 1:] += 0.5 * fx
    v[:-1, :] += 0.5 * fy
    v[1:, :] += 0.5 * fy
    depth = np.maximum(0.5 * (vol_before + vol_after), RENDER_THRESHOLD)
    return u / depth, v / depth


def render(scene: CavityScene, volume: np.ndarray) -> np.ndarray:
    return np.clip(scene.texture * (1.0 - DARKENING * np.minimum(volume, 1.0)), 0.0, 1.0)


def step(scene: CavityScene, state: FluidState, t: int) -> tuple[FluidState, SimOutputs]:
    """Advance one frame: emit, transport, render."""
    if state.volume.shape != scene.shape:
        raise DimensionError(f"state {state.volume.shape} vs scene {scene.shape}")
    vol = state.volume.copy()
    emitted = 0.0
    for s in scene.sources:
        if s.active(t):
            c, r = s.pixel
            vol[r, c] += s.rate
            emitted += s.rate

    u = np.zeros(scene.shape)
    v = np.zeros(scene.shape)
    for _ in range(scene.substeps):
        new, fx, fy = _transport(scene.floor_height, vol, scene.transfer_rate)
        du, dv = _cell_velocity(fx, fy, vol, new)
        u += du
        v += dv
        vol = new

    new_state = FluidState(vol, state.total_emitted + emitted, state.total_removed)
    out = SimOutputs(
        frame=render(scene, vol),
        truth_mask=vol > RENDER_THRESHOLD,
        truth_u=u,
        truth_v=v,
        t=t,
    )
    return new_state, out


def simulate(scene: CavityScene, n_frames: int, state: FluidState | None = None, t0: int = 0):
    """Yield ``(state, outputs)`` for ``n_frames`` consecutive frames."""
    state = state or FluidState.empty(scene.shape)
    for t in range(t0, t0 + n_frames):
        state, out = step(scene, state, t)
        yield state, out


def apply_suction(state: FluidState, at: tuple[int, int], radius: float, capacity: float) -> FluidState:
    """Remove up to ``capacity`` volume from cells within ``radius`` of ``at``, nearest first."""
    if radius < 1:
        raise ValueError("suction radius must be at least 1")
    vol = state.volume
    h, w = vol.shape
    c0, r0 = at
    rad = int(np.ceil(radius))
    rows = np.arange(max(r0 - rad, 0), min(r0 + rad + 1, h))
    cols = np.arange(max(c0 - rad, 0), min(c0 + rad + 1, w))
    if rows.size == 0 or cols.size == 0:
        return state
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    d2 = (rr - r0) ** 2 + (cc - c0) ** 2
    inside = (d2 <= radius * radius) & (vol[rr, cc] > 0)
    if not inside.any():
        return state
    # lexsort keys: last is primary -> distance, then row, then col
    order = np.lexsort((cc[inside], rr[inside], d2[inside]))
    sel_r = rr[inside][order]
    sel_c = cc[inside][order]
    take = vol[sel_r, sel_c]
    cum = np.cumsum(take)
    before = cum - take
    take = np.clip(capacity - before, 0.0, take)
    removed = float(take.sum())
    if removed == 0.0:
        return state
    new = vol.copy()
    new[sel_r, sel_c] -= take
    np.maximum(new, 0.0, out=new)
    return FluidState(new, state.total_emitted, state.total_removed + removed)


def volume_centroid_height(scene: CavityScene, state: FluidState) -> float:
    total = state.volume.sum()
    return float((state.volume * scene.floor_height).sum() / total) if total > 0 else float("nan")


# --- builtin scenes -------------------------------------------------------

SCENE_SIZE = (96, 128)  # rows, cols
SLOPE_SIZE = (96, 160)
CAVITY_SIZE = (240, 320)


def _texture(shape, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    noise = ndimage.gaussian_filter(rng.standard_normal(shape), 3.0, mode="reflect")
    noise /= np.abs(noise).max()
    return np.clip(0.7 + 0.15 * noise, 0.0, 1.0)


def _grid(shape):
    rows, cols = np.mgrid[0 : shape[0], 0 : shape[1]].astype(np.float64)
    return rows, cols


def _pit(floor, rows, cols, center, radius, depth):
    c, r = center
    d = np.hypot(cols - c, rows - r)
    return floor - depth * np.sqrt(np.clip(1.0 - d / radius, 0.0, 1.0))


def _carve(shape, centerline, half_width, slope, wall=4.0):
    """Channel floor: descends along ``centerline`` and rises outside ``half_width``."""
    from scipy.spatial import cKDTree

    pts = np.asarray(centerline, dtype=np.float64)
    seg = np.hypot(*np.diff(pts, axis=0).T)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    rows, cols = _grid(shape)
    dist, idx = cKDTree(pts).query(np.column_stack([cols.ravel(), rows.ravel()]))
    dist = dist.reshape(shape)
    along = arc[idx].reshape(shape)
    return slope * (arc[-1] - along) + wall * np.maximum(dist - half_width, 0.0)


def _line_source(p0, p1, total_rate, start=0, end=None):
    (c0, r0), (c1, r1) = p0, p1
    n = int(max(abs(c1 - c0), abs(r1 - r0))) + 1
    pixels = []
    for i in range(n):
        f = i / (n - 1) if n > 1 else 0.0
        px = (int(round(c0 + (c1 - c0) * f)), int(round(r0 + (r1 - r0) * f)))
        if px not in pixels:
            pixels.append(px)
    return tuple(Source(px, total_rate / len(pixels), start, end) for px in pixels)


def _scene(name, floor, sources, seed, stain=None, shape=SCENE_SIZE):
    tex = _texture(shape, seed)
    if stain is not None:
        tex = np.where(stain, tex * 0.45, tex)
    return CavityScene(name, floor, tex, tuple(sources), stain=stain)


def slope_scene() -> CavityScene:
    # wider canvas: a straight run across 128 px is too short for the length gate
    h, w = SLOPE_SIZE
    rows, cols = _grid(SLOPE_SIZE)
    floor = _pit(1.0 * (w - 1 - cols), rows, cols, (w - 10, 48), 10, 60)
    return _scene("slope", floor, _line_source((3, 40), (3, 55), 6.0), seed=1, shape=SLOPE_SIZE)


def sine_channel_scene() -> CavityScene:
    xs = np.linspace(4, 122, 300)
    centerline = np.column_stack([xs, 48 + 22 * np.sin(2 * np.pi * (xs - 4) / 118)])
    rows, cols = _grid(SCENE_SIZE)
    floor = _pit(_carve(SCENE_SIZE, centerline, 8, 1.0), rows, cols, (122, 48), 8, 60)
    return _scene("sine_channel", floor, _line_source((4, 40), (4, 56), 5.0), seed=2)


def bend_scene() -> CavityScene:
    centerline = np.vstack([np.linspace([20, 4], [20, 70], 100), np.linspace([20, 70], [120, 70], 150)])
    rows, cols = _grid(SCENE_SIZE)
    floor = _pit(_carve(SCENE_SIZE, centerline, 8, 1.0), rows, cols, (120, 70), 8, 60)
    return _scene("bend", floor, _line_source((12, 4), (28, 4), 5.0), seed=3)


def diagonal_scene() -> CavityScene:
    centerline = np.linspace([10, 8], [118, 86], 300)
    rows, cols = _grid(SCENE_SIZE)
    floor = _pit(_carve(SCENE_SIZE, centerline, 9, 1.0), rows, cols, (118, 86), 8, 80)
    return _scene("diagonal", floor, _line_source((4, 16), (18, 2), 6.0), seed=4)


def terrace_scene() -> CavityScene:
    rows, cols = _grid(SCENE_SIZE)
    profile = np.interp(cols, [0, 40, 80, 127], [0, 40, 52, 99])
    floor = _pit(profile.max() - profile, rows, cols, (120, 48), 8, 60)
    return _scene("terrace", floor, _line_source((3, 40), (3, 56), 6.0), seed=5)


def funnel_scene() -> CavityScene:
    h, w = SCENE_SIZE
    rows, cols = _grid(SCENE_SIZE)
    half = np.interp(rows, [0, 60, h], [40, 8, 8])
    floor = 1.0 * (h - 1 - rows) + 4.0 * np.maximum(np.abs(cols - 64) - half, 0.0)
    floor = _pit(floor, rows, cols, (64, 88), 8, 60)
    return _scene("funnel", floor, _line_source((48, 2), (80, 2), 14.0), seed=6)


def stained_scene() -> CavityScene:
    """Slope with a static dark patch well clear of the stream."""
    h, w = SLOPE_SIZE
    rows, cols = _grid(SLOPE_SIZE)
    floor = _pit(1.0 * (w - 1 - cols), rows, cols, (w - 10, 60), 10, 60)
    stain = ((cols - 60) / 22.0) ** 2 + ((rows - 18) / 10.0) ** 2 <= 1.0
    return _scene(
        "stained", floor, _line_source((3, 52), (3, 67), 6.0), seed=7, stain=stain, shape=SLOPE_SIZE
    )


CAVITY_CORNERS = {
    "top_left": (16, 16),
    "top_right": (303, 16),
    "bottom_left": (16, 223),
    "bottom_right": (303, 223),
}
CAVITY_BASIN = (136, 140)  # below and left of the centre
INJECTION_RATE = 6.0
INJECTION_FRAMES = 100


def _cavity_floor() -> np.ndarray:
    rows, cols = _grid(CAVITY_SIZE)
    channels = [
        _carve(CAVITY_SIZE, np.linspace(corner, CAVITY_BASIN, 400), 8, 1.0, wall=1.0)
        for corner in CAVITY_CORNERS.values()
    ]
    floor = np.minimum(np.minimum.reduce(channels), 200.0)
    return _pit(floor, rows, cols, CAVITY_BASIN, 12, 80)


def _injection(corner: tuple[int, int]) -> tuple[Source, ...]:
    """Short line source across the channel mouth at ``corner``."""
    c, r = corner
    dc, dr = CAVITY_BASIN[0] - c, CAVITY_BASIN[1] - r
    n = np.hypot(dc, dr)
    pc, pr = -dr / n, dc / n
    return _line_source(
        (c - 6 * pc, r - 6 * pr), (c + 6 * pc, r + 6 * pr), INJECTION_RATE, 0, INJECTION_FRAMES
    )


def cavity_scene(injection: str | None = None, seed: int = 11) -> CavityScene:
    """Four channels run from the corners into a pit left of and below the centre.

    ``injection`` picks one corner (``top_left``, ``top_right``,
    ``bottom_left``, ``bottom_right``); ``None`` injects at all four.
    """
    if injection is not None and injection not in CAVITY_CORNERS:
        raise KeyError(f"unknown injection point {injection!r}")
    corners = [injection] if injection else list(CAVITY_CORNERS)
    sources = tuple(s for name in corners for s in _injection(CAVITY_CORNERS[name]))
    name = f"cavity_{injection}" if injection else "cavity"
    return CavityScene(
        name, _cavity_floor(), _texture(CAVITY_SIZE, seed), sources, height_scale=0.1
    )


EVALUATION_SCENES = (
    slope_scene,
    sine_channel_scene,
    bend_scene,
    diagonal_scene,
    terrace_scene,
    funnel_scene,
    stained_scene,
)


def evaluation_scenes() -> list[CavityScene]:
    """The flow scenes used for detection IoU (single stream each)."""
    return [make() for make in EVALUATION_SCENES]


def builtin_scenes() -> list[CavityScene]:
    return evaluation_scenes() + [cavity_scene()]


def scene_names() -> list[str]:
    return [s.name for s in builtin_scenes()] + [f"cavity_{c}" for c in CAVITY_CORNERS]


def get_scene(name: str, seed: int | None = None) -> CavityScene:
    if name == "cavity":
        return cavity_scene(None, **({} if seed is None else {"seed": seed}))
    if name.startswith("cavity_"):
        return cavity_scene(name[len("cavity_"):], **({} if seed is None else {"seed": seed}))
    for make in EVALUATION_SCENES:
        scene = make()
        if scene.name == name:
            return scene
    raise KeyError(f"unknown scene {name!r}; choose from {', '.join(scene_names())}")
