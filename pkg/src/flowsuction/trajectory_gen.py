"""Suction trajectory generation on the detected blood region.

The end point is the oldest blood (closest to the source), the start point is
the newest blood (downstream).  The path between them is a mask-constrained
Dijkstra search whose edge costs are discounted by a clearance reward that
grows towards the middle of the region.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from .region_extraction import erode
from .temporal_filter import NEIGHBOR_OFFSETS
from .types import PixelTrajectory, check_same_shape


class PlanningError(RuntimeError):
    pass


def update_age(counts: np.ndarray, mask: np.ndarray) -> np.ndarray:
    check_same_shape(counts, mask)
    return np.asarray(counts, dtype=np.int64) + np.asarray(mask, dtype=bool)


def _first_extreme(values: np.ndarray, where: np.ndarray, largest: bool) -> tuple[int, int]:
    fill = np.iinfo(np.int64).min if largest else np.iinfo(np.int64).max
    masked = np.where(where, values, fill)
    flat = int(np.argmax(masked) if largest else np.argmin(masked))
    row, col = divmod(flat, values.shape[1])
    return col, row


def select_endpoints(counts: np.ndarray, mask: np.ndarray) -> tuple[tuple[int, int], tuple[int, int]]:
    """Return ``(start, end)`` as ``(col, row)`` pixels.

    ``end`` is the oldest pixel of the once-eroded mask (the whole mask when
    erosion empties it); ``start`` is the newest pixel of the mask.  Ties go to
    the smallest ``(row, col)``.
    """
    mask = np.asarray(mask, dtype=bool)
    check_same_shape(counts, mask)
    if not mask.any():
        raise ValueError("cannot select endpoints on an empty mask")
    counts = np.asarray(counts, dtype=np.int64)
    core = erode(mask)
    if not core.any():
        core = mask
    end = _first_extreme(counts, core, largest=True)
    start = _first_extreme(counts, mask, largest=False)
    return start, end


def clearance_reward(mask: np.ndarray, r: float, gamma_r: int) -> np.ndarray:
    """``r`` per erosion a pixel survives, at most ``gamma_r`` erosions."""
    eroded = np.asarray(mask, dtype=bool)
    reward = np.zeros(eroded.shape)
    i = 0
    while eroded.any() and i < gamma_r:
        eroded = erode(eroded)
        reward += r * eroded
        i += 1
    return reward


def plan(
    start: tuple[int, int],
    end: tuple[int, int],
    mask: np.ndarray,
    reward: np.ndarray,
    connectivity: int = 4,
) -> PixelTrajectory:
    """Minimum-cost path from ``start`` to ``end`` through mask pixels.

    Entering pixel ``q`` from ``u`` costs ``|q - u| - reward[q]``.  Equal-cost
    alternatives resolve by neighbour visitation order (up, down, left,
    right, then diagonals) because only strict improvements relax a node.
    """
    mask = np.asarray(mask, dtype=bool)
    check_same_shape(mask, reward)
    h, w = mask.shape
    (sc, sr), (ec, er) = start, end
    for c, r in (start, end):
        if not (0 <= r < h and 0 <= c < w and mask[r, c]):
            raise PlanningError(f"endpoint {(c, r)} is outside the mask")

    steps = [(dr, dc, math.hypot(dr, dc)) for dr, dc in NEIGHBOR_OFFSETS[connectivity]]
    dist = np.full((h, w), np.inf)
    parent = np.full((h, w, 2), -1, dtype=np.int64)
    done = ~mask
    dist[sr, sc] = 0.0
    heap = [(0.0, 0, sr, sc)]
    pushes = 1
    while heap:
        d, _, r, c = heapq.heappop(heap)
        if done[r, c]:
            continue
        done[r, c] = True
        if (r, c) == (er, ec):
            break
        for dr, dc, length in steps:
            qr, qc = r + dr, c + dc
            if 0 <= qr < h and 0 <= qc < w and not done[qr, qc]:
                nd = d + length - reward[qr, qc]
                if nd < dist[qr, qc]:
                    dist[qr, qc] = nd
                    parent[qr, qc] = (r, c)
                    heapq.heappush(heap, (nd, pushes, qr, qc))
                    pushes += 1
    if not np.isfinite(dist[er, ec]):
        raise PlanningError("no path between endpoints inside the mask")

    path = [(ec, er)]
    r, c = er, ec
    while (r, c) != (sr, sc):
        r, c = parent[r, c]
        path.append((int(c), int(r)))
    return PixelTrajectory(tuple(reversed(path)))


def path_cost(traj: PixelTrajectory, reward: np.ndarray) -> float:
    pts = traj.waypoints
    return sum(
        math.hypot(q[0] - u[0], q[1] - u[1]) - reward[q[1], q[0]] for u, q in zip(pts, pts[1:])
    )


def gate_and_emit(traj: PixelTrajectory | None, gamma_T: int) -> PixelTrajectory | None:
    if traj is None or len(traj) <= gamma_T:
        return None
    return traj


def decimate(traj: PixelTrajectory, every: int = 3) -> PixelTrajectory:
    """Keep every ``every``-th waypoint; first and last are always kept."""
    pts = traj.waypoints
    if every <= 1 or len(pts) <= 2:
        return traj
    kept = list(pts[::every])
    if kept[-1] != pts[-1]:
        kept.append(pts[-1])
    return PixelTrajectory(tuple(kept))


def generate_trajectory(
    counts: np.ndarray, mask: np.ndarray, r: float, gamma_r: int, connectivity: int = 4
) -> PixelTrajectory:
    start, end = select_endpoints(counts, mask)
    reward = clearance_reward(mask, r, gamma_r)
    return plan(start, end, mask, reward, connectivity)
