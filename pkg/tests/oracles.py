"""Slow, loop-based reference implementations used only by the tests.

Nothing here imports the package's algorithms; each routine is written
directly from the model definitions.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np

FOUR = ((-1, 0), (1, 0), (0, -1), (0, 1))
EIGHT = FOUR + ((-1, -1), (-1, 1), (1, -1), (1, 1))


def offsets(connectivity):
    return FOUR if connectivity == 4 else EIGHT


def or_by_enumeration(probs):
    """P(at least one neighbour is blood): sum over every joint neighbour state."""
    total = 0.0
    for state in itertools.product((0, 1), repeat=len(probs)):
        if not any(state):
            continue
        w = 1.0
        for s, p in zip(state, probs):
            w *= p if s else 1.0 - p
        total += w
    return total


def brute_filter_step(post, z, p):
    """One predict+update of the two-state filter, pixel by pixel.

    ``p`` is a dict with p_bb, p_nb_k, p_nb_nk, p_det_tp, p_det_fp and
    connectivity.
    """
    h, w = post.shape
    out = np.empty((h, w))
    for r in range(h):
        for c in range(w):
            nbrs = [
                post[r + dr, c + dc]
                for dr, dc in offsets(p["connectivity"])
                if 0 <= r + dr < h and 0 <= c + dc < w
            ]
            pk = or_by_enumeration(nbrs)
            pb = post[r, c]
            pred = p["p_bb"] * pb + (p["p_nb_k"] * pk + p["p_nb_nk"] * (1 - pk)) * (1 - pb)
            if z[r, c]:
                lb, lnb = p["p_det_tp"], p["p_det_fp"]
            else:
                lb, lnb = 1 - p["p_det_tp"], 1 - p["p_det_fp"]
            num = lb * pred
            den = num + lnb * (1 - pred)
            out[r, c] = num / den if den > 0 else 0.0
    return out


def flood_components(mask, connectivity=4):
    """List of pixel sets, found by breadth-first flood fill in raster order."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    comps = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] and not seen[r, c]:
                comp = set()
                queue = deque([(r, c)])
                seen[r, c] = True
                while queue:
                    y, x = queue.popleft()
                    comp.add((y, x))
                    for dr, dc in offsets(connectivity):
                        ny, nx = y + dr, x + dc
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            queue.append((ny, nx))
                comps.append(comp)
    return comps


def bellman_ford(mask, reward, source, connectivity=4):
    """Shortest costs from ``source`` (col, row) over mask pixels.

    Edge u->q costs |q - u| - reward[q].
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    nodes = [(r, c) for r in range(h) for c in range(w) if mask[r, c]]
    edges = []
    for r, c in nodes:
        for dr, dc in offsets(connectivity):
            qr, qc = r + dr, c + dc
            if 0 <= qr < h and 0 <= qc < w and mask[qr, qc]:
                edges.append(((r, c), (qr, qc), math.hypot(dr, dc) - reward[qr, qc]))
    dist = {n: math.inf for n in nodes}
    dist[(source[1], source[0])] = 0.0
    for _ in range(len(nodes) - 1):
        changed = False
        for u, q, cost in edges:
            if dist[u] + cost < dist[q]:
                dist[q] = dist[u] + cost
                changed = True
        if not changed:
            break
    return dist


def boundary_distance(mask, metric="chessboard"):
    """Distance from each mask pixel to the nearest background pixel.

    Pixels outside the image count as background.  ``chessboard`` (max of
    the axis offsets) is the metric a 3x3 square erosion peels by.
    """
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1)
    bg = np.argwhere(~padded)
    out = np.zeros(mask.shape)
    for r, c in np.argwhere(mask):
        dr, dc = np.abs(bg[:, 0] - (r + 1)), np.abs(bg[:, 1] - (c + 1))
        d = np.maximum(dr, dc) if metric == "chessboard" else np.hypot(dr, dc)
        out[r, c] = d.min()
    return out


def erode_square(mask):
    """3x3 erosion by explicit neighbourhood checks; outside is background."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    out = np.zeros_like(mask)
    for r in range(h):
        for c in range(w):
            out[r, c] = all(
                0 <= r + dr < h and 0 <= c + dc < w and mask[r + dr, c + dc]
                for dr in (-1, 0, 1)
                for dc in (-1, 0, 1)
            )
    return out


def random_connected_mask(rng, h, w):
    """Union of random discs and boxes, reduced to its largest 4-connected piece."""
    m = np.zeros((h, w), bool)
    rows, cols = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(2, 6)):
        cr, cc = rng.integers(0, h), rng.integers(0, w)
        if rng.integers(2):
            m |= np.hypot(rows - cr, cols - cc) <= rng.uniform(1.5, max(2.0, min(h, w) / 3))
        else:
            m[max(cr - rng.integers(1, 6), 0) : cr + rng.integers(1, 6),
              max(cc - rng.integers(1, 8), 0) : cc + rng.integers(1, 8)] = True
    best = max(flood_components(m, 4), key=len)
    out = np.zeros_like(m)
    for r, c in best:
        out[r, c] = True
    return out
