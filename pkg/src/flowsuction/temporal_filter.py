"""Per-pixel two-state hidden Markov filter with neighbour-coupled transitions.

Each pixel is either blood or not.  A pixel that is not blood becomes blood
with a probability that depends on whether any of its neighbours is blood
(the Boolean OR of the neighbour states).  Neighbour states are treated as
independent given the detections, so the probability of the OR is obtained by
inclusion-exclusion over the neighbour posteriors.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import prod
from typing import Sequence

import numpy as np

from .config import PipelineConfig
from .types import DimensionError, check_same_shape

# (drow, dcol) in visitation order: up, down, left, right, then diagonals
NEIGHBOR_OFFSETS = {
    4: ((-1, 0), (1, 0), (0, -1), (0, 1)),
    8: ((-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)),
}

PROB_FLOOR = 1e-15


def neighbor_or_prob(neighbor_probs: Sequence[float]) -> float:
    """Probability that at least one neighbour is blood.

    Sums the inclusion-exclusion series over every non-empty subset of the
    neighbours.  Under independence this equals ``1 - prod(1 - p)``.
    """
    probs = [float(p) for p in neighbor_probs]
    total = 0.0
    for j in range(1, len(probs) + 1):
        sign = 1.0 if j % 2 else -1.0
        total += sign * sum(prod(subset) for subset in combinations(probs, j))
    return total


def neighbor_stack(prob: np.ndarray, connectivity: int = 4) -> np.ndarray:
    """Stack of shifted copies of ``prob``, one per neighbour offset.

    Out-of-grid neighbours read as 0, which drops them from every product in
    the inclusion-exclusion sum, so edge pixels effectively use their
    truncated neighbour sets.
    """
    h, w = prob.shape
    offsets = NEIGHBOR_OFFSETS[connectivity]
    out = np.zeros((len(offsets), h, w))
    for i, (dr, dc) in enumerate(offsets):
        src_r = slice(max(dr, 0), h + min(dr, 0))
        dst_r = slice(max(-dr, 0), h + min(-dr, 0))
        src_c = slice(max(dc, 0), w + min(dc, 0))
        dst_c = slice(max(-dc, 0), w + min(-dc, 0))
        out[i, dst_r, dst_c] = prob[src_r, src_c]
    return out


def neighbor_or_map(prob: np.ndarray, connectivity: int = 4) -> np.ndarray:
    """Vectorised inclusion-exclusion: alternating sum of elementary symmetric polynomials."""
    stack = neighbor_stack(prob, connectivity)
    n = stack.shape[0]
    # esym[j] = sum over all size-j neighbour subsets of the product of their probabilities
    esym = [np.ones_like(prob)] + [np.zeros_like(prob) for _ in range(n)]
    for p in stack:
        for j in range(n, 0, -1):
            esym[j] = esym[j] + esym[j - 1] * p
    total = np.zeros_like(prob)
    for j in range(1, n + 1):
        total = total + esym[j] if j % 2 else total - esym[j]
    return total


def predict(posterior: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    """One-step prediction of P(blood) from the previous posterior snapshot."""
    p = np.asarray(posterior, dtype=np.float64)
    k = neighbor_or_map(p, cfg.connectivity)
    birth = cfg.p_nb_k * k + cfg.p_nb_nk * (1.0 - k)
    return cfg.p_bb * p + birth * (1.0 - p)


def update(predicted: np.ndarray, z: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    """Bayes update of the predicted map with this frame's detections ``z``."""
    check_same_shape(predicted, z)
    z = np.asarray(z, dtype=bool)
    like_b = np.where(z, cfg.p_det_tp, 1.0 - cfg.p_det_tp)
    like_nb = np.where(z, cfg.p_det_fp, 1.0 - cfg.p_det_fp)
    num = like_b * predicted
    den = num + like_nb * (1.0 - predicted)
    post = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return np.clip(post, PROB_FLOOR, 1.0 - PROB_FLOOR)


@dataclass(frozen=True, eq=False)
class FilterState:
    posterior: np.ndarray
    cfg: PipelineConfig
    t: int = 0

    @classmethod
    def initial(cls, shape: tuple[int, int], cfg: PipelineConfig) -> "FilterState":
        return cls(np.full(shape, cfg.p_prior, dtype=np.float64), cfg, 0)


def filter_step(state: FilterState, z: np.ndarray) -> FilterState:
    if np.shape(z) != state.posterior.shape:
        raise DimensionError(f"detections {np.shape(z)} vs posterior {state.posterior.shape}")
    predicted = predict(state.posterior, state.cfg)
    return FilterState(update(predicted, z, state.cfg), state.cfg, state.t + 1)
