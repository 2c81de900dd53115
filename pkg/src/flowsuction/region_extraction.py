"""Posterior map -> single blood region."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

SQUARE = np.ones((3, 3), dtype=bool)
STRUCTURE = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def threshold_mask(posterior: np.ndarray) -> np.ndarray:
    return np.asarray(posterior) > 0.5


def erode(mask: np.ndarray, iterations: int = 1) -> np.ndarray:
    """3x3 square erosion; everything outside the image counts as background."""
    mask = np.asarray(mask, dtype=bool)
    if iterations < 1 or not mask.any():
        return mask.copy()
    return ndimage.binary_erosion(mask, SQUARE, iterations=iterations, border_value=0)


def dilate(mask: np.ndarray) -> np.ndarray:
    return ndimage.binary_dilation(np.asarray(mask, dtype=bool), SQUARE)


def denoise(mask: np.ndarray) -> np.ndarray:
    """One dilation followed by one erosion (closing) with a 3x3 square.

    Computed on a one-pixel zero-padded canvas and cropped, so border pixels
    behave as if the image continued with background: the result always
    contains the input and nothing is smeared onto the border.
    """
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1)
    closed = ndimage.binary_erosion(dilate(padded), SQUARE, border_value=0)
    return closed[1:-1, 1:-1]


def label(mask: np.ndarray, connectivity: int = 4) -> tuple[np.ndarray, int]:
    if connectivity not in STRUCTURE:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    return ndimage.label(np.asarray(mask, dtype=bool), structure=STRUCTURE[connectivity])


def largest_component(mask: np.ndarray, gamma_B: int, connectivity: int = 4) -> np.ndarray | None:
    """Largest connected component if it has more than ``gamma_B`` pixels, else None.

    Equal sizes go to the component whose first pixel in row-major order
    comes first.
    """
    labels, n = label(mask, connectivity)
    if n == 0:
        return None
    sizes = np.bincount(labels.ravel())[1:]
    # ndimage.label numbers components in raster order of their first pixel,
    # so argmax's first-hit rule is the lexicographic tie-break
    best = int(np.argmax(sizes))
    if sizes[best] <= gamma_B:
        return None
    return labels == best + 1


def extract_region(posterior: np.ndarray, gamma_B: int, connectivity: int = 4) -> np.ndarray | None:
    return largest_component(denoise(threshold_mask(posterior)), gamma_B, connectivity)
