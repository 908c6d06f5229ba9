"""Input checks shared by the estimators and the CLI."""
from __future__ import annotations

import numpy as np

from .hqli import MIN_SIZE
from .image import BayerLayout, MosaicImage


def check_rgb(img, min_size: int = 2) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {arr.shape}")
    if min(arr.shape[:2]) < min_size:
        raise ValueError(f"image {arr.shape[:2]} is smaller than {min_size}x{min_size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr


def check_rgb_list(images, min_size: int = 2) -> list[np.ndarray]:
    if isinstance(images, np.ndarray) and images.ndim == 3:
        images = [images]
    return [check_rgb(im, min_size) for im in images]


def check_mosaic(m, layout=None) -> MosaicImage:
    """Accept a MosaicImage (keeps its own layout) or a bare 2-D plane plus ``layout``."""
    if isinstance(m, MosaicImage):
        out = m
    else:
        arr = np.asarray(m, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D CFA plane, got shape {arr.shape}")
        if layout is None:
            raise ValueError("a bare CFA plane needs a Bayer layout")
        out = MosaicImage(arr, BayerLayout.parse(layout))
    h, w = out.shape
    if h < MIN_SIZE or w < MIN_SIZE:
        raise ValueError(f"CFA plane must be at least {MIN_SIZE}x{MIN_SIZE}, got {h}x{w}")
    if not np.all(np.isfinite(out.cfa)):
        raise ValueError("CFA plane contains non-finite values")
    return out


def check_mosaic_list(X, layout=None) -> list[MosaicImage]:
    if isinstance(X, MosaicImage) or (isinstance(X, np.ndarray) and X.ndim == 2):
        X = [X]
    return [check_mosaic(m, layout) for m in X]
