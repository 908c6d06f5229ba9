"""High quality linear interpolation (Malvar-He-Cutler) of a Bayer mosaic.

Each missing sample is a 5x5 linear combination of CFA values: a bilinear
estimate corrected by the Laplacian of the co-sited channel.  All stencils
carry an implicit divisor of 8 and sum to 8, so constant images are
reproduced exactly.
"""
from __future__ import annotations

import numpy as np

from .image import BayerLayout, MosaicImage, pixel_sets

MIN_SIZE = 5
DIVISOR = 8.0

# green at a red or blue site
G_AT_RB = np.array(
    [
        [0, 0, -1, 0, 0],
        [0, 0, 2, 0, 0],
        [-1, 2, 4, 2, -1],
        [0, 0, 2, 0, 0],
        [0, 0, -1, 0, 0],
    ],
    dtype=np.float64,
)

# red (blue) at a green site whose row holds red (blue) samples
RB_AT_G_ROW = np.array(
    [
        [0, 0, 0.5, 0, 0],
        [0, -1, 0, -1, 0],
        [-1, 4, 5, 4, -1],
        [0, -1, 0, -1, 0],
        [0, 0, 0.5, 0, 0],
    ],
    dtype=np.float64,
)

# red (blue) at a green site whose column holds red (blue) samples
RB_AT_G_COL = RB_AT_G_ROW.T.copy()

# red at blue, blue at red
RB_AT_BR = np.array(
    [
        [0, 0, -1.5, 0, 0],
        [0, 2, 0, 2, 0],
        [-1.5, 0, 6, 0, -1.5],
        [0, 2, 0, 2, 0],
        [0, 0, -1.5, 0, 0],
    ],
    dtype=np.float64,
)

HQLI_KERNELS = {
    "g_at_rb": G_AT_RB,
    "rb_at_g_row": RB_AT_G_ROW,
    "rb_at_g_col": RB_AT_G_COL,
    "rb_at_br": RB_AT_BR,
}

# bilinear fallback, normalised to the same divisor
_BILINEAR_G = np.array(
    [[0, 0, 0, 0, 0], [0, 0, 2, 0, 0], [0, 2, 0, 2, 0], [0, 0, 2, 0, 0], [0, 0, 0, 0, 0]],
    dtype=np.float64,
)
_BILINEAR_ROW = np.zeros((5, 5))
_BILINEAR_ROW[2, 1] = _BILINEAR_ROW[2, 3] = 4.0
_BILINEAR_COL = _BILINEAR_ROW.T.copy()
_BILINEAR_DIAG = np.zeros((5, 5))
_BILINEAR_DIAG[1, 1] = _BILINEAR_DIAG[1, 3] = _BILINEAR_DIAG[3, 1] = _BILINEAR_DIAG[3, 3] = 2.0

BILINEAR_KERNELS = {
    "g_at_rb": _BILINEAR_G,
    "rb_at_g_row": _BILINEAR_ROW,
    "rb_at_g_col": _BILINEAR_COL,
    "rb_at_br": _BILINEAR_DIAG,
}


def stencil(cfa: np.ndarray, kernel: np.ndarray, pad_mode: str = "reflect") -> np.ndarray:
    """Correlate ``cfa`` with a 5x5 stencil and divide by 8.

    Taps are accumulated one at a time in row-major order, skipping zero
    coefficients, so the result is reproducible bit-for-bit by a scalar loop
    that follows the same order.
    """
    h, w = cfa.shape
    padded = np.pad(cfa, 2, mode=pad_mode)
    acc = np.zeros((h, w), dtype=np.float64)
    for dy in range(5):
        for dx in range(5):
            k = kernel[dy, dx]
            if k != 0.0:
                acc += k * padded[dy : dy + h, dx : dx + w]
    return acc / DIVISOR


def _site_masks(shape, layout: BayerLayout):
    h, w = shape
    sets = pixel_sets(h, w, layout)
    r_row, _ = layout.position("R")
    rows = np.broadcast_to((np.arange(h)[:, None] % 2) == r_row, (h, w))
    return sets, sets.G & rows, sets.G & ~rows


def hqli(m: MosaicImage, method: str = "hqli", pad_mode: str = "reflect"):
    """Interpolate a mosaic to full-resolution planes ``(r0, g0, b0)``.

    Sampled positions are copied verbatim.  Borders use mirror padding that
    excludes the edge pixel (``reflect``), which keeps the CFA phase intact
    inside the padded margin.  Output is not clipped.

    Parameters
    ----------
    m : MosaicImage
        CFA plane and layout; at least 5x5.
    method : {"hqli", "bilinear"}
        ``"bilinear"`` swaps in plain bilinear stencils for ablations.
    pad_mode : str
        Any ``numpy.pad`` mode.
    """
    cfa = m.cfa
    h, w = cfa.shape
    if h < MIN_SIZE or w < MIN_SIZE:
        raise ValueError(f"HQLI needs at least {MIN_SIZE}x{MIN_SIZE} pixels, got {h}x{w}")
    if method == "hqli":
        kernels = HQLI_KERNELS
    elif method == "bilinear":
        kernels = BILINEAR_KERNELS
    else:
        raise ValueError(f"unknown interpolation method {method!r}")

    sets, g_in_r_row, g_in_b_row = _site_masks(cfa.shape, m.layout)
    est = {name: stencil(cfa, k, pad_mode) for name, k in kernels.items()}

    g0 = np.where(sets.G, cfa, est["g_at_rb"])
    # in a row holding red samples, red neighbours of a green site are horizontal
    r0 = np.select(
        [sets.R, g_in_r_row, g_in_b_row],
        [cfa, est["rb_at_g_row"], est["rb_at_g_col"]],
        default=est["rb_at_br"],
    )
    b0 = np.select(
        [sets.B, g_in_b_row, g_in_r_row],
        [cfa, est["rb_at_g_row"], est["rb_at_g_col"]],
        default=est["rb_at_br"],
    )
    return r0, g0, b0


def difference_planes(r0, g0, b0):
    """Green-red and green-blue difference planes (signed, unclipped)."""
    r0, g0, b0 = (np.asarray(p, dtype=np.float64) for p in (r0, g0, b0))
    if not (r0.shape == g0.shape == b0.shape):
        raise ValueError("planes must share a shape")
    return g0 - r0, g0 - b0


def hqli_rgb(m: MosaicImage, **kwargs) -> np.ndarray:
    """HQLI result stacked as an ``(H, W, 3)`` image."""
    return np.stack(hqli(m, **kwargs), axis=-1)
