"""Image primitives: Bayer layouts, CFA sampling, pixel bookkeeping, PSNR and patching.

Planes are 2-D ``float64`` arrays with nominal range [0, 255]; RGB images are
``(H, W, 3)`` arrays.  Quantization to 8 bits happens only on export.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np

PEAK = 255.0


class BayerLayout(str, enum.Enum):
    """The four phases of the 2x2 Bayer tile, named row-major."""

    RGGB = "RGGB"
    GRBG = "GRBG"
    GBRG = "GBRG"
    BGGR = "BGGR"

    @classmethod
    def parse(cls, value) -> "BayerLayout":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ValueError(
                f"unknown Bayer layout {value!r}; expected one of "
                f"{', '.join(m.value for m in cls)}"
            ) from None

    @property
    def tile(self) -> tuple[tuple[str, str], tuple[str, str]]:
        s = self.value
        return (s[0], s[1]), (s[2], s[3])

    def position(self, channel: str) -> tuple[int, int]:
        """(row, col) of a red or blue sample inside the tile."""
        if channel not in "RB":
            raise ValueError("only R and B occupy a single tile position")
        idx = self.value.index(channel)
        return divmod(idx, 2)

    def shifted(self, drow: int, dcol: int) -> "BayerLayout":
        """Layout seen by an image cropped by ``drow`` rows and ``dcol`` columns."""
        t = self.tile
        s = "".join(t[(i + drow) % 2][(j + dcol) % 2] for i in range(2) for j in range(2))
        return BayerLayout(s)


@dataclass(frozen=True)
class MosaicImage:
    """A single-plane CFA capture and the layout that produced it."""

    cfa: np.ndarray
    layout: BayerLayout

    def __post_init__(self):
        cfa = np.asarray(self.cfa, dtype=np.float64)
        if cfa.ndim != 2:
            raise ValueError(f"CFA must be 2-D, got shape {cfa.shape}")
        object.__setattr__(self, "cfa", cfa)
        object.__setattr__(self, "layout", BayerLayout.parse(self.layout))

    @property
    def shape(self) -> tuple[int, int]:
        return self.cfa.shape


@dataclass(frozen=True)
class PixelSets:
    """Boolean masks of the positions holding red, green and blue samples."""

    R: np.ndarray
    G: np.ndarray
    B: np.ndarray

    def coords(self, channel: str) -> set[tuple[int, int]]:
        mask = getattr(self, channel)
        return {(int(i), int(j)) for i, j in zip(*np.nonzero(mask))}

    def mask(self, channel: str) -> np.ndarray:
        return getattr(self, channel)


def pixel_sets(height: int, width: int, layout) -> PixelSets:
    if height < 2 or width < 2:
        raise ValueError("image must be at least 2x2")
    layout = BayerLayout.parse(layout)
    tile = np.array(layout.tile)
    rows = np.arange(height)[:, None] % 2
    cols = np.arange(width)[None, :] % 2
    labels = tile[rows, cols]
    return PixelSets(R=labels == "R", G=labels == "G", B=labels == "B")


def mosaic(src: np.ndarray, layout) -> MosaicImage:
    """Sample an ``(H, W, 3)`` image through the Bayer CFA."""
    src = np.asarray(src, dtype=np.float64)
    if src.ndim != 3 or src.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got {src.shape}")
    layout = BayerLayout.parse(layout)
    sets = pixel_sets(src.shape[0], src.shape[1], layout)
    cfa = np.where(sets.R, src[..., 0], np.where(sets.G, src[..., 1], src[..., 2]))
    return MosaicImage(cfa, layout)


def clip(x):
    return np.clip(x, 0.0, PEAK)


def psnr(a, b, peak: float = PEAK) -> float:
    """PSNR in dB; identical inputs give ``inf``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


@dataclass(frozen=True)
class PsnrRow:
    r: float
    g: float
    b: float
    cpsnr: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.r, self.g, self.b, self.cpsnr)


def psnr_report(truth, est, crop: int = 0, peak: float = PEAK) -> PsnrRow:
    """Per-channel PSNR plus CPSNR (joint MSE over the three planes)."""
    truth = np.asarray(truth, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if truth.shape != est.shape:
        raise ValueError(f"shape mismatch {truth.shape} vs {est.shape}")
    if crop < 0 or 2 * crop >= min(truth.shape[:2]):
        raise ValueError(f"crop {crop} too large for image {truth.shape[:2]}")
    if crop:
        truth = truth[crop:-crop, crop:-crop]
        est = est[crop:-crop, crop:-crop]
    per = [psnr(truth[..., c], est[..., c], peak) for c in range(3)]
    return PsnrRow(*per, psnr(truth, est, peak))


def mean_psnr(values) -> float:
    """Dataset mean of per-image PSNRs, skipping infinite entries."""
    vals = [float(v) for v in values]
    finite = [v for v in vals if math.isfinite(v)]
    if len(finite) < len(vals):
        warnings.warn(
            f"{len(vals) - len(finite)} infinite PSNR value(s) excluded from the mean",
            RuntimeWarning,
            stacklevel=2,
        )
    if not finite:
        return math.inf if vals else math.nan
    return float(np.mean(finite))


def extract_patches(img: np.ndarray, size: int = 50) -> list[np.ndarray]:
    """Non-overlapping ``size`` x ``size`` tiles in raster order; ragged edges dropped."""
    if size < 2:
        raise ValueError("patch size must be >= 2")
    h, w = img.shape[:2]
    return [
        img[i : i + size, j : j + size]
        for i in range(0, h - size + 1, size)
        for j in range(0, w - size + 1, size)
    ]


def to_uint8(x) -> np.ndarray:
    return np.rint(clip(np.asarray(x, dtype=np.float64))).astype(np.uint8)
