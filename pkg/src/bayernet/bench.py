"""Dataset ingestion, synthetic test images and benchmark reports."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import __version__
from .hqli import MIN_SIZE, hqli_rgb
from .image import BayerLayout, clip, mean_psnr, mosaic, psnr_report
from .imageio import RGB_SUFFIXES, read_rgb, write_rgb
from .nn import network as N
from .pipeline import DemosaicModel, demosaic_batch

log = logging.getLogger(__name__)


@dataclass
class Dataset:
    images: list[np.ndarray]
    names: list[str]
    skipped: list[tuple[str, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.images)


def ingest_dataset(directory) -> Dataset:
    """Load every PNG/PPM in ``directory`` in lexicographic filename order.

    Unreadable files and images smaller than 5x5 are skipped with a warning
    and listed in ``skipped``.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    ds = Dataset([], [])
    for path in sorted(p for p in directory.iterdir() if p.suffix.lower() in RGB_SUFFIXES):
        try:
            img = read_rgb(path)
        except Exception as exc:  # noqa: BLE001 - any decode failure skips the file
            log.warning("skipping %s: %s", path.name, exc)
            ds.skipped.append((path.name, f"unreadable: {exc}"))
            continue
        if min(img.shape[:2]) < MIN_SIZE:
            log.warning("skipping %s: smaller than %dx%d", path.name, MIN_SIZE, MIN_SIZE)
            ds.skipped.append((path.name, "too small"))
            continue
        ds.images.append(img)
        ds.names.append(path.name)
    return ds


# --- synthetic scenes -------------------------------------------------------

def _colour(rng):
    return rng.uniform(0, 255, size=3)


def _gradient(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w] / max(h, w)
    out = np.empty((h, w, 3))
    for c in range(3):
        a, b, q = rng.uniform(-1, 1, size=3)
        out[..., c] = 128 + 100 * (a * xx + b * yy + q * (xx - 0.5) * (yy - 0.5))
    return out


def _shapes(rng, h, w, base):
    out = base.copy()
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(4, 10)):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        size = rng.uniform(3, max(h, w) / 3)
        if rng.random() < 0.5:
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 < size**2
        else:
            theta = rng.uniform(0, np.pi)
            u = (xx - cx) * np.cos(theta) + (yy - cy) * np.sin(theta)
            v = -(xx - cx) * np.sin(theta) + (yy - cy) * np.cos(theta)
            mask = (np.abs(u) < size) & (np.abs(v) < size * rng.uniform(0.2, 1))
        out[mask] = _colour(rng)
    return out


def _stripes(rng, h, w):
    yy, xx = np.mgrid[0:h, 0:w]
    theta = rng.uniform(0, np.pi)
    period = rng.uniform(3, 16)
    phase = np.sin(2 * np.pi * (xx * np.cos(theta) + yy * np.sin(theta)) / period)
    c1, c2 = _colour(rng), _colour(rng)
    t = (phase[..., None] + 1) / 2
    return t * c1 + (1 - t) * c2


def _checker(rng, h, w):
    cell = int(rng.integers(2, 9))
    yy, xx = np.mgrid[0:h, 0:w]
    board = ((yy // cell + xx // cell) % 2).astype(bool)
    out = np.empty((h, w, 3))
    out[board] = _colour(rng)
    out[~board] = _colour(rng)
    return out


def _texture(rng, h, w):
    noise = rng.standard_normal((h, w, 3))
    sigma = rng.uniform(0.7, 2.5)
    tex = ndimage.gaussian_filter(noise, sigma=(sigma, sigma, 0))
    tex /= tex.std() + 1e-12
    # partially shared luminance makes the colour channels correlated, as in photographs
    lum = tex.mean(axis=2, keepdims=True)
    mixed = 0.7 * lum + 0.3 * tex
    return 128 + 40 * mixed + _gradient(rng, h, w) - 128


SYNTH_KINDS = ("gradient", "shapes", "stripes", "checker", "texture", "mixed")


def synthetic_image(rng: np.random.Generator, height: int = 100, width: int = 100, kind: str = "mixed") -> np.ndarray:
    """An 8-bit-valued RGB scene: gradients, shapes, gratings, checkerboards or noise texture."""
    if kind == "mixed":
        kind = str(rng.choice(SYNTH_KINDS[:-1]))
    if kind == "gradient":
        img = _gradient(rng, height, width)
    elif kind == "shapes":
        img = _shapes(rng, height, width, _gradient(rng, height, width))
    elif kind == "stripes":
        img = _stripes(rng, height, width)
    elif kind == "checker":
        img = _checker(rng, height, width)
    elif kind == "texture":
        img = _texture(rng, height, width)
    else:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    return np.rint(clip(img))


def synthetic_set(n: int, height: int = 100, width: int = 100, seed: int = 0, kind: str = "mixed"):
    rng = np.random.default_rng(seed)
    return [synthetic_image(rng, height, width, kind) for _ in range(n)]


def write_synthetic(directory, n: int, height: int = 100, width: int = 100, seed: int = 0, kind: str = "mixed", fmt: str = "png"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, img in enumerate(synthetic_set(n, height, width, seed, kind)):
        p = directory / f"synth_{i:04d}.{fmt}"
        write_rgb(p, img)
        paths.append(p)
    return paths


# --- reports ----------------------------------------------------------------

def model_digest(model: DemosaicModel | None) -> str:
    if model is None:
        return "hqli-baseline"
    return hashlib.sha256(model.to_bytes()).hexdigest()


def fingerprint(**items) -> str:
    payload = dict(items)
    payload.setdefault("package", __version__)
    payload.setdefault("numpy", np.__version__)
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class BenchmarkReport:
    names: list[str]
    rows: list[tuple[float, float, float, float]]
    params: dict[str, int]
    flops: dict[str, int]
    flops_size: tuple[int, int]
    fingerprint: str
    timings: dict[str, float] = field(default_factory=dict)
    errors: dict[str, str] = field(default_factory=dict)
    skipped: list[tuple[str, str]] = field(default_factory=list)

    @property
    def mean(self) -> tuple[float, float, float, float]:
        if not self.rows:
            return (math.nan,) * 4
        cols = list(zip(*self.rows))
        return tuple(mean_psnr(c) for c in cols)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# fingerprint: {self.fingerprint}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["image", "R", "G", "B", "CPSNR"])
        for name, row in zip(self.names, self.rows):
            w.writerow([name] + [_fmt(v) for v in row])
        w.writerow(["mean"] + [_fmt(v) for v in self.mean])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    def table(self) -> str:
        lines = [f"{'image':<24} {'R':>8} {'G':>8} {'B':>8} {'CPSNR':>8}"]
        for name, row in zip(self.names, self.rows):
            lines.append(f"{name:<24} " + " ".join(f"{_fmt(v, 2):>8}" for v in row))
        lines.append(f"{'mean':<24} " + " ".join(f"{_fmt(v, 2):>8}" for v in self.mean))
        lines.append("")
        lines.append(params_table(self.params, self.flops, self.flops_size))
        if self.timings:
            lines.append("")
            lines.append("wall time (s): " + ", ".join(f"{k}={v:.3f}" for k, v in self.timings.items()))
        for name, err in self.errors.items():
            lines.append(f"FAILED {name}: {err}")
        for name, why in self.skipped:
            lines.append(f"skipped {name}: {why}")
        lines.append(f"fingerprint: {self.fingerprint}")
        return "\n".join(lines)


def _fmt(v: float, digits: int = 6) -> str:
    if math.isinf(v):
        return "inf"
    if math.isnan(v):
        return "nan"
    return f"{v:.{digits}f}"


def params_flops(specs: dict, height: int = 100, width: int = 100):
    params = {n: N.count_params(specs[n]) for n in N.NETWORK_NAMES}
    flops = {n: N.count_flops(specs[n], height, width) for n in N.NETWORK_NAMES}
    params["total"] = sum(params[n] for n in N.NETWORK_NAMES)
    flops["total"] = sum(flops[n] for n in N.NETWORK_NAMES)
    return params, flops


def params_table(params: dict, flops: dict, size: tuple[int, int]) -> str:
    h, w = size
    lines = [f"{'network':<8} {'params':>10} {'FLOPs @ ' + f'{h}x{w}':>20} {'x1e9':>8}"]
    for key in list(N.NETWORK_NAMES) + ["total"]:
        lines.append(f"{key:<8} {params[key]:>10,} {flops[key]:>20,} {flops[key] / 1e9:>8.4f}")
    return "\n".join(lines)


def evaluate(
    dataset: Dataset,
    model: DemosaicModel | None = None,
    layout="RGGB",
    crop: int = 0,
    threads: int = 1,
    flops_size: tuple[int, int] = (100, 100),
) -> BenchmarkReport:
    """Mosaic every ground-truth image, demosaic it, and score per channel.

    ``model=None`` scores the clipped HQLI baseline.
    """
    layout = BayerLayout.parse(layout)
    mosaics = [mosaic(img, layout) for img in dataset.images]
    t0 = time.perf_counter()
    if model is None:
        outputs = [clip(hqli_rgb(m)) for m in mosaics]
        errors, timings = {}, {"hqli": time.perf_counter() - t0}
        specs = {n: N.build_spec(n, 1, 0) for n in N.NETWORK_NAMES}
    else:
        res = demosaic_batch(mosaics, model, parallelism=threads)
        outputs, timings = res.images, res.timings
        errors = {dataset.names[i]: str(e) for i, e in res.errors.items()}
        specs = model.specs
    timings["total"] = time.perf_counter() - t0

    names, rows = [], []
    for name, truth, est in zip(dataset.names, dataset.images, outputs):
        if est is None:
            continue
        names.append(name)
        rows.append(psnr_report(truth, est, crop=crop).as_tuple())

    if model is None:
        params = {n: 0 for n in N.NETWORK_NAMES} | {"total": 0}
        flops = dict(params)
    else:
        params, flops = params_flops(specs, *flops_size)
    fp = fingerprint(model=model_digest(model), layout=layout.value, crop=crop, images=dataset.names)
    return BenchmarkReport(names, rows, params, flops, flops_size, fp, timings, errors, list(dataset.skipped))
