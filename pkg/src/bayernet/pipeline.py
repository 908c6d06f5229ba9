"""Mosaic -> HQLI -> three residual networks -> reassembled, clipped RGB."""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hqli import MIN_SIZE, difference_planes, hqli
from .image import MosaicImage, clip, pixel_sets
from .nn import network as N
from .nn import serialize


@dataclass
class DemosaicModel:
    """The green, green-red and green-blue networks with their weights."""

    specs: dict[str, N.NetworkSpec]
    weights: dict[str, N.NetworkWeights]
    version: int = serialize.FORMAT_VERSION

    def __post_init__(self):
        for name in N.NETWORK_NAMES:
            if name not in self.specs or name not in self.weights:
                raise ValueError(f"model is missing network {name!r}")
            spec = self.specs[name]
            if spec.name != name or spec.input_channels != N.INPUT_CHANNELS[name]:
                raise ValueError(f"network {name!r} has the wrong spec")
            self.weights[name].check(spec)

    @classmethod
    def initialize(cls, specs=None, seed: int = 0) -> "DemosaicModel":
        specs = specs or {n: N.default_spec(n) for n in N.NETWORK_NAMES}
        rng = np.random.default_rng(seed)
        return cls(dict(specs), {n: N.NetworkWeights.initialize(specs[n], rng) for n in N.NETWORK_NAMES})

    @classmethod
    def zeros(cls, specs=None) -> "DemosaicModel":
        specs = specs or {n: N.default_spec(n) for n in N.NETWORK_NAMES}
        return cls(dict(specs), {n: N.NetworkWeights.zeros(specs[n]) for n in N.NETWORK_NAMES})

    def networks(self):
        return [(self.specs[n], self.weights[n]) for n in N.NETWORK_NAMES]

    def param_counts(self) -> dict[str, int]:
        return {n: N.count_params(self.specs[n]) for n in N.NETWORK_NAMES}

    def save(self, path) -> None:
        serialize.save(path, self.networks())

    def to_bytes(self) -> bytes:
        return serialize.encode(self.networks())

    @classmethod
    def load(cls, path) -> "DemosaicModel":
        nets = serialize.load(path)
        return cls({s.name: s for s, _ in nets}, {s.name: w for s, w in nets})

    @classmethod
    def from_bytes(cls, data: bytes) -> "DemosaicModel":
        nets = serialize.decode(data)
        return cls({s.name: s for s, _ in nets}, {s.name: w for s, w in nets})


@dataclass
class DemosaicResult:
    rgb: np.ndarray
    timings: dict[str, float] = field(default_factory=dict)
    planes: dict[str, np.ndarray] | None = None


def _run(model: DemosaicModel, name: str, x: np.ndarray):
    t0 = time.perf_counter()
    out = N.forward(model.specs[name], model.weights[name], x)
    return out, time.perf_counter() - t0


def demosaic_full(m: MosaicImage, model: DemosaicModel, debug: bool = False, parallel: bool = False) -> DemosaicResult:
    """Demosaic and also return per-stage timings (and planes with ``debug``)."""
    h, w = m.shape
    if h < MIN_SIZE or w < MIN_SIZE:
        raise ValueError(f"image must be at least {MIN_SIZE}x{MIN_SIZE}, got {h}x{w}")
    t0 = time.perf_counter()
    r0, g0, b0 = hqli(m)
    gr0, gb0 = difference_planes(r0, g0, b0)
    timings = {"hqli": time.perf_counter() - t0}

    inputs = {
        "g": np.stack([r0, g0, b0], axis=-1),
        "gr": np.stack([gr0, g0], axis=-1),
        "gb": np.stack([gb0, g0], axis=-1),
    }
    if parallel:
        with ThreadPoolExecutor(max_workers=3) as pool:
            futures = {n: pool.submit(_run, model, n, inputs[n]) for n in N.NETWORK_NAMES}
            results = {n: f.result() for n, f in futures.items()}
    else:
        results = {n: _run(model, n, inputs[n]) for n in N.NETWORK_NAMES}
    res = {n: r[0] for n, r in results.items()}
    timings.update({n: r[1] for n, r in results.items()})

    sets = pixel_sets(h, w, m.layout)
    cfa = m.cfa
    g_hat = res["g"] + g0
    gr_hat = res["gr"] + gr0
    gb_hat = res["gb"] + gb0
    # sampled values override estimates before the colour planes are derived
    g_fix = np.where(sets.G, cfa, g_hat)
    r_fix = np.where(sets.R, cfa, g_fix - gr_hat)
    b_fix = np.where(sets.B, cfa, g_fix - gb_hat)
    rgb = clip(np.stack([r_fix, g_fix, b_fix], axis=-1))

    planes = None
    if debug:
        planes = {
            "r0": r0, "g0": g0, "b0": b0, "gr0": gr0, "gb0": gb0,
            "res_g": res["g"], "res_gr": res["gr"], "res_gb": res["gb"],
            "g_hat": g_hat, "gr_hat": gr_hat, "gb_hat": gb_hat,
        }
    return DemosaicResult(rgb, timings, planes)


def demosaic(m: MosaicImage, model: DemosaicModel) -> np.ndarray:
    """Full-resolution ``(H, W, 3)`` reconstruction in [0, 255]."""
    return demosaic_full(m, model).rgb


@dataclass
class BatchResult:
    images: list
    errors: dict[int, Exception]
    timings: dict[str, float]


def demosaic_batch(images, model: DemosaicModel, parallelism: int = 1) -> BatchResult:
    """Demosaic many mosaics; failures are collected per index and skipped.

    ``timings`` sums wall time per stage (``hqli``, ``g``, ``gr``, ``gb``)
    over the successful images.
    """
    images = list(images)

    def one(m):
        try:
            return demosaic_full(m, model, parallel=False)
        except Exception as exc:  # noqa: BLE001 - reported per image
            return exc

    if parallelism > 1 and len(images) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outs = list(pool.map(one, images))
    else:
        outs = [one(m) for m in images]

    timings = {k: 0.0 for k in ("hqli",) + N.NETWORK_NAMES}
    results, errors = [], {}
    for i, o in enumerate(outs):
        if isinstance(o, Exception):
            errors[i] = o
            results.append(None)
        else:
            results.append(o.rgb)
            for k, v in o.timings.items():
                timings[k] += v
    return BatchResult(results, errors, timings)
