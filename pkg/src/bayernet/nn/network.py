"""Declarative network specs, their weights, and the forward/backward passes.

A network is a chain of 3x3 conv blocks: an input conv+ReLU, hidden
conv+BN+ReLU blocks, and a pure-conv output layer predicting one residual
plane.  Layer ``i`` consumes the output of layer ``i - 1``, optionally
channel-concatenated with the outputs of earlier hidden layers listed in
``skip_sources``.  Layer 0 is the input layer.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import layers as L

INPUT = "input_conv_relu"
HIDDEN = "hidden_conv_bn_relu"
OUTPUT = "output_conv"
KINDS = (INPUT, HIDDEN, OUTPUT)

NETWORK_NAMES = ("g", "gr", "gb")
INPUT_CHANNELS = {"g": 3, "gr": 2, "gb": 2}
MAX_DEPTH = 40
MIN_SKIP_LAYER = 6
BN_EPS = 1e-5


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_channels: int
    out_channels: int
    dilation: int = 1
    skip_sources: tuple[int, ...] = ()

    @property
    def weight_count(self) -> int:
        return L.KSIZE * L.KSIZE * self.in_channels * self.out_channels


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_channels: int
    width: int
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        self.validate()

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def hidden(self) -> tuple[LayerSpec, ...]:
        return self.layers[1:-1]

    def validate(self) -> None:
        if self.name not in NETWORK_NAMES:
            raise SpecError(f"unknown network name {self.name!r}")
        if len(self.layers) < 2:
            raise SpecError("a network needs at least an input and an output layer")
        if len(self.layers) > MAX_DEPTH:
            raise SpecError(f"depth {len(self.layers)} exceeds {MAX_DEPTH}")
        K = self.width
        for i, layer in enumerate(self.layers):
            expected = INPUT if i == 0 else OUTPUT if i == len(self.layers) - 1 else HIDDEN
            if layer.kind != expected:
                raise SpecError(f"layer {i}: expected kind {expected}, got {layer.kind}")
            if layer.dilation < 1:
                raise SpecError(f"layer {i}: dilation must be >= 1")
            if i == 0:
                if layer.in_channels != self.input_channels or layer.skip_sources:
                    raise SpecError("input layer must read the raw input tensor")
            else:
                for s in layer.skip_sources:
                    if not 1 <= s < i - 1:
                        raise SpecError(f"layer {i}: skip source {s} is not an earlier hidden layer")
                if layer.skip_sources and i < MIN_SKIP_LAYER:
                    raise SpecError(f"layer {i}: skip concatenation only allowed from layer {MIN_SKIP_LAYER}")
                want_in = K * (1 + len(layer.skip_sources))
                if layer.in_channels != want_in:
                    raise SpecError(f"layer {i}: in_channels {layer.in_channels} != {want_in}")
            want_out = 1 if i == len(self.layers) - 1 else K
            if layer.out_channels != want_out:
                raise SpecError(f"layer {i}: out_channels {layer.out_channels} != {want_out}")

    def skip_layout(self) -> str:
        """Compact text form of the skip connections, e.g. ``"6<1;11<6"``."""
        parts = [
            f"{i}<{','.join(map(str, l.skip_sources))}"
            for i, l in enumerate(self.layers)
            if l.skip_sources
        ]
        return ";".join(parts) or "-"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "input_channels": self.input_channels,
            "width": self.width,
            "layers": [
                {
                    "kind": l.kind,
                    "in_channels": l.in_channels,
                    "out_channels": l.out_channels,
                    "dilation": l.dilation,
                    "skip_sources": list(l.skip_sources),
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        layers = [
            LayerSpec(
                kind=l["kind"],
                in_channels=int(l["in_channels"]),
                out_channels=int(l["out_channels"]),
                dilation=int(l.get("dilation", 1)),
                skip_sources=tuple(int(s) for s in l.get("skip_sources", ())),
            )
            for l in d["layers"]
        ]
        return cls(d["name"], int(d["input_channels"]), int(d["width"]), tuple(layers))


def build_spec(
    name: str,
    width: int,
    hidden: int,
    dilation: int = 1,
    skips: dict[int, tuple[int, ...]] | None = None,
) -> NetworkSpec:
    """Assemble a spec from a hidden-layer count and ``{layer: sources}`` skips."""
    skips = skips or {}
    cin = INPUT_CHANNELS[name]
    layers = [LayerSpec(INPUT, cin, width)]
    for i in range(1, hidden + 1):
        src = tuple(skips.get(i, ()))
        layers.append(LayerSpec(HIDDEN, width * (1 + len(src)), width, dilation, src))
    layers.append(LayerSpec(OUTPUT, width, 1))
    return NetworkSpec(name, cin, width, tuple(layers))


def with_dilation(spec: NetworkSpec, dilation: int) -> NetworkSpec:
    layers = tuple(
        replace(l, dilation=dilation) if l.kind == HIDDEN else l for l in spec.layers
    )
    return replace(spec, layers=layers)


# Concat layers sit every five layers from layer 6, each reading layer i - 5.
_DEFAULT_SKIPS = {i: (i - 5,) for i in (6, 11, 16, 21, 26)}


def default_spec(name: str) -> NetworkSpec:
    """The full-size architectures (277,632 / 314,208 / 332,640 conv weights)."""
    if name == "g":
        return build_spec("g", 32, hidden=30)
    if name == "gr":
        return build_spec("gr", 32, hidden=29, dilation=3, skips=_DEFAULT_SKIPS)
    if name == "gb":
        return build_spec("gb", 32, hidden=31, dilation=3, skips=_DEFAULT_SKIPS)
    raise SpecError(f"unknown network name {name!r}")


def reduced_spec(name: str, hidden: int = 3, width: int = 32) -> NetworkSpec:
    """Small plain variant for desk-scale training."""
    return build_spec(name, width, hidden, dilation=1 if name == "g" else 3)


def count_params(spec: NetworkSpec) -> int:
    """Conv kernel weights only; biases and BN parameters are not counted."""
    return sum(l.weight_count for l in spec.layers)


def count_flops(spec: NetworkSpec, height: int, width: int) -> int:
    """One multiply-accumulate per kernel weight per pixel."""
    return count_params(spec) * height * width


class NetworkWeights:
    """Per-layer parameter arrays.

    Each entry of ``layers`` maps ``"w"`` and ``"b"`` to the conv kernel and
    bias; hidden layers also carry ``"gamma"``, ``"beta"``, ``"mean"`` and
    ``"var"``.
    """

    TRAINABLE = ("w", "b", "gamma", "beta")

    def __init__(self, layers: list[dict[str, np.ndarray]], eps: float = BN_EPS):
        self.layers = layers
        self.eps = eps

    @classmethod
    def zeros(cls, spec: NetworkSpec, dtype=np.float64, bn_identity: bool = False):
        layers = []
        for l in spec.layers:
            p = {
                "w": np.zeros((L.KSIZE, L.KSIZE, l.in_channels, l.out_channels), dtype=dtype),
                "b": np.zeros(l.out_channels, dtype=dtype),
            }
            if l.kind == HIDDEN:
                fill = 1.0 if bn_identity else 0.0
                p["gamma"] = np.full(l.out_channels, fill, dtype=dtype)
                p["beta"] = np.zeros(l.out_channels, dtype=dtype)
                p["mean"] = np.zeros(l.out_channels, dtype=dtype)
                p["var"] = np.full(l.out_channels, fill, dtype=dtype)
            layers.append(p)
        return cls(layers)

    @classmethod
    def initialize(cls, spec: NetworkSpec, rng: np.random.Generator, dtype=np.float64):
        """He-normal conv kernels, zero biases, identity batch norm."""
        weights = cls.zeros(spec, dtype=dtype, bn_identity=True)
        for l, p in zip(spec.layers, weights.layers):
            fan_in = L.KSIZE * L.KSIZE * l.in_channels
            gain = 1.0 if l.kind == OUTPUT else 2.0
            p["w"][...] = rng.standard_normal(p["w"].shape) * np.sqrt(gain / fan_in)
        return weights

    def params(self):
        """Yield ``(layer_index, name, array)`` for every trainable array."""
        for i, p in enumerate(self.layers):
            for name in self.TRAINABLE:
                if name in p:
                    yield i, name, p[name]

    def copy(self) -> "NetworkWeights":
        return NetworkWeights([{k: v.copy() for k, v in p.items()} for p in self.layers], self.eps)

    def astype(self, dtype) -> "NetworkWeights":
        return NetworkWeights(
            [{k: v.astype(dtype) for k, v in p.items()} for p in self.layers], self.eps
        )

    def check(self, spec: NetworkSpec) -> None:
        if len(self.layers) != spec.depth:
            raise SpecError(f"weights have {len(self.layers)} layers, spec has {spec.depth}")
        for i, (l, p) in enumerate(zip(spec.layers, self.layers)):
            if p["w"].shape != (L.KSIZE, L.KSIZE, l.in_channels, l.out_channels):
                raise SpecError(f"layer {i}: kernel shape {p['w'].shape} does not match spec")
            if p["b"].shape != (l.out_channels,):
                raise SpecError(f"layer {i}: bias shape mismatch")
            if l.kind == HIDDEN:
                for k in ("gamma", "beta", "mean", "var"):
                    if k not in p or p[k].shape != (l.out_channels,):
                        raise SpecError(f"layer {i}: missing or misshaped {k}")

    def __eq__(self, other):
        if not isinstance(other, NetworkWeights) or len(self.layers) != len(other.layers):
            return NotImplemented
        return all(
            p.keys() == q.keys() and all(np.array_equal(p[k], q[k]) for k in p)
            for p, q in zip(self.layers, other.layers)
        )


def _layer_input(spec: NetworkSpec, acts: list, i: int):
    layer = spec.layers[i]
    if i == 0 or not layer.skip_sources:
        return acts[i - 1] if i else None
    return np.concatenate([acts[i - 1]] + [acts[s] for s in layer.skip_sources], axis=-1)


def forward(spec: NetworkSpec, weights: NetworkWeights, x: np.ndarray) -> np.ndarray:
    """Inference pass (BN with running statistics).

    ``x`` is ``(H, W, C)`` or ``(N, H, W, C)``; the residual plane comes back
    as ``(H, W)`` or ``(N, H, W)`` respectively.
    """
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.shape[-1] != spec.input_channels:
        raise SpecError(f"input has {x.shape[-1]} channels, network {spec.name} expects {spec.input_channels}")
    acts = []
    for i, (layer, p) in enumerate(zip(spec.layers, weights.layers)):
        inp = x if i == 0 else _layer_input(spec, acts, i)
        y = L.conv2d(inp, p["w"], p["b"], layer.dilation)
        if layer.kind == HIDDEN:
            y = L.batch_norm_infer(y, p["gamma"], p["beta"], p["mean"], p["var"], weights.eps)
        if layer.kind != OUTPUT:
            y = L.relu(y)
        acts.append(y)
    out = acts[-1][..., 0]
    return out[0] if single else out


def forward_train(spec: NetworkSpec, weights: NetworkWeights, x: np.ndarray):
    """Training pass with batch statistics; returns ``(output, tape)``."""
    if x.shape[-1] != spec.input_channels:
        raise SpecError(f"input has {x.shape[-1]} channels, network {spec.name} expects {spec.input_channels}")
    acts, inputs, bn = [], [], []
    for i, (layer, p) in enumerate(zip(spec.layers, weights.layers)):
        inp = x if i == 0 else _layer_input(spec, acts, i)
        inputs.append(inp)
        y = L.conv2d(inp, p["w"], p["b"], layer.dilation)
        cache = None
        if layer.kind == HIDDEN:
            y, cache = L.batch_norm_train(y, p["gamma"], p["beta"], weights.eps)
        bn.append(cache)
        if layer.kind != OUTPUT:
            y = L.relu(y)
        acts.append(y)
    return acts[-1][..., 0], {"acts": acts, "inputs": inputs, "bn": bn}


def backward(spec: NetworkSpec, weights: NetworkWeights, tape: dict, dout: np.ndarray):
    """Back-propagate ``dLoss/dOutput`` (shape ``(N, H, W)``) through the tape.

    Returns a list parallel to ``weights.layers`` of gradient dicts for the
    trainable arrays.
    """
    acts, inputs, bn = tape["acts"], tape["inputs"], tape["bn"]
    n = len(spec.layers)
    dacts: list = [None] * n
    dacts[-1] = dout[..., None]
    grads: list[dict] = [dict() for _ in range(n)]
    K = spec.width
    for i in range(n - 1, -1, -1):
        layer, p = spec.layers[i], weights.layers[i]
        dy = dacts[i]
        if layer.kind != OUTPUT:
            dy = L.relu_backward(dy, acts[i])
        if layer.kind == HIDDEN:
            dy, grads[i]["gamma"], grads[i]["beta"] = L.batch_norm_backward(dy, p["gamma"], bn[i])
        dx, grads[i]["w"], grads[i]["b"] = L.conv2d_backward(dy, inputs[i], p["w"], layer.dilation, input_grad=i > 0)
        if i == 0:
            break
        chunks = [i - 1] + list(layer.skip_sources)
        for j, src in enumerate(chunks):
            part = dx[..., j * K : (j + 1) * K] if len(chunks) > 1 else dx
            dacts[src] = part if dacts[src] is None else dacts[src] + part
    return grads


def update_running_stats(spec: NetworkSpec, weights: NetworkWeights, tape: dict, momentum: float = 0.1):
    for layer, p, cache in zip(spec.layers, weights.layers, tape["bn"]):
        if cache is None:
            continue
        m = cache["count"]
        unbiased = cache["var"] * (m / max(m - 1, 1))
        p["mean"] *= 1.0 - momentum
        p["mean"] += momentum * cache["mean"]
        p["var"] *= 1.0 - momentum
        p["var"] += momentum * unbiased
