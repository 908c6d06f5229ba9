"""Supervised training of the green, green-red and green-blue residual networks."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .hqli import hqli
from .image import mosaic
from .nn import network as N

log = logging.getLogger(__name__)

TARGETS = N.NETWORK_NAMES


@dataclass
class TrainConfig:
    batch_size: int = 128
    initial_lr: float = 0.005
    lr_halving_period: int = 5
    lr_floor: float = 0.005 / 64
    epochs: int = 30
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    p: float = 0.9
    eps_p: float = 1e-6
    pnorm_root: bool = False
    loss: str = "auto"
    seed: int = 0
    layout: str = "RGGB"
    patch_size: int = 50
    train_fraction: float = 0.95
    discard: int = 1792
    bn_momentum: float = 0.1
    dtype: str = "float32"

    def __post_init__(self):
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if self.lr_floor > self.initial_lr:
            raise ValueError("lr_floor must not exceed initial_lr")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be positive and epochs non-negative")
        if self.loss not in ("auto", "mse", "pnorm"):
            raise ValueError(f"unknown loss {self.loss!r}")

    def loss_for(self, target: str) -> str:
        if self.loss != "auto":
            return self.loss
        return "mse" if target == "g" else "pnorm"

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        """Read ``key = value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            kwargs[key] = _coerce(types[key], value)
        return cls(**kwargs)

    def to_file(self, path) -> None:
        lines = [f"{k} = {v}" for k, v in asdict(self).items()]
        Path(path).write_text("\n".join(lines) + "\n")


def _coerce(type_name, value: str):
    t = type_name if isinstance(type_name, str) else type_name.__name__
    if t == "bool":
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if t == "int":
        return int(value)
    if t == "float":
        # allow a plain ratio such as "0.005/64"
        if "/" in value:
            num, den = value.split("/", 1)
            return float(num) / float(den)
        return float(value)
    return value


class TrainingDiverged(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def augment(img: np.ndarray, target: str) -> list[np.ndarray]:
    """Original plus first-row-dropped and first-column-dropped copies.

    The difference networks additionally get the copy with both removed.
    """
    out = [img, img[1:], img[:, 1:]]
    if target != "g":
        out.append(img[1:, 1:])
    return out


def make_example(rgb: np.ndarray, target: str, layout):
    """Network input tensor and residual label for a full RGB image."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    r0, g0, b0 = hqli(mosaic(rgb, layout))
    if target == "g":
        return np.stack([r0, g0, b0], axis=-1), g - g0
    if target == "gr":
        return np.stack([g0 - r0, g0], axis=-1), (g - r) - (g0 - r0)
    if target == "gb":
        return np.stack([g0 - b0, g0], axis=-1), (g - b) - (g0 - b0)
    raise ValueError(f"unknown target {target!r}")


@dataclass
class PatchSet:
    """Stacked training examples.

    ``inputs`` is ``(n, P, P, C)``, ``labels`` is ``(n, P, P)``; ``image_ids``
    records the shuffled source image of every patch.
    """

    inputs: np.ndarray
    labels: np.ndarray
    image_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, idx):
        return self.inputs[idx], self.labels[idx]


def _patches(rgb, target, layout, size):
    x, y = make_example(rgb, target, layout)
    h, w = y.shape
    for i in range(0, h - size + 1, size):
        for j in range(0, w - size + 1, size):
            yield x[i : i + size, j : j + size], y[i : i + size, j : j + size]


def build_dataset(images, target: str, layout=None, cfg: TrainConfig | None = None):
    """Shuffle, augment, patch and split into ``(train, val)`` PatchSets.

    Patches of the first ``train_fraction`` of the shuffled images train; the
    next ``cfg.discard`` patches (counted after augmentation) are dropped and
    the remainder validates.
    """
    cfg = cfg or TrainConfig()
    layout = layout or cfg.layout
    rng = np.random.default_rng(cfg.seed)
    order = rng.permutation(len(images))
    n_train = int(math.floor(len(images) * cfg.train_fraction + 1e-9))

    xs, ys, ids = [], [], []
    for rank, idx in enumerate(order):
        for aug in augment(np.asarray(images[idx], dtype=np.float64), target):
            if min(aug.shape[:2]) < max(cfg.patch_size, 5):
                continue
            for x, y in _patches(aug, target, layout, cfg.patch_size):
                xs.append(x)
                ys.append(y)
                ids.append(rank)
    ids = np.asarray(ids, dtype=int)
    split = int(np.searchsorted(ids, n_train))
    val_start = split + cfg.discard
    if val_start >= len(ys):
        raise ValueError(
            f"validation set is empty: {len(ys) - split} patch(es) follow the training images "
            f"but {cfg.discard} are discarded; lower the discard count for small datasets"
        )

    def stack(sl):
        c = N.INPUT_CHANNELS[target]
        p = cfg.patch_size
        if sl.start >= sl.stop:
            return PatchSet(np.zeros((0, p, p, c)), np.zeros((0, p, p)), ids[sl])
        return PatchSet(np.stack(xs[sl]), np.stack(ys[sl]), ids[sl])

    return stack(slice(0, split)), stack(slice(val_start, len(ys)))


# Losses: per-example sums, averaged over the batch.

def loss_mse(pred, label) -> float:
    r = np.asarray(pred) - np.asarray(label)
    r = r.reshape(len(r), -1) if r.ndim > 1 else r.reshape(1, -1)
    return float(np.mean(np.sum(r * r, axis=1)))


def loss_pnorm(pred, label, p: float = 0.9, eps_p: float = 1e-6, root: bool = False) -> float:
    """Smoothed ``sum |r|^p`` per example, or its ``1/p`` power with ``root``."""
    r = np.asarray(pred) - np.asarray(label)
    r = r.reshape(len(r), -1) if r.ndim > 1 else r.reshape(1, -1)
    s = np.sum((r * r + eps_p * eps_p) ** (p / 2), axis=1)
    if root:
        s = s ** (1.0 / p)
    return float(np.mean(s))


def loss_and_grad(kind: str, pred, label, cfg: TrainConfig):
    """Loss value and its gradient with respect to ``pred``."""
    r = pred - label
    n = len(r)
    if kind == "mse":
        flat = r.reshape(n, -1)
        return float(np.mean(np.sum(flat * flat, axis=1))), (2.0 / n) * r
    if kind == "pnorm":
        p, e2 = cfg.p, cfg.eps_p * cfg.eps_p
        base = r * r + e2
        terms = base ** (p / 2)
        dterm = p * r * base ** (p / 2 - 1)
        sums = terms.reshape(n, -1).sum(axis=1)
        if cfg.pnorm_root:
            outer = (1.0 / p) * sums ** (1.0 / p - 1)
            grad = dterm * outer.reshape((n,) + (1,) * (r.ndim - 1)) / n
            return float(np.mean(sums ** (1.0 / p))), grad
        return float(np.mean(sums)), dterm / n
    raise ValueError(f"unknown loss {kind!r}")


def backward(spec, weights, x, y, kind: str, cfg: TrainConfig | None = None):
    """Batch loss, parameter gradients and the forward tape.

    Batch norm runs in training mode (batch statistics).
    """
    cfg = cfg or TrainConfig()
    pred, tape = N.forward_train(spec, weights, x)
    loss, dpred = loss_and_grad(kind, pred, y, cfg)
    if not math.isfinite(loss):
        raise FloatingPointError("non-finite loss")
    return loss, N.backward(spec, weights, tape, dpred), tape


class Adam:
    """Per-array first/second moment state and the bias-corrected update."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict = {}
        self.v: dict = {}
        self.t = 0

    def step(self, params, grads, lr: float) -> None:
        """Update ``params`` in place; both map keys to arrays."""
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for key, theta in params.items():
            g = grads[key]
            if key not in self.m:
                self.m[key] = np.zeros_like(theta)
                self.v[key] = np.zeros_like(theta)
            m, v = self.m[key], self.v[key]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            theta -= lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)

    def state_dict(self) -> dict:
        out = {"t": np.array(self.t)}
        for key in self.m:
            tag = "_".join(map(str, key)) if isinstance(key, tuple) else str(key)
            out[f"m/{tag}"] = self.m[key]
            out[f"v/{tag}"] = self.v[key]
        return out

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            np.savez(fh, **self.state_dict())


def weight_params(weights: N.NetworkWeights) -> dict:
    return {(i, name): arr for i, name, arr in weights.params()}


def grad_params(grads) -> dict:
    return {(i, name): g for i, layer in enumerate(grads) for name, g in layer.items()}


def lr_schedule(epoch: int, cfg: TrainConfig | None = None) -> float:
    """Halve every ``lr_halving_period`` epochs (1-based) down to the floor."""
    cfg = cfg or TrainConfig()
    if epoch < 1:
        raise ValueError("epochs are numbered from 1")
    halvings = (epoch - 1) // cfg.lr_halving_period
    return max(cfg.initial_lr * 2.0 ** (-halvings), cfg.lr_floor)


@dataclass
class TraceRow:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float


@dataclass
class TrainResult:
    weights: N.NetworkWeights
    trace: list[TraceRow]
    optimizer: Adam
    iterations: int


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "lr", "train_loss", "val_loss"])
        for row in trace:
            w.writerow([row.epoch, repr(row.lr), repr(row.train_loss), repr(row.val_loss)])


def evaluate_loss(spec, weights, data: PatchSet, kind: str, cfg: TrainConfig, chunk: int = 64, training_stats: bool = False):
    """Mean per-example loss over ``data`` (``nan`` when empty)."""
    if len(data) == 0:
        return math.nan
    dtype = np.dtype(cfg.dtype)
    total = 0.0
    for start in range(0, len(data), chunk):
        x = data.inputs[start : start + chunk].astype(dtype)
        y = data.labels[start : start + chunk].astype(dtype)
        if training_stats:
            pred, _ = N.forward_train(spec, weights, x)
        else:
            pred = N.forward(spec, weights, x)
        if kind == "mse":
            total += loss_mse(pred, y) * len(y)
        else:
            total += loss_pnorm(pred, y, cfg.p, cfg.eps_p, cfg.pnorm_root) * len(y)
    return total / len(data)


def train(
    spec: N.NetworkSpec,
    train_set: PatchSet,
    val_set: PatchSet | None,
    cfg: TrainConfig | None = None,
    weights: N.NetworkWeights | None = None,
    max_iters: int | None = None,
    epochs: int | None = None,
) -> TrainResult:
    """Run ADAM over shuffled mini-batches; deterministic for a fixed seed."""
    cfg = cfg or TrainConfig()
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    epochs = cfg.epochs if epochs is None else epochs
    kind = cfg.loss_for(spec.name)
    dtype = np.dtype(cfg.dtype)
    rng = np.random.default_rng(cfg.seed)
    if weights is None:
        weights = N.NetworkWeights.initialize(spec, np.random.default_rng(cfg.seed + 1))
    weights = weights.astype(dtype)
    weights.check(spec)
    params = weight_params(weights)
    opt = Adam(cfg.beta1, cfg.beta2, cfg.adam_eps)
    trace: list[TraceRow] = []
    it = 0
    n = len(train_set)
    for epoch in range(1, epochs + 1):
        lr = lr_schedule(epoch, cfg)
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, cfg.batch_size):
            if max_iters is not None and it >= max_iters:
                break
            idx = np.sort(order[start : start + cfg.batch_size])
            x = train_set.inputs[idx].astype(dtype)
            y = train_set.labels[idx].astype(dtype)
            try:
                loss, grads, tape = backward(spec, weights, x, y, kind, cfg)
            except FloatingPointError:
                raise TrainingDiverged(f"loss became non-finite at epoch {epoch}, iteration {it}", trace) from None
            opt.step(params, grad_params(grads), lr)
            N.update_running_stats(spec, weights, tape, cfg.bn_momentum)
            batch_losses.append(loss)
            it += 1
        if not batch_losses:
            break
        val = evaluate_loss(spec, weights, val_set, kind, cfg) if val_set is not None else math.nan
        row = TraceRow(epoch, lr, float(np.mean(batch_losses)), val)
        trace.append(row)
        log.info("%s epoch %d lr %.3g train %.6g val %.6g", spec.name, epoch, lr, row.train_loss, val)
        if not math.isfinite(row.train_loss) or (val_set is not None and len(val_set) and not math.isfinite(val)):
            raise TrainingDiverged(f"non-finite loss after epoch {epoch}", trace)
    return TrainResult(weights.astype(np.float64), trace, opt, it)
