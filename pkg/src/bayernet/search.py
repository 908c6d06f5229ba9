"""Progressive width/depth/skip search under a parameter budget.

The search is driven by an oracle mapping a :class:`NetworkSpec` to a
validation error.  Phases:

1. train the deepest plain network that fits the budget for every width and
   keep the best width (depth capped by both :func:`depth_bound` and the
   exact weight count);
2. drop hidden layers five at a time, then two at a time, stopping once the
   error strictly increases;
3. at that parameter count, trade plain layers for skip-concatenation
   layers (fewer layers, same weights) and keep the shallowest variant that
   is no worse;
4. dilate the hidden convolutions of the colour-difference networks.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .nn import network as N

log = logging.getLogger(__name__)

MAX_VARIANTS = 32


@dataclass(frozen=True)
class SearchBudget:
    max_params: int = 600_000
    max_depth: int = N.MAX_DEPTH
    widths: tuple[int, ...] = (32, 64, 128)
    steps: tuple[int, ...] = (5, 2)
    min_hidden: int = 1
    dilation: int = 3

    def __post_init__(self):
        if self.max_params <= 0 or not self.widths:
            raise ValueError("budget must be positive and widths non-empty")

    @classmethod
    def from_file(cls, path) -> "SearchBudget":
        kwargs = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, value = (s.strip() for s in line.split("=", 1))
            if key in ("widths", "steps"):
                kwargs[key] = tuple(int(v) for v in value.replace(",", " ").split())
            elif key == "max_params":
                kwargs[key] = int(float(value))
            elif key in ("max_depth", "min_hidden", "dilation"):
                kwargs[key] = int(value)
            else:
                raise ValueError(f"unknown budget key {key!r}")
        return cls(**kwargs)


def depth_bound(K: int, C: int, budget: SearchBudget | None = None) -> int:
    """Depth limit ``min(max_depth, (P - 9(CK + K)) // K^2 + 2)``.

    Hidden layers are charged ``K^2`` here, so for large ``K`` this is looser
    than the exact 3x3 count; :func:`max_hidden` applies both limits.
    """
    budget = budget or SearchBudget()
    if K < 1 or C < 1:
        raise ValueError("K and C must be positive")
    return min(budget.max_depth, (budget.max_params - 9 * (C * K + K)) // (K * K) + 2)


def max_hidden(K: int, C: int, budget: SearchBudget | None = None) -> int:
    """Most plain hidden layers a width-``K`` network can have.

    Bounded by :func:`depth_bound` and by the exact 3x3 weight count
    ``9CK + 9K^2 h + 9K`` staying within ``max_params``.
    """
    budget = budget or SearchBudget()
    fit = (budget.max_params - 9 * C * K - 9 * K) // (9 * K * K)
    return min(depth_bound(K, C, budget) - 2, fit)


def _place_skips(n_hidden: int, singles: int, doubles: int):
    """Choose layer positions for concat layers, or ``None`` if impossible.

    Positions are taken every five layers from layer 6, then any remaining
    eligible layer from the top down.  Two-source layers take the deepest
    positions and must be at least layer 11 so that ``i - 10`` is hidden.
    """
    eligible = list(range(N.MIN_SKIP_LAYER, n_hidden + 1))
    need = singles + doubles
    if need > len(eligible):
        return None
    preferred = [i for i in eligible if (i - N.MIN_SKIP_LAYER) % 5 == 0]
    rest = [i for i in reversed(eligible) if i not in preferred]
    chosen = sorted((preferred + rest)[:need])
    if doubles:
        top = chosen[-doubles:]
        if top[0] < 11:
            return None
        skips = {i: (i - 5, i - 10) for i in top}
        skips.update({i: (i - 5,) for i in chosen[:-doubles]})
    else:
        skips = {i: (i - 5,) for i in chosen}
    return skips


def skip_variants(spec: N.NetworkSpec, limit: int = MAX_VARIANTS) -> list[N.NetworkSpec]:
    """Shallower specs with the same conv weight count, built from concat layers.

    A plain hidden layer holds ``9 K^2`` weights, a one-source concat layer
    twice that and a two-source layer three times; ``h + 2s + 3t`` is held at
    the original hidden count.  Ordered by depth descending, then by the
    number of two-source layers; at most ``limit`` variants.
    """
    if spec.depth < 7:
        return []
    units = sum(1 + len(l.skip_sources) for l in spec.hidden)
    dil = spec.hidden[0].dilation if spec.hidden else 1
    out = []
    for removed in range(1, units):
        for t in range(0, removed // 2 + 1):
            s = removed - 2 * t
            h = units - 2 * s - 3 * t
            if h < 0:
                continue
            n_hidden = h + s + t
            skips = _place_skips(n_hidden, s, t)
            if skips is None:
                continue
            out.append(N.build_spec(spec.name, spec.width, n_hidden, dil, skips))
            if len(out) >= limit:
                return out
    return out


@dataclass
class Candidate:
    cid: int
    phase: str
    spec: N.NetworkSpec
    error: float

    @property
    def params(self) -> int:
        return N.count_params(self.spec)


@dataclass
class SearchResult:
    spec: N.NetworkSpec
    width: int
    depth: int
    params: int
    trace: list[Candidate] = field(default_factory=list)

    def write_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["candidate", "phase", "K", "depth", "params", "skips", "val_error"])
            for c in self.trace:
                w.writerow([c.cid, c.phase, c.spec.width, c.spec.depth, c.params, c.spec.skip_layout(), repr(c.error)])

    def write_spec(self, path) -> None:
        Path(path).write_text(json.dumps(self.spec.to_dict(), indent=2) + "\n")


def load_spec(path) -> N.NetworkSpec:
    return N.NetworkSpec.from_dict(json.loads(Path(path).read_text()))


def progressive_search(
    target: str,
    budget: SearchBudget | None,
    oracle: Callable[[N.NetworkSpec], float],
) -> SearchResult:
    budget = budget or SearchBudget()
    C = N.INPUT_CHANNELS[target]
    trace: list[Candidate] = []
    counter = itertools.count()

    def evaluate(spec, phase):
        if N.count_params(spec) > budget.max_params or spec.depth > budget.max_depth:
            raise ValueError(f"candidate {spec.skip_layout()} violates the budget")
        err = float(oracle(spec))
        trace.append(Candidate(next(counter), phase, spec, err))
        log.info("%s %s K=%d D=%d err=%.6g", target, phase, spec.width, spec.depth, err)
        return err

    # phase 1: widths at their maximal depth
    best = None
    for K in budget.widths:
        hidden = max_hidden(K, C, budget)
        if hidden < budget.min_hidden:
            continue
        spec = N.build_spec(target, K, hidden)
        err = evaluate(spec, "width")
        if best is None or err < best[1]:
            best = (spec, err)
    if best is None:
        raise ValueError("no width fits the budget")
    spec, err = best

    # phase 2: shrink depth; equal error keeps shrinking
    for step in budget.steps:
        while True:
            hidden = len(spec.hidden) - step
            if hidden < budget.min_hidden:
                break
            cand = N.build_spec(target, spec.width, hidden)
            cand_err = evaluate(cand, f"depth-{step}")
            if cand_err > err:
                break
            spec, err = cand, cand_err

    # phase 3: same weights, fewer layers through skip concatenation
    chosen, chosen_err = spec, err
    for variant in skip_variants(spec):
        v_err = evaluate(variant, "skip")
        if v_err <= err and (
            variant.depth < chosen.depth or (variant.depth == chosen.depth and v_err < chosen_err)
        ):
            chosen, chosen_err = variant, v_err

    # phase 4: dilation for the colour-difference networks
    if target != "g":
        chosen = N.with_dilation(chosen, budget.dilation)

    return SearchResult(chosen, chosen.width, chosen.depth, N.count_params(chosen), trace)


class TrainingOracle:
    """Validation error after a short training run of a candidate spec."""

    def __init__(self, train_set, val_set, cfg, epochs: int = 2):
        self.train_set = train_set
        self.val_set = val_set
        self.cfg = cfg
        self.epochs = epochs

    def __call__(self, spec: N.NetworkSpec) -> float:
        from .train import evaluate_loss, train

        result = train(spec, self.train_set, self.val_set, self.cfg, epochs=self.epochs)
        if len(self.val_set):
            return result.trace[-1].val_loss
        kind = self.cfg.loss_for(spec.name)
        return float(evaluate_loss(spec, result.weights, self.train_set, kind, self.cfg))


def enumerate_all(target: str, budget: SearchBudget | None = None):
    """Every spec the search could visit before dilation; for budget checks."""
    budget = budget or SearchBudget()
    C = N.INPUT_CHANNELS[target]
    for K in budget.widths:
        top = max_hidden(K, C, budget)
        for hidden in range(budget.min_hidden, top + 1):
            spec = N.build_spec(target, K, hidden)
            yield spec
            yield from skip_variants(spec)


__all__ = [
    "SearchBudget",
    "SearchResult",
    "TrainingOracle",
    "depth_bound",
    "enumerate_all",
    "load_spec",
    "max_hidden",
    "progressive_search",
    "skip_variants",
]
