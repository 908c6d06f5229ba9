"""Command-line interface: ``bayernet <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .hqli import difference_planes, hqli
from .image import BayerLayout, clip, mosaic
from .imageio import ImageFormatError, read_cfa, read_rgb, write_cfa, write_rgb
from .nn import network as N
from .nn.serialize import ModelFormatError
from .pipeline import DemosaicModel, demosaic_batch
from .search import SearchBudget, TrainingOracle, load_spec, progressive_search
from .train import TrainConfig, TrainingDiverged, build_dataset, train, write_trace

THREADS_ENV = "BAYERNET_THREADS"
EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3

log = logging.getLogger("bayernet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None


def _layout(text: str) -> BayerLayout:
    try:
        return BayerLayout.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _load_mosaic(path: Path, simulate: BayerLayout | None):
    if simulate is not None:
        return mosaic(read_rgb(path), simulate)
    if path.suffix.lower() != ".pgm":
        raise UsageError(f"{path}: RGB input needs --simulate LAYOUT (or pass a .pgm CFA)")
    return read_cfa(path)


def cmd_mosaic(args) -> int:
    write_cfa(args.output, mosaic(read_rgb(args.input), args.layout))
    return 0


def cmd_init(args) -> int:
    m = _load_mosaic(Path(args.input), args.simulate)
    r0, g0, b0 = hqli(m, method=args.method)
    out = Path(args.output)
    if out.suffix.lower() == ".npz":
        gr0, gb0 = difference_planes(r0, g0, b0)
        with open(out, "wb") as fh:
            np.savez(fh, r0=r0, g0=g0, b0=b0, gr0=gr0, gb0=gb0)
    else:
        write_rgb(out, clip(np.stack([r0, g0, b0], axis=-1)))
    return 0


def cmd_demosaic(args) -> int:
    model = DemosaicModel.load(args.model)
    m = _load_mosaic(Path(args.input), args.simulate)
    res = demosaic_batch([m], model, parallelism=args.threads)
    if res.errors:
        raise ValueError(str(res.errors[0]))
    write_rgb(args.output, res.images[0])
    if args.verbose:
        print(", ".join(f"{k}={v:.3f}s" for k, v in res.timings.items()))
    return 0


def _specs_for(args, targets):
    if getattr(args, "spec", None):
        if len(targets) != 1:
            raise UsageError("--spec applies to a single --target")
        spec = load_spec(args.spec)
        if spec.name != targets[0]:
            raise UsageError(f"spec is for network {spec.name!r}, not {targets[0]!r}")
        return {targets[0]: spec}
    if args.reduced:
        return {t: N.reduced_spec(t, args.reduced) for t in targets}
    return {t: N.default_spec(t) for t in targets}


def cmd_train(args) -> int:
    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    ds = bench.ingest_dataset(args.data)
    if not ds.images:
        raise ValueError(f"no usable images in {args.data}")
    targets = list(N.NETWORK_NAMES) if args.target == "all" else [args.target]
    specs = _specs_for(args, targets)
    if args.base:
        model = DemosaicModel.load(args.base)
    else:
        base = {n: N.reduced_spec(n, args.reduced) if args.reduced else N.default_spec(n) for n in N.NETWORK_NAMES}
        model = DemosaicModel.initialize(base, seed=cfg.seed)
    out = Path(args.out)
    for t in targets:
        tr, va = build_dataset(ds.images, t, cfg.layout, cfg)
        print(f"[{t}] {len(tr)} training / {len(va)} validation patches")
        result = train(specs[t], tr, va, cfg)
        model.specs[t] = specs[t]
        model.weights[t] = result.weights
        for row in result.trace:
            print(f"[{t}] epoch {row.epoch:3d} lr {row.lr:.3g} train {row.train_loss:.6g} val {row.val_loss:.6g}")
        if args.trace:
            trace_path = Path(args.trace)
            if len(targets) > 1:
                trace_path = trace_path.with_name(f"{trace_path.stem}_{t}{trace_path.suffix}")
            write_trace(trace_path, result.trace)
        result.optimizer.save(out.with_name(f"{out.name}.{t}.adam.npz"))
    DemosaicModel(model.specs, model.weights).save(out)
    return 0


def cmd_search(args) -> int:
    cfg = TrainConfig.from_file(args.config) if args.config else TrainConfig()
    budget = SearchBudget.from_file(args.budget) if args.budget else SearchBudget()
    ds = bench.ingest_dataset(args.data)
    if not ds.images:
        raise ValueError(f"no usable images in {args.data}")
    tr, va = build_dataset(ds.images, args.target, cfg.layout, cfg)
    oracle = TrainingOracle(tr, va, cfg, epochs=args.epochs)
    result = progressive_search(args.target, budget, oracle)
    if args.trace:
        result.write_trace(args.trace)
    if args.out:
        result.write_spec(args.out)
    print(f"chosen: K={result.width} depth={result.depth} params={result.params:,} skips={result.spec.skip_layout()}")
    return 0


def cmd_eval(args) -> int:
    ds = bench.ingest_dataset(args.data)
    if not ds.images:
        raise ValueError(f"no usable images in {args.data}; nothing to evaluate")
    if args.baseline:
        model = None
    elif args.model:
        model = DemosaicModel.load(args.model)
    else:
        raise UsageError("eval needs --model or --baseline")
    report = bench.evaluate(ds, model, layout=args.layout, crop=args.crop, threads=args.threads, flops_size=args.size)
    if args.csv:
        report.write_csv(args.csv)
    print(report.table())
    return 0


def cmd_report(args) -> int:
    if args.model:
        specs = DemosaicModel.load(args.model).specs
    else:
        specs = {n: N.default_spec(n) for n in N.NETWORK_NAMES}
    params, flops = bench.params_flops(specs, *args.size)
    print(bench.params_table(params, flops, args.size))
    return 0


def cmd_create(args) -> int:
    if args.architecture == "reduced":
        specs = {n: N.reduced_spec(n, args.hidden, args.width) for n in N.NETWORK_NAMES}
    else:
        specs = {n: N.default_spec(n) for n in N.NETWORK_NAMES}
    model = DemosaicModel.zeros(specs) if args.zero else DemosaicModel.initialize(specs, seed=args.seed)
    model.save(args.output)
    return 0


def cmd_synth(args) -> int:
    h, w = args.size
    paths = bench.write_synthetic(args.output, args.count, h, w, seed=args.seed, kind=args.kind, fmt=args.format)
    print(f"wrote {len(paths)} images to {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bayernet", description="Channel-by-channel CNN demosaicking of Bayer CFA images.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("mosaic", help="sample an RGB image through a Bayer CFA (writes PGM)")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--layout", type=_layout, default=BayerLayout.RGGB)
    s.set_defaults(func=cmd_mosaic)

    s = sub.add_parser("init", help="HQLI interpolation of a CFA plane")
    s.add_argument("input")
    s.add_argument("output", help=".png/.ppm (clipped) or .npz (exact planes)")
    s.add_argument("--simulate", type=_layout, metavar="LAYOUT")
    s.add_argument("--method", choices=("hqli", "bilinear"), default="hqli")
    s.set_defaults(func=cmd_init)

    s = sub.add_parser("demosaic", help="reconstruct RGB from a CFA plane")
    s.add_argument("input")
    s.add_argument("output")
    s.add_argument("--model", required=True)
    s.add_argument("--simulate", type=_layout, metavar="LAYOUT", help="treat input as RGB ground truth and mosaic it first")
    s.add_argument("--threads", type=int, default=_default_threads())
    s.set_defaults(func=cmd_demosaic)

    s = sub.add_parser("train", help="train one or all sub-networks")
    s.add_argument("--target", choices=N.NETWORK_NAMES + ("all",), required=True)
    s.add_argument("--data", required=True, help="directory of PNG/PPM training images")
    s.add_argument("--config", help="key = value training config")
    s.add_argument("--out", required=True, help="model file to write")
    s.add_argument("--base", help="existing model whose other networks are kept")
    s.add_argument("--spec", help="JSON network spec (e.g. from search)")
    s.add_argument("--reduced", type=int, metavar="HIDDEN", help="use reduced plain networks with HIDDEN layers")
    s.add_argument("--trace", help="CSV loss trace")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("search", help="progressive architecture search")
    s.add_argument("--target", choices=N.NETWORK_NAMES, required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--budget", help="key = value budget file (max_params, max_depth, widths, steps)")
    s.add_argument("--config", help="key = value training config for the oracle")
    s.add_argument("--epochs", type=int, default=2, help="training epochs per candidate")
    s.add_argument("--trace", help="CSV search trace")
    s.add_argument("--out", help="JSON spec of the winner")
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("eval", help="PSNR benchmark over a directory of ground-truth images")
    s.add_argument("--data", required=True)
    s.add_argument("--model")
    s.add_argument("--baseline", action="store_true", help="score the HQLI baseline instead of a model")
    s.add_argument("--layout", type=_layout, default=BayerLayout.RGGB)
    s.add_argument("--crop", type=int, default=0)
    s.add_argument("--csv")
    s.add_argument("--size", type=_size, default=(100, 100), help="image size for FLOPs, HxW")
    s.add_argument("--threads", type=int, default=_default_threads())
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("report", help="parameter and FLOPs table")
    s.add_argument("--model", help="model file (default: the full-size architecture)")
    s.add_argument("--size", type=_size, default=(100, 100))
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("create", help="write a freshly initialised or all-zero model")
    s.add_argument("output")
    s.add_argument("--architecture", choices=("default", "reduced"), default="default")
    s.add_argument("--hidden", type=int, default=3)
    s.add_argument("--width", type=int, default=32)
    s.add_argument("--zero", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_create)

    s = sub.add_parser("synth", help="write a synthetic desk-scale image set")
    s.add_argument("output")
    s.add_argument("--count", type=int, default=20)
    s.add_argument("--size", type=_size, default=(100, 100))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--kind", choices=bench.SYNTH_KINDS, default="mixed")
    s.add_argument("--format", choices=("png", "ppm"), default="png")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bayernet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, FloatingPointError) as exc:
        print(f"bayernet: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ImageFormatError, ModelFormatError, ValueError) as exc:
        print(f"bayernet: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
