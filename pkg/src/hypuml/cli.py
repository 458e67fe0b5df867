"""Command-line interface: ``hypuml <subcommand> ...``.

Exit codes: 0 success, 1 computation failure, 2 usage, I/O or format error.
"""

from __future__ import annotations

import argparse
import sys

from .config import LOSSES, MINING, MODES, TrainConfig
from .errors import (
    BatchError,
    DimensionNotPlottable,
    FormatError,
    GeometryError,
    HypUMLError,
    IoError,
    SplitError,
)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


# -- argument types ------------------------------------------------------------


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _nonneg_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _k_list(text):
    try:
        ks = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not ks or any(k < 1 for k in ks):
        raise argparse.ArgumentTypeError("k values must be positive integers")
    return ks


def _color_list(text):
    colors = tuple(p.strip() for p in text.split(",") if p.strip())
    if not colors:
        raise argparse.ArgumentTypeError("need at least one color")
    return colors


# -- parser --------------------------------------------------------------------


def _add_split_flags(p):
    p.add_argument("--split", help="split file with 'name = ranges' lines; restricts the input to one part")
    p.add_argument("--part", default=None, help="split part to use (default: 'train' for train, 'test' otherwise)")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="hypuml", description="Hyperbolic uncertainty-aware metric learning.",
                                     formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("synth", help="generate a synthetic hierarchical feature file", formatter_class=fmt)
    p.add_argument("-o", "--output", required=True, help="HYPF file to write")
    p.add_argument("--classes", type=_positive_int, default=10, help="number of classes")
    p.add_argument("--per-class", type=_positive_int, default=50, help="samples per class")
    p.add_argument("--dim", type=_positive_int, default=64, help="feature dimension")
    p.add_argument("--depth", type=_positive_int, default=None, help="tree depth (default: ceil(log2 classes))")
    p.add_argument("--sigma", type=_nonneg_float, default=0.0125, help="per-coordinate noise std")
    p.add_argument("--separation", type=_positive_float, default=0.1, help="distance between sibling leaf centres")
    p.add_argument("--seed", type=_nonneg_int, default=0, help="random seed")

    d = TrainConfig()
    p = sub.add_parser("train", help="train the projection head", formatter_class=fmt)
    p.add_argument("features", help="HYPF feature file")
    p.add_argument("-o", "--output", required=True, help="checkpoint file to write")
    p.add_argument("--metrics", default=None, help="JSON-lines metrics log to write")
    p.add_argument("--loss", choices=LOSSES, default=d.loss, help="loss function")
    p.add_argument("--mode", choices=MODES, default=d.mode,
                   help="adaptive: temperature/margin from uncertainty; fixed: constant --tau/--margin")
    p.add_argument("--tau", type=_positive_float, default=d.tau, help="fixed-mode temperature")
    p.add_argument("--margin", type=_positive_float, default=d.margin, help="fixed-mode triplet margin")
    p.add_argument("--mining", choices=MINING, default=d.mining, help="triplet mining strategy")
    p.add_argument("--curvature", type=_positive_float, default=d.curvature, help="ball curvature c")
    p.add_argument("--scale", type=_positive_float, default=d.scale, help="adaptive temperature scale")
    p.add_argument("--lr", type=_positive_float, default=d.lr, help="Adam learning rate")
    p.add_argument("--weight-decay", type=_nonneg_float, default=d.weight_decay, help="decoupled weight decay")
    p.add_argument("--epochs", type=_nonneg_int, default=d.epochs, help="training epochs")
    p.add_argument("--batch-size", type=_positive_int, default=None,
                   help="batch size (default: 300 contrastive / 200 triplet, capped by the class count)")
    p.add_argument("--samples-per-class", type=_positive_int, default=None,
                   help="K in P x K sampling (default: 3 contrastive / 2 triplet)")
    p.add_argument("--dim-out", type=_positive_int, default=d.dim_out, help="embedding dimension")
    p.add_argument("--seed", type=_nonneg_int, default=d.seed, help="random seed")
    p.add_argument("--log-interval", type=_positive_int, default=d.log_interval, help="steps per metrics record")
    _add_split_flags(p)

    p = sub.add_parser("eval", help="CMC recall@k retrieval evaluation", formatter_class=fmt)
    p.add_argument("checkpoint", help="checkpoint file")
    p.add_argument("features", help="HYPF query features (also the gallery unless --gallery is given)")
    p.add_argument("--gallery", default=None, help="separate HYPF gallery features")
    p.add_argument("--ks", type=_k_list, default=(1, 2, 4, 8), help="comma-separated k values")
    p.add_argument("--report", default=None, help="JSON report file to write")
    _add_split_flags(p)

    p = sub.add_parser("embed", help="export ball embeddings with uncertainties", formatter_class=fmt)
    p.add_argument("checkpoint", help="checkpoint file")
    p.add_argument("features", help="HYPF feature file")
    p.add_argument("-o", "--output", required=True, help="HYPE embeddings file to write")
    _add_split_flags(p)

    p = sub.add_parser("plot", help="SVG scatter plot of 2-d embeddings on the Poincare disk", formatter_class=fmt)
    p.add_argument("embeddings", help="HYPE embeddings file")
    p.add_argument("-o", "--output", required=True, help="SVG file to write")
    p.add_argument("--radius", type=_positive_int, default=300, help="disk radius in pixels")
    p.add_argument("--point-size", type=_positive_float, default=3.0, help="marker radius in pixels")
    p.add_argument("--colors", type=_color_list, default=None, help="comma-separated class colors")
    p.add_argument("--title", default=None, help="SVG title")

    p = sub.add_parser("gradcheck", help="finite-difference check of every registered gradient", formatter_class=fmt)
    p.add_argument("--seed", type=_nonneg_int, default=42, help="random seed")
    p.add_argument("--configs", type=_positive_int, default=10, help="random configurations per curvature")
    p.add_argument("--threshold", type=_positive_float, default=1e-4, help="maximum relative error")
    p.add_argument("--step", type=_positive_float, default=1e-5, help="central-difference step")
    return parser


# -- commands ------------------------------------------------------------------


def _load_features(path, split, part):
    from .data import apply_split, read_features, read_split

    data = read_features(path)
    if split is None:
        return data
    parts = apply_split(data, read_split(split))
    if part not in parts:
        raise SplitError(f"split has no part {part!r}; parts: {', '.join(parts)}")
    return parts[part]


def cmd_synth(args) -> int:
    from .data import SynthSpec, generate_synthetic, write_features

    spec = SynthSpec(args.classes, args.per_class, args.dim, args.depth, args.sigma, args.separation, args.seed)
    data = generate_synthetic(spec)
    write_features(args.output, data)
    print(f"wrote {len(data)} records ({spec.num_classes} classes, dim {spec.dim}) to {args.output}")
    return EXIT_OK


def cmd_train(args, config: TrainConfig) -> int:
    from .head import save_checkpoint
    from .trainer import train

    data = _load_features(args.features, args.split, args.part or "train")
    result = train(data, config, metrics_path=args.metrics)
    save_checkpoint(args.output, result.checkpoint)
    last = result.epoch_losses[-1] if result.epoch_losses else float("nan")
    print(f"trained {result.checkpoint.step} steps; final epoch loss {last:.6f}; checkpoint {args.output}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .evaluation import BallPoints, evaluate, write_report
    from .head import head_forward, load_checkpoint

    ckpt = load_checkpoint(args.checkpoint)
    p = ckpt.params
    queries = _load_features(args.features, args.split, args.part or "test")
    q = BallPoints(head_forward(queries.as_float64(), p), p.c)
    if args.gallery is None:
        report = evaluate(q, queries.labels, ks=args.ks)
    else:
        gallery = _load_features(args.gallery, args.split, args.part or "test")
        g = BallPoints(head_forward(gallery.as_float64(), p), p.c)
        report = evaluate(q, queries.labels, g, gallery.labels, ks=args.ks)
    print(report.format())
    if args.report:
        write_report(args.report, report)
    return EXIT_OK


def cmd_embed(args) -> int:
    from .embeddings import embed, write_embeddings
    from .head import load_checkpoint

    ckpt = load_checkpoint(args.checkpoint)
    data = _load_features(args.features, args.split, args.part or "test")
    emb = embed(data, ckpt.params)
    write_embeddings(args.output, emb)
    print(f"wrote {len(emb)} embeddings of dimension {emb.dim} to {args.output}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .embeddings import read_embeddings
    from .plot import PALETTE, write_svg

    emb = read_embeddings(args.embeddings)
    write_svg(args.output, emb, radius=args.radius, point_size=args.point_size,
              colors=args.colors or PALETTE, title=args.title)
    print(f"wrote plot of {len(emb)} points to {args.output}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .diff import format_reports, gradcheck_all

    reports = gradcheck_all(seed=args.seed, configs=args.configs, threshold=args.threshold, step=args.step)
    print(format_reports(reports))
    failed = [r.primitive for r in reports if not r.passed]
    if failed:
        print(f"{len(failed)} primitive(s) failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        loss=args.loss, mode=args.mode, tau=args.tau, margin=args.margin, mining=args.mining,
        curvature=args.curvature, scale=args.scale, lr=args.lr, weight_decay=args.weight_decay,
        epochs=args.epochs, batch_size=args.batch_size, samples_per_class=args.samples_per_class,
        dim_out=args.dim_out, seed=args.seed, log_interval=args.log_interval,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = None
    if args.command == "train":
        try:
            config = _train_config(args)
        except ValueError as exc:
            parser.error(str(exc))
    handlers = {
        "synth": cmd_synth,
        "train": lambda a: cmd_train(a, config),
        "eval": cmd_eval,
        "embed": cmd_embed,
        "plot": cmd_plot,
        "gradcheck": cmd_gradcheck,
    }
    try:
        return handlers[args.command](args)
    except (IoError, FormatError, SplitError, DimensionNotPlottable) as exc:
        print(f"hypuml {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GeometryError, BatchError, HypUMLError, ValueError) as exc:
        print(f"hypuml {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
