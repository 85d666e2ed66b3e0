"""Command-line surface.

Subcommands: dataset build, pretrain, train, resume, transfer, metrics,
generate. Training commands read a line-based `key = value` config file;
every config key is also exposed as a `--key value` flag that overrides
the file. Exit codes: 0 success, 2 config error, 3 data error,
4 numerical abort.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import corpora, datakit, metrics as metrics_mod, trainer
from .datakit import DataError
from .trainer import ConfigError, NumericalAbort, TrainConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, metavar="FILE",
                        help="key = value config file")
    for f in dataclasses.fields(TrainConfig):
        parser.add_argument(f"--{f.name}", default=None, metavar="V",
                            help=f"override config key {f.name}")


def _config_from_args(args: argparse.Namespace, **forced) -> TrainConfig:
    overrides = {
        f.name: getattr(args, f.name)
        for f in dataclasses.fields(TrainConfig)
        if getattr(args, f.name, None) is not None
    }
    cfg = trainer.load_config(args.config, overrides)
    for key, value in forced.items():
        setattr(cfg, key, value)
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adagan",
        description="minimal adaptive-augmentation GAN trainer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_dataset = sub.add_parser("dataset", help="dataset tooling")
    dsub = p_dataset.add_subparsers(dest="dataset_command", required=True)
    p_build = dsub.add_parser("build", help="pack images into a record file")
    p_build.add_argument("--in", dest="input_dir", metavar="DIR",
                         help="directory with one subdirectory per class")
    p_build.add_argument("--toy", choices=corpora.KINDS,
                         help="generate a procedural corpus instead of reading --in")
    p_build.add_argument("--n", type=int, default=256,
                         help="toy corpus size (with --toy)")
    p_build.add_argument("--out", required=True, metavar="FILE")
    p_build.add_argument("--res", type=int, required=True, metavar="N")
    p_build.add_argument("--seed", type=int, default=0)

    p_pretrain = sub.add_parser(
        "pretrain", help="build a toy source corpus and train on it"
    )
    p_pretrain.add_argument("--kind", choices=corpora.KINDS, default="blobs2")
    p_pretrain.add_argument("--n", type=int, default=256, help="corpus size")
    _add_config_flags(p_pretrain)

    p_train = sub.add_parser("train", help="train from scratch")
    _add_config_flags(p_train)

    p_resume = sub.add_parser("resume", help="continue a run from a checkpoint")
    p_resume.add_argument("--checkpoint", required=True, metavar="FILE")
    p_resume.add_argument("--total_kimg", default=None, metavar="V")
    p_resume.add_argument("--out_dir", default=None, metavar="DIR")

    p_transfer = sub.add_parser(
        "transfer", help="initialize from a source checkpoint, then train"
    )
    p_transfer.add_argument("--source", required=True, metavar="FILE",
                            help="source checkpoint")
    _add_config_flags(p_transfer)

    p_metrics = sub.add_parser("metrics", help="evaluate a checkpoint")
    p_metrics.add_argument("--checkpoint", required=True, metavar="FILE")
    p_metrics.add_argument("--data", required=True, metavar="FILE",
                           help="record file with the real images")
    p_metrics.add_argument("--embedder", choices=("pixels", "randconv"),
                           default="pixels")
    p_metrics.add_argument("--n-gen", type=int, default=512)
    p_metrics.add_argument("--seed", type=int, default=0)
    p_metrics.add_argument("--out", default=None, metavar="FILE",
                           help="write the CSV here as well as stdout")

    p_generate = sub.add_parser("generate", help="sample an image grid")
    p_generate.add_argument("--checkpoint", required=True, metavar="FILE")
    p_generate.add_argument("--rows", type=int, default=4)
    p_generate.add_argument("--cols", type=int, default=4)
    p_generate.add_argument("--seed", type=int, default=0)
    p_generate.add_argument("--out", required=True, metavar="FILE")
    return parser


def _cmd_dataset_build(args) -> int:
    if args.toy is not None:
        summary = corpora.build_toy_corpus(
            args.toy, args.n, args.res, args.seed, args.out
        )
    elif args.input_dir:
        summary = datakit.build_records(args.input_dir, None, args.res, args.out)
    else:
        raise ConfigError("dataset build needs --in DIR or --toy KIND")
    print(
        f"wrote {summary.count} records at {summary.resolution}x"
        f"{summary.resolution} to {summary.path}"
        + (f" ({len(summary.skipped)} skipped)" if summary.skipped else "")
    )
    return EXIT_OK


def _print_run(result: trainer.RunResult) -> None:
    print(f"final checkpoint: {result.final_checkpoint}")
    print(f"report: {result.report_path}")
    for path in result.figure_paths:
        print(f"figure: {path}")


def _cmd_pretrain(args) -> int:
    cfg = _config_from_args(args)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = out_dir / f"corpus-{args.kind}.rec"
    corpora.build_toy_corpus(args.kind, args.n, cfg.resolution, cfg.seed, corpus_path)
    cfg.data = str(corpus_path)
    cfg.validate()
    print(f"source corpus: {corpus_path}")
    _print_run(trainer.train(cfg))
    return EXIT_OK


def _cmd_train(args) -> int:
    _print_run(trainer.train(_config_from_args(args)))
    return EXIT_OK


def _cmd_resume(args) -> int:
    overrides = {}
    if args.total_kimg is not None:
        overrides["total_kimg"] = args.total_kimg
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    _print_run(trainer.resume(args.checkpoint, overrides))
    return EXIT_OK


def _cmd_transfer(args) -> int:
    cfg = _config_from_args(args)
    cfg.validate()
    gparams, dparams, manifest = trainer.transfer_init(args.source, cfg)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_path = out_dir / "transfer_manifest.json"
    manifest_path.write_text(manifest.to_json() + "\n")
    print(
        f"transfer: {len(manifest.copied)} tensors copied,"
        f" {len(manifest.reinitialized)} reinitialized"
        f" ({manifest_path})"
    )
    _print_run(trainer.train(cfg, initial_params=(gparams, dparams)))
    return EXIT_OK


def _cmd_metrics(args) -> int:
    embedder = metrics_mod.Embedder(kind=args.embedder, seed=args.seed)
    row = trainer.snapshot_metrics(
        args.checkpoint, args.data, embedder, args.n_gen, args.seed
    )
    columns = ("tick", "fid", "kid", "embedder", "n_real", "n_gen")
    text = ",".join(columns) + "\n" + ",".join(
        trainer._fmt(row[c]) for c in columns
    ) + "\n"
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    return EXIT_OK


def _cmd_generate(args) -> int:
    path = trainer.generate_grid(
        args.checkpoint, args.rows, args.cols, args.seed, args.out
    )
    print(f"grid: {path}")
    return EXIT_OK


_COMMANDS = {
    "pretrain": _cmd_pretrain,
    "train": _cmd_train,
    "resume": _cmd_resume,
    "transfer": _cmd_transfer,
    "metrics": _cmd_metrics,
    "generate": _cmd_generate,
}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "dataset":
            return _cmd_dataset_build(args)
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
