"""Command-line entry point: ``vibrodiag [global flags] <subcommand> [options]``.

Exit codes: 0 success, 1 runtime failure, 2 invalid configuration or arguments.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from filelock import FileLock, Timeout

from . import pipeline
from .config import MODES, PROFILES, load_config
from .errors import ConfigError, VibrodiagError

log = logging.getLogger("vibrodiag")


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=default, help="YAML run configuration")
    parser.add_argument("--profile", choices=sorted(PROFILES), default=default, help="base profile when no config is given")
    parser.add_argument("--seed", type=int, metavar="N", default=default, help="root random seed")
    parser.add_argument("--out", metavar="DIR", default=default, help="output directory")
    parser.add_argument("--deterministic", action="store_true", default=default,
                        help="single-threaded BLAS for bit-identical reruns")
    parser.add_argument("-v", "--verbose", action="store_true", default=default)


def build_parser():
    parser = argparse.ArgumentParser(prog="vibrodiag", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen", parents=[common], help="synthesize recordings and the dataset manifest")
    for name, text in (("preprocess", "render images or extract features"),
                       ("train", "train on the train split"),
                       ("eval", "evaluate a checkpoint on the test split")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--mode", choices=MODES, help="stft | mfcc | features (default: config mode)")
        if name == "eval":
            p.add_argument("--split", choices=("test", "train"), default="test")
    sub.add_parser("baseline", parents=[common], help="features + MLP baseline, end to end")
    p = sub.add_parser("render", parents=[common], help="render one raw float32 window to a PPM")
    p.add_argument("window_file")
    p.add_argument("--mode", choices=("stft", "mfcc"), default="stft")
    p.add_argument("-o", "--output", required=True)
    p = sub.add_parser("report", parents=[common], help="compare evaluation reports")
    p.add_argument("reports", nargs="*", help="report.json files (default: all under --out)")
    return parser


def resolve_config(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = PROFILES[args.profile or "paper"]()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
        overrides["train"] = dataclasses.replace(cfg.train, seed=args.seed)
    if args.out:
        overrides["out"] = args.out
    if args.deterministic:
        overrides["deterministic"] = True
    return cfg.with_overrides(**overrides) if overrides else cfg


def run(args) -> int:
    cfg = resolve_config(args)
    out = Path(cfg.out)
    if args.command == "render":
        pipeline.cmd_render(cfg, args.window_file, args.mode, args.output)
        return 0
    if args.command == "report":
        paths = args.reports or pipeline.find_reports(out)
        dest = out / "comparison.txt" if not args.reports else None
        sys.stdout.write(pipeline.cmd_report(paths, dest))
        return 0

    out.mkdir(parents=True, exist_ok=True)
    try:
        with FileLock(str(out / ".lock"), timeout=0):
            if args.command == "gen":
                m = pipeline.cmd_gen(cfg, out)
                print(f"{len(m['examples'])} examples written to {out}")
            elif args.command == "preprocess":
                pipeline.cmd_preprocess(cfg, out, args.mode)
            elif args.command == "train":
                pipeline.cmd_train(cfg, out, args.mode)
            elif args.command == "eval":
                report = pipeline.cmd_eval(cfg, out, args.mode, args.split)
                print(f"{report.model}: accuracy {report.accuracy:.4f}, macro F1 {report.macro_f1:.4f}")
            elif args.command == "baseline":
                report = pipeline.cmd_baseline(cfg, out)
                print(f"{report.model}: accuracy {report.accuracy:.4f}, macro F1 {report.macro_f1:.4f}")
    except Timeout:
        raise VibrodiagError(f"{out} is locked by another vibrodiag process") from None
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except ConfigError as exc:
        print(f"vibrodiag: configuration error: {exc}", file=sys.stderr)
        return 2
    except (VibrodiagError, OSError, ValueError) as exc:
        print(f"vibrodiag: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
