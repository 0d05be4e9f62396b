"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure, 5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, NumericalError, PipelineError, VerificationError
from . import pipeline

EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_VERIFICATION = 5


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to the pipeline config JSON (defaults apply if omitted)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kqscreen",
        description="Koopman-residual feature distillation with a quantum classifier "
        "for diagnostic time-series screening",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write the synthetic dataset manifest")
    _add_common(p)
    p.add_argument("--seed", type=int, help="override the synthetic generator seed")

    p = sub.add_parser("extract", help="distill the manifest into residual features")
    _add_common(p)

    p = sub.add_parser("train", help="train the quantum classifier (and optionally the MLN)")
    _add_common(p)
    p.add_argument("--seed", type=int, help="override the training shuffle seed")
    p.add_argument("--epochs", type=int, help="override the epoch count")
    p.add_argument("--baseline", choices=["mln"], help="also train the classical baseline")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p = sub.add_parser("eval", help="evaluate a checkpoint and emit the metrics report")
    _add_common(p)
    p.add_argument("--checkpoint", help="checkpoint path (defaults to the work dir)")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--baseline", choices=["mln"], help="evaluate the classical baseline instead")
    p.add_argument("--no-figures", action="store_true", help="skip figure rendering")

    p = sub.add_parser("screen", help="per-channel verdicts for one discharge file")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True, help="discharge JSON file")

    p = sub.add_parser("verify", help="run the structural verification suite")
    _add_common(p)
    p.add_argument("--seed", type=int, help="override the suite seed")
    p.add_argument(
        "--perturb-lambda", type=float, default=0.0,
        help="inject an exponent perturbation (negative control; nonzero values must fail)",
    )

    return parser


def _load(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        if args.command == "generate":
            cfg.synthetic.rng_seed = args.seed
        elif args.command == "train":
            cfg.train.rng_seed = args.seed
        elif args.command == "verify":
            cfg.verify_seed = args.seed
    if getattr(args, "epochs", None) is not None:
        cfg.train.epochs = args.epochs
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "generate":
            summary = pipeline.cmd_generate(cfg)
        elif args.command == "extract":
            summary = pipeline.cmd_extract(cfg)
        elif args.command == "train":
            summary = pipeline.cmd_train(cfg, baseline=args.baseline, figures=not args.no_figures)
        elif args.command == "eval":
            summary = pipeline.cmd_eval(
                cfg, checkpoint=args.checkpoint, split=args.split,
                baseline=args.baseline, figures=not args.no_figures,
            )
        elif args.command == "screen":
            summary = pipeline.cmd_screen(cfg, checkpoint=args.checkpoint, discharge_path=args.input)
        elif args.command == "verify":
            summary = pipeline.cmd_verify(cfg, lambda_perturbation=args.perturb_lambda)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except VerificationError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_VERIFICATION
    except PipelineError as exc:  # pragma: no cover - defensive
        print(f"error: {exc}", file=sys.stderr)
        return 1

    print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
