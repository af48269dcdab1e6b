"""
Command-line entry point.

Commands:
    synth       write a synthetic labeled/unlabeled dataset and its manifest,
                or (with --from-*) a manifest for folders of existing images
    train       train a model into a run directory
    derain      derain an image or a directory of images
    eval        write PSNR/SSIM metrics for the labeled pairs of a manifest
    inspect-rf  print the receptive-field table of the detail network

Every command prints one `ok key=value ...` line on success. On failure it
prints `error kind=<kind> message=<text>` to stderr and exits with 2 for
configuration errors and 1 otherwise.
"""

import argparse
import sys
from typing import List, Optional

from tools.derain_tool import run_derain
from tools.eval_tool import run_eval
from tools.receptive_field_tool import run_inspect_rf
from tools.synth_tool import run_ingest, run_synth
from tools.train_tool import run_train
from utils.config_loader import parse_override
from utils.errors import ConfigurationError, error_result
from utils.logging_setup import configure_logging

# =============================================================================
# EXIT CODES
# =============================================================================

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIGURATION = 2


# =============================================================================
# ARGUMENT PARSER
# =============================================================================

def _dilations(text: str) -> List[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("dilation set must not be empty")
    return values


def _add_model_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--checkpoint", help="trained checkpoint (ck-epoch-N)")
    parser.add_argument("--config", help="INI config describing an untrained model")
    parser.add_argument("--preset", help="named preset applied beneath the config")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config key (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semi-drdnet", description="Semi-supervised single image deraining")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="write a synthetic dataset")
    synth.add_argument("--out", required=True)
    synth.add_argument("--count", type=int, default=8, help="labeled pairs")
    synth.add_argument("--unlabeled", type=int, default=None, help="unlabeled images (default: --count)")
    synth.add_argument("--size", type=int, default=64)
    synth.add_argument("--seed", type=int, default=1)
    synth.add_argument("--from-rainy", metavar="DIR",
                       help="index existing labeled rainy images instead of synthesizing")
    synth.add_argument("--from-clean", metavar="DIR", help="clean partners of --from-rainy, matched by file name")
    synth.add_argument("--from-unlabeled", metavar="DIR", help="index existing unlabeled rainy images")

    train = commands.add_parser("train", help="train a model")
    train.add_argument("--labeled", "--manifest", dest="manifest", required=True, help="dataset manifest")
    train.add_argument("--out", required=True, help="run directory")
    train.add_argument("--config")
    train.add_argument("--preset")
    train.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    train.add_argument("--epochs", type=int)
    train.add_argument("--seed", type=int)
    train.add_argument("--supervised-only", action="store_true")
    train.add_argument("--resume", help="checkpoint to continue from")

    derain = commands.add_parser("derain", help="derain images")
    derain.add_argument("--input", required=True, help="image file or directory")
    derain.add_argument("--out", required=True)
    _add_model_source(derain)

    evaluate = commands.add_parser("eval", help="evaluate on a manifest's labeled pairs")
    evaluate.add_argument("--manifest", required=True)
    evaluate.add_argument("--out", required=True)
    _add_model_source(evaluate)

    rf = commands.add_parser("inspect-rf", help="print the receptive-field table")
    rf.add_argument("--dilations", type=_dilations, default=[1, 3, 5])
    rf.add_argument("--blocks", type=int, default=16)
    rf.add_argument("--verify", action="store_true", help="check depths 0-3 against an impulse response")
    return parser


# =============================================================================
# DISPATCH
# =============================================================================

def dispatch(args: argparse.Namespace) -> dict:
    overrides = [parse_override(item) for item in getattr(args, "overrides", [])]
    if args.command == "synth":
        if args.from_rainy or args.from_clean or args.from_unlabeled:
            return run_ingest(args.out, rainy_dir=args.from_rainy, clean_dir=args.from_clean,
                              unlabeled_dir=args.from_unlabeled)
        return run_synth(args.out, count=args.count, unlabeled=args.unlabeled, size=args.size, seed=args.seed)
    if args.command == "train":
        return run_train(args.manifest, args.out, config=args.config, preset=args.preset, overrides=overrides,
                         epochs=args.epochs, seed=args.seed, supervised_only=args.supervised_only,
                         resume=args.resume)
    if args.command == "derain":
        return run_derain(args.input, args.out, checkpoint=args.checkpoint, config=args.config,
                          preset=args.preset, overrides=overrides)
    if args.command == "eval":
        return run_eval(args.manifest, args.out, checkpoint=args.checkpoint, config=args.config,
                        preset=args.preset, overrides=overrides)
    return run_inspect_rf(args.dilations, num_blocks=args.blocks, verify=args.verify)


def summarize(result: dict) -> str:
    fields = [f"{key}={value}" for key, value in result.items()
              if key not in ("success", "rows", "table", "outputs")]
    if "outputs" in result:
        fields.append(f"outputs={len(result['outputs'])}")
    return " ".join(["ok", *fields])


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        result = dispatch(args)
    except Exception as e:
        result = error_result(e)

    if not result["success"]:
        print(f"error kind={result['kind']} message={result['error']}", file=sys.stderr)
        return EXIT_CONFIGURATION if result["kind"] == ConfigurationError.kind else EXIT_FAILURE
    if "table" in result:
        print(result["table"])
    print(summarize(result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
