"""Command-line entry point: ``imsvd <subcommand> [flags]``."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from app.commands import COMMANDS
from app.config import Settings, get_settings
from app.schemas import CommandSpec, Subcommand
from core.constants import DEFAULT_KNN_K, EXIT_FAILURE, EXIT_USAGE, VARIANT_ALIASES
from core.error_handler import handle_errors
from core.logging_setup import configure_logging
from training.config import TrainConfig

logger = logging.getLogger(__name__)

# Flag spellings that differ from the field name
FLAG_NAMES: Dict[str, str] = {"lambda_": "--lambda", "variables": "--m", "units": "--dm"}

COMMAND_HELP: Dict[Subcommand, str] = {
    Subcommand.GEN_DATA: "generate the synthetic world and write train/test CSV files",
    Subcommand.TRAIN: "train a model; --checkpoint resumes from a checkpoint directory",
    Subcommand.EVAL_KNN: "kNN accuracy of raw inputs and encoder outputs",
    Subcommand.EVAL_PROBE: "linear probe accuracy on encoder outputs",
    Subcommand.VERIFY: "print the verifier report of a checkpoint as JSON",
    Subcommand.EXPORT_JOINT: "export the cross-joint matrix, marginals, embeddings and neighbours",
    Subcommand.GRADCHECK: "finite-difference check of the training loss gradients",
    Subcommand.SWEEP: "train and evaluate once per value of one TrainConfig field",
}


def _flag(name: str) -> str:
    return FLAG_NAMES.get(name, "--" + name.replace("_", "-"))


def _add_train_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training config", "each flag overrides the TrainConfig field named in its help")
    for name, field in TrainConfig.model_fields.items():
        default = field.default
        if isinstance(default, tuple):
            default = ",".join(str(w) for w in default) or "(none)"
        elif hasattr(default, "value"):
            default = default.value
        kwargs = {
            "dest": f"cfg_{name}",
            "default": None,
            "metavar": name.upper().rstrip("_"),
            "help": f"TrainConfig.{field.alias or name} (default: {default})"
            + (f"; {field.description}" if field.description else ""),
        }
        if name == "variant":
            kwargs["choices"] = sorted(VARIANT_ALIASES)
            kwargs.pop("metavar")
        group.add_argument(_flag(name), **kwargs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imsvd",
        allow_abbrev=False,
        description="Soft-discretized twin-network representation learning at desk scale.",
        epilog="Precedence: TrainConfig defaults < --config file < flags. "
        "IMSVD_THREADS caps encoding workers (default 1).",
    )
    subparsers = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", required=True)

    for command in Subcommand:
        sub = subparsers.add_parser(command.value, help=COMMAND_HELP[command], allow_abbrev=False)
        sub.add_argument("--config", type=Path, default=None, help="key=value training config file")
        sub.add_argument("--out", type=Path, default=None, help="output directory (default: IMSVD_OUTPUT_DIR or ./runs)")
        sub.add_argument(
            "--dataset",
            default="synthetic",
            help="synthetic | idx:<images>,<labels>[,<test images>,<test labels>] | csv:<path>[,<test path>]",
        )
        sub.add_argument("--checkpoint", type=Path, default=None, help="checkpoint directory")
        sub.add_argument("--k", type=int, default=None, help=f"kNN neighbours (default: {DEFAULT_KNN_K})")
        sub.add_argument("--attribute", type=int, default=None, help="label column to evaluate (default: 0)")
        sub.add_argument("--n", type=int, default=None, help="gradcheck batch size (overrides --batch-size)")
        sub.add_argument("--seed", type=int, default=None, help="gradcheck seed (default: 0)")
        sub.add_argument("--progress", action="store_true", help="show a progress bar while training")
        sub.add_argument("--sweep-field", default=None, help="TrainConfig field to vary, e.g. lambda or units")
        sub.add_argument(
            "--sweep-values", default=None,
            help="values to try, comma separated; use ; between values of width fields (64,64;128)",
        )
        world = sub.add_argument_group("synthetic world")
        world.add_argument("--world-train", type=int, default=None, help="training samples (default: 8192)")
        world.add_argument("--world-test", type=int, default=None, help="test samples (default: 2048)")
        world.add_argument("--world-dim", type=int, default=None, help="observation width (default: 64)")
        world.add_argument("--world-noise", type=float, default=None, help="observation noise (default: 0.05)")
        world.add_argument("--world-values", default=None, help="values per attribute, comma separated (default: eight attributes of 8)")
        world.add_argument(
            "--world-salience", default=None,
            help="input-space scale per attribute, comma separated (default: 0.5 for the first, 1 for the rest)",
        )
        _add_train_config_flags(sub)
    return parser


def to_command_spec(args: argparse.Namespace, settings: Settings) -> CommandSpec:
    overrides = {
        name: getattr(args, f"cfg_{name}")
        for name in TrainConfig.model_fields
        if getattr(args, f"cfg_{name}") is not None
    }
    options = {
        "k": args.k,
        "attribute": args.attribute,
        "n": args.n,
        "seed": args.seed,
        "progress": args.progress,
        "sweep_field": args.sweep_field,
        "sweep_values": args.sweep_values,
        "world_train": args.world_train,
        "world_test": args.world_test,
        "world_dim": args.world_dim,
        "world_noise": args.world_noise,
        "world_values": args.world_values,
        "world_salience": args.world_salience,
    }
    return CommandSpec(
        subcommand=Subcommand(args.subcommand),
        config_path=args.config,
        overrides=overrides,
        out_dir=args.out or settings.output_dir,
        dataset=args.dataset,
        checkpoint=args.checkpoint,
        options={k: v for k, v in options.items() if v is not None},
    )


@handle_errors(exit_code=EXIT_FAILURE)
def dispatch(spec: CommandSpec, settings: Settings) -> int:
    logger.info("Running %s, output in %s", spec.subcommand.value, spec.out_dir)
    return COMMANDS[spec.subcommand](spec, settings)


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse ``argv`` and run one subcommand.

    Returns:
        0 on success, 1 on contract, numeric, format or I/O errors, 2 on usage errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        settings = get_settings()
    except ValidationError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    configure_logging(settings.log_level)
    return dispatch(to_command_spec(args, settings), settings)


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
