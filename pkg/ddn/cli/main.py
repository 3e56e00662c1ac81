import argparse
import sys
from typing import List, Optional

from dbt.events import AdapterLogger
from dbt.events.functions import fire_event
from dbt.events.types import Note
from dbt.exceptions import DbtRuntimeError

from ddn.__version__ import version
from ddn.cli import commands
from ddn.cli.manifest import RunManifest, read_manifest
from ddn.cli.recipes import recipe_names
from ddn.cli.settings import Settings
from ddn.data.toy import ToyTaskName
from ddn.events import LOG_LEVELS, setup_logging
from ddn.exceptions import exception_handler, exit_code_for
from ddn.model.config import Variant

logger = AdapterLogger("DDN")


def _add_model_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("model")
    group.add_argument("--variant", choices=[v.value for v in Variant], help="model variant (default: ddn)")
    group.add_argument("--beta", type=float, help="KL weight of the variational layer (default: 0.1)")
    group.add_argument("--bins", type=int, help="bins per target dimension (default: 256)")
    group.add_argument("--latent-dim", type=int, help="latent codes in the variational layer (default: 16)")
    group.add_argument("--paths-k", type=int, help="cap on frozen chain-rule paths (default: 5)")
    group.add_argument("--range", help="target range(s) as lo:hi[,lo:hi...]")


def _add_train_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training")
    group.add_argument("--epochs", type=int, help="training epochs")
    group.add_argument("--batch-size", type=int, help="mini-batch size (default: 256)")
    group.add_argument("--learning-rate", type=float, help="Adam learning rate (default: 3e-4)")
    group.add_argument("--checkpoint-every", type=int, help="write a checkpoint every n epochs")
    group.add_argument("--clip-norm", type=float, help="global gradient norm clip (default: off)")
    _add_timing_flags(group)


def _add_timing_flags(parser) -> None:
    timing = parser.add_mutually_exclusive_group()
    timing.add_argument(
        "--timing", dest="record_timing", action="store_const", const=True, help="record wall-clock seconds per epoch"
    )
    timing.add_argument(
        "--no-timing", dest="record_timing", action="store_const", const=False, help="write 0 seconds (the default)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddn", description="Deconvolutional density networks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {version}")
    parser.add_argument("--log-level", default="info", choices=sorted(LOG_LEVELS))
    parser.add_argument("--config", help="YAML file with model: and train: sections")
    sub = parser.add_subparsers(dest="command", required=True)

    generate = sub.add_parser("generate", help="sample a synthetic toy dataset")
    generate.add_argument("--task", required=True, help=f"one of {', '.join(t.value for t in ToyTaskName)}")
    generate.add_argument("--n", type=int, default=2000, help="number of samples (default: 2000)")
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--out", required=True, help="dataset file to write")
    generate.set_defaults(func=commands.cmd_generate)

    train = sub.add_parser("train", help="train a model on a dataset file")
    train.add_argument("--data", required=True, help="dataset file")
    train.add_argument("--targets", help="comma-separated target columns (default: from the sidecar)")
    train.add_argument("--trial", type=int, default=0, help="split index for tabular data")
    train.add_argument("--seed", type=int, help="master seed for splits, init and training")
    train.add_argument("--out", required=True, help="output directory")
    _add_model_flags(train)
    _add_train_flags(train)
    train.set_defaults(func=commands.cmd_train)

    evaluate = sub.add_parser("eval", help="evaluate a checkpoint")
    evaluate.add_argument("--checkpoint", required=True)
    source = evaluate.add_mutually_exclusive_group(required=True)
    source.add_argument("--task", help="toy task to score against its true density")
    source.add_argument("--data", help="held-out dataset file")
    evaluate.add_argument("--targets", help="comma-separated target columns (default: from the sidecar)")
    evaluate.add_argument("--grid", action="store_true", help="export one density grid per condition")
    evaluate.add_argument("--conditions", type=float, nargs="+", help="conditions x (default: -0.75 -0.25 0.25 0.75)")
    evaluate.add_argument("--resolution", type=int, help="grid cells per dimension (default: bins)")
    evaluate.add_argument(
        "--trials", type=int, default=1, help="independent toy test sets; a --data file is scored once (std 0)"
    )
    evaluate.add_argument("--test-samples", type=int, default=2000)
    evaluate.add_argument("--samples", type=int, default=0, help="draw n samples per condition from the estimate")
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--out", required=True, help="output directory")
    evaluate.set_defaults(func=commands.cmd_eval)

    reproduce = sub.add_parser("reproduce", help="run a named experiment end to end")
    reproduce.add_argument("name", help=f"one of {', '.join(recipe_names())}")
    reproduce.add_argument("--seed", type=int, default=0)
    reproduce.add_argument("--trials", type=int, help="override the recipe's trial count")
    reproduce.add_argument("--epochs", type=int, help="override the recipe's epoch count")
    reproduce.add_argument("--resolution", type=int, help="SSE grid cells per dimension (default: bins)")
    reproduce.add_argument("--data-dir", help="directory with UCI dataset files (default: $DDN_DATA_DIR)")
    _add_timing_flags(reproduce)
    reproduce.add_argument("--out", required=True, help="output directory")
    reproduce.set_defaults(func=commands.cmd_reproduce)

    schema = sub.add_parser("schema", help="print the JSON schema of the config files")
    schema.add_argument("--out", help="write the schema to a file instead of stdout")
    schema.set_defaults(func=commands.cmd_schema)

    replay = sub.add_parser("replay", help="re-run the command recorded in a run manifest")
    replay.add_argument("manifest", help="run_manifest.yml or the directory holding it")
    replay.set_defaults(func=None)
    return parser


def run(argv: List[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        if args.command == "replay":
            recorded = read_manifest(args.manifest)
            logger.info(f"Replaying 'ddn {' '.join(recorded.argv)}'")
            return run(recorded.argv)
        fire_event(Note(msg=f"Running '{args.command}' (seed={getattr(args, 'seed', None)})"))
        with exception_handler(f"ddn {args.command}"):
            settings = Settings.load(args.config)
            manifest = RunManifest(command=args.command, argv=list(argv))
            target = args.func(args, settings, manifest)
            if target is not None:
                manifest.finish()
                manifest.write(target)
    except DbtRuntimeError as e:
        logger.error(str(e))
        return exit_code_for(e)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    return run(list(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    sys.exit(main())
