import argparse
import json
import os
import sys
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ddn.chain.composer import joint_grid, sample_density
from ddn.chain.grid import export_grid
from ddn.cli.manifest import RunManifest
from ddn.cli.recipes import Recipe, load_recipe
from ddn.cli.settings import Settings, data_dir
from ddn.data.dataset import Dataset, read_dataset, read_metadata, read_table, sidecar_path, write_dataset, write_table
from ddn.data.rng import make_rng, trial_seed
from ddn.data.tabular import load_tabular
from ddn.data.toy import EVAL_CONDITIONS, ToyTaskName, generate_toy_dataset
from ddn.evaluation.metrics import head_entropy, test_log_likelihood, toy_sse
from ddn.evaluation.report import EvalReport, TrialRecord, comparison_table, table_to_tsv
from ddn.evaluation.suite import tabular_trial_runner, toy_trial_runner, trial_suite
from ddn.exceptions import DdnConfigError, DdnUsageError, exception_handler
from ddn.model.checkpoint import load_checkpoint
from ddn.model.config import ModelConfig
from ddn.model.factory import build_model
from ddn.model.network import DdnModel
from ddn.objective.partition import BinPartition, partitions_for
from ddn.training.config import TrainConfig
from ddn.training.trainer import Trainer

Range = Tuple[float, float]


def parse_ranges(text: Optional[str]) -> Optional[List[Range]]:
    """``lo:hi[,lo:hi...]``, one pair per target dimension or a single shared pair."""
    if text is None:
        return None
    ranges = []
    for part in text.split(","):
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError:
            raise DdnConfigError(f"--range expects lo:hi pairs separated by commas, got '{text}'")
        ranges.append((lo, hi))
    return ranges


def parse_columns(text: Optional[str]) -> Optional[List[str]]:
    return [c.strip() for c in text.split(",") if c.strip()] if text else None


def _ensure_dir(path: str) -> str:
    with exception_handler(f"creating {path}"):
        os.makedirs(path, exist_ok=True)
    return path


def _write_text(path: str, text: str) -> str:
    with exception_handler(f"writing {path}"):
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    return path


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _condition_tag(x: float) -> str:
    return f"{x:+.4g}".replace("+", "p").replace("-", "m").replace(".", "_")


def cmd_generate(args: argparse.Namespace, settings: Settings, manifest: RunManifest) -> str:
    task = ToyTaskName.parse(args.task)
    dataset = generate_toy_dataset(task, args.n, seed=args.seed)
    out_dir = os.path.dirname(os.path.abspath(args.out))
    _ensure_dir(out_dir)
    write_dataset(dataset, args.out, {"kind": "toy", "task": task.value, "seed": args.seed})
    manifest.seeds["data"] = args.seed
    manifest.config = {"task": task.value, "n": args.n}
    manifest.add_artifact(args.out)
    manifest.add_artifact(sidecar_path(args.out))
    return f"{args.out}.manifest.yml"


def _training_data(args: argparse.Namespace, out: str, seed: int) -> Tuple[Dataset, Optional[List[Range]], List[str]]:
    """
    A file with a sidecar listing its targets trains as is. A bare table needs
    --targets and goes through the 3:7 split and z-scoring for --trial.
    """
    ranges = parse_ranges(args.range)
    targets = parse_columns(args.targets)
    metadata = read_metadata(args.data)
    listed = metadata.get("target_columns")
    if listed and (targets is None or targets == listed):
        dataset = read_dataset(args.data, targets)
        stored = metadata.get("target_ranges")
        return dataset, ranges or ([tuple(r) for r in stored] if stored else None), [args.data]
    if not targets:
        raise DdnConfigError(f"{args.data} has no sidecar naming its targets; pass --targets")
    tabular = load_tabular(args.data, targets, seed=seed, trial=args.trial)
    train_path, test_path = tabular.write(os.path.join(out, "data"))
    return tabular.train, ranges or tabular.target_ranges(), [args.data, train_path, test_path]


def _expand_ranges(ranges: Optional[List[Range]], target_dim: int) -> Optional[List[Range]]:
    if ranges is not None and len(ranges) == 1 and target_dim > 1:
        return ranges * target_dim
    return ranges


def cmd_train(args: argparse.Namespace, settings: Settings, manifest: RunManifest) -> str:
    out = _ensure_dir(args.out)
    seed = args.seed if args.seed is not None else int(settings.train.get("seed", 0))
    dataset, ranges, inputs = _training_data(args, out, seed)
    model_fields = settings.model_with(
        beta=args.beta,
        variant=args.variant,
        bins_per_dim=args.bins,
        latent_dim=args.latent_dim,
        paths_k=args.paths_k,
    )
    model = build_model(
        model_fields,
        dataset.input_dim,
        dataset.target_dim,
        target_range=_expand_ranges(ranges, dataset.target_dim),
        seed=seed,
    )
    train_config = TrainConfig.from_overrides(
        settings.train_with(
            epochs=args.epochs,
            seed=seed,
            batch_size=args.batch_size,
            learning_rate=args.learning_rate,
            checkpoint_every=args.checkpoint_every,
            clip_norm=args.clip_norm,
            record_timing=args.record_timing,
        )
    )
    result = Trainer(model, train_config, output_dir=out).train(dataset)
    manifest.config = {"model": model.config.to_dict(), "train": train_config.to_dict()}
    manifest.seeds.update({"model": seed, "train": train_config.seed})
    manifest.inputs.extend(inputs)
    for path in [result.metrics_path] + result.checkpoints:
        if path:
            manifest.add_artifact(path)
    for path in inputs[1:]:
        manifest.add_artifact(path)
    if result.history:
        last = result.history[-1]
        _emit(f"trained {last.epoch} epochs, final loss {last.total:.6f}; checkpoint in {out}")
    return out


def _checkpoint_partitions(model: DdnModel, metadata: dict) -> List[BinPartition]:
    stored = metadata.get("partitions")
    if stored:
        return [BinPartition(lo=float(lo), hi=float(hi), bins=int(n)) for lo, hi, n in stored]
    return partitions_for(model.config.target_range, model.config.bins_per_dim)


def _export_samples(
    model: DdnModel, conditions: Sequence[float], count: int, partitions: List[BinPartition], seed: int, out: str
) -> List[str]:
    rng = make_rng(seed)
    paths = []
    for x in conditions:
        drawn = sample_density(model, np.asarray([[x]]), count, partitions, rng)
        path = os.path.join(out, f"samples_x{_condition_tag(x)}.csv")
        write_table(path, [f"y{j}" for j in range(drawn.shape[1])], drawn)
        paths.append(path)
    return paths


def cmd_eval(args: argparse.Namespace, settings: Settings, manifest: RunManifest) -> str:
    out = _ensure_dir(args.out)
    checkpoint = load_checkpoint(args.checkpoint)
    model = checkpoint.model
    model.eval()
    cfg: ModelConfig = model.config
    partitions = _checkpoint_partitions(model, checkpoint.metadata)
    conditions = [float(c) for c in (args.conditions or EVAL_CONDITIONS)]
    manifest.inputs.append(args.checkpoint)
    manifest.seeds["eval"] = args.seed
    records: List[TrialRecord] = []

    if args.task:
        task = ToyTaskName.parse(args.task)
        if task.target_dim != cfg.target_dim or cfg.input_dim != 1:
            raise DdnConfigError(
                f"checkpoint models {cfg.input_dim} -> {cfg.target_dim}, task {task.value} is 1 -> {task.target_dim}"
            )
        mean_sse, per_condition = toy_sse(model, task, partitions, conditions, args.resolution)
        entropy = head_entropy(model, np.asarray(conditions))
        if args.grid:
            for result in per_condition:
                path = os.path.join(out, f"grid_x{_condition_tag(result.condition)}.tsv")
                export_grid(result.grid, path)
                manifest.add_artifact(path)
        for trial in range(args.trials):
            seed = trial_seed(args.seed, trial)
            test = generate_toy_dataset(task, args.test_samples, seed=seed)
            _, ll = test_log_likelihood(model, test, partitions)
            records.append(
                TrialRecord(
                    trial=trial,
                    seed=seed,
                    log_likelihood=ll,
                    sse=mean_sse,
                    sse_by_condition={r.condition: r.sse for r in per_condition},
                    entropy=entropy,
                )
            )
        label = task.value
    elif args.data:
        dataset = read_dataset(args.data, parse_columns(args.targets))
        if dataset.target_dim != cfg.target_dim or dataset.input_dim != cfg.input_dim:
            raise DdnConfigError(
                f"checkpoint models {cfg.input_dim} -> {cfg.target_dim}, "
                f"{args.data} has {dataset.input_dim} features and {dataset.target_dim} targets"
            )
        manifest.inputs.append(args.data)
        _, ll = test_log_likelihood(model, dataset, partitions)
        records.append(TrialRecord(trial=0, seed=args.seed, log_likelihood=ll))
        if args.grid:
            if cfg.input_dim != 1:
                raise DdnUsageError("--grid needs a single input feature to place the conditions")
            for x in conditions:
                path = os.path.join(out, f"grid_x{_condition_tag(x)}.tsv")
                export_grid(joint_grid(model, np.asarray([[x]]), partitions, resolution=args.resolution), path)
                manifest.add_artifact(path)
        label = os.path.splitext(os.path.basename(args.data))[0]
    else:
        raise DdnUsageError("eval needs --task or --data")

    if args.samples:
        if cfg.input_dim != 1:
            raise DdnUsageError("--samples needs a single input feature to place the conditions")
        for path in _export_samples(model, conditions, args.samples, partitions, args.seed, out):
            manifest.add_artifact(path)

    report = EvalReport(label=label, trials=records, metadata={"checkpoint": args.checkpoint})
    report_path = os.path.join(out, "report.tsv")
    report.write(report_path)
    manifest.add_artifact(report_path)
    manifest.add_artifact(f"{report_path}.summary.txt")
    _emit(report.summary())
    return out


def _safe_label(label: str) -> str:
    return label.replace("/", "_")


def _reproduce_reports(recipe: Recipe, args: argparse.Namespace, settings: Settings, out: str) -> List[EvalReport]:
    train_fields = settings.train_with(**recipe.train)
    if args.epochs is not None:
        train_fields["epochs"] = args.epochs
    if args.record_timing is not None:
        train_fields["record_timing"] = args.record_timing
    train_config = TrainConfig.from_overrides(train_fields)
    trials = args.trials or recipe.trials
    reports = []

    if recipe.kind == "toy":
        for task in recipe.tasks:
            for run in recipe.runs:
                label = run.label if len(recipe.tasks) == 1 else f"{task.value}/{run.label}"
                runner = toy_trial_runner(
                    task,
                    settings.model_with(**run.model),
                    train_config,
                    samples=recipe.samples * run.samples_factor,
                    resolution=args.resolution,
                    output_dir=out,
                    label=_safe_label(label),
                )
                reports.append(trial_suite(label, runner, trials, seed=args.seed))
    elif recipe.kind == "tabular":
        path = recipe.dataset_path(data_dir(args.data_dir))
        names, _ = read_table(path)
        targets = names[-recipe.dataset.targets :]
        for run in recipe.runs:
            runner = tabular_trial_runner(
                path,
                targets,
                settings.model_with(**run.model),
                train_config,
                name=recipe.dataset.name,
                seed=args.seed,
                output_dir=out,
                label=run.label,
            )
            reports.append(trial_suite(run.label, runner, trials, seed=args.seed))
    else:
        raise DdnConfigError(f"recipe '{recipe.name}' has unknown kind '{recipe.kind}'")
    return reports


def cmd_reproduce(args: argparse.Namespace, settings: Settings, manifest: RunManifest) -> str:
    recipe = load_recipe(args.name)
    out = _ensure_dir(args.out)
    manifest.seeds["master"] = args.seed
    manifest.config = {"recipe": recipe.name, "train": dict(settings.train, **recipe.train)}
    reports = _reproduce_reports(recipe, args, settings, out)
    for report in reports:
        path = os.path.join(out, f"report_{_safe_label(report.label)}.tsv")
        report.write(path)
        manifest.add_artifact(path)
        _emit(report.summary())
    comparison = table_to_tsv(comparison_table(reports, recipe.metric))
    manifest.add_artifact(_write_text(os.path.join(out, "comparison.tsv"), comparison))
    _emit(comparison)
    return out


def cmd_schema(args: argparse.Namespace, settings: Settings, manifest: RunManifest) -> Optional[str]:
    schema = {"ModelConfig": ModelConfig.json_schema(), "TrainConfig": TrainConfig.json_schema()}
    text = json.dumps(schema, indent=2, sort_keys=True) + "\n"
    if args.out:
        _write_text(args.out, text)
        manifest.add_artifact(args.out)
        return f"{args.out}.manifest.yml"
    _emit(text)
    return None
