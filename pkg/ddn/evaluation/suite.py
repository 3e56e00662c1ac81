import os
from typing import Any, Callable, Dict, Optional, Sequence, Union

import numpy as np
from dbt.events import AdapterLogger
from dbt.events.functions import fire_event
from dbt.events.types import Note
from dbt.exceptions import DbtRuntimeError

from ddn.data.rng import trial_seed
from ddn.data.tabular import load_tabular
from ddn.data.toy import EVAL_CONDITIONS, ToyTaskName, generate_toy_dataset
from ddn.evaluation.metrics import head_entropy, test_log_likelihood, toy_sse
from ddn.evaluation.report import EvalReport, TrialRecord
from ddn.exceptions import DdnConfigError, describe
from ddn.model.factory import build_model
from ddn.objective.partition import partitions_for
from ddn.training.config import TrainConfig
from ddn.training.trainer import Trainer

logger = AdapterLogger("DDN")

TrialRunner = Callable[[int, int], TrialRecord]


def trial_suite(
    label: str,
    run_trial: TrialRunner,
    n_trials: int,
    seed: int = 0,
    metadata: Optional[Dict[str, Any]] = None,
) -> EvalReport:
    """
    Run ``n_trials`` independent trials, each with its own master seed derived
    from (seed, trial). A trial that raises is recorded as failed, excluded from
    the aggregates and flagged in the report.
    """
    if n_trials < 1:
        raise DdnConfigError(f"n_trials must be at least 1, got {n_trials}")
    report = EvalReport(label=label, metadata=dict(metadata or {}, seed=seed, n_trials=n_trials))
    for trial in range(n_trials):
        master = trial_seed(seed, trial)
        try:
            record = run_trial(trial, master)
        except DbtRuntimeError as e:
            reason = describe(e)
            logger.warning(f"{label} trial {trial} failed and was excluded: {reason}")
            report.trials.append(TrialRecord(trial=trial, seed=master, failed=True, reason=reason))
            continue
        fire_event(Note(msg=f"{label} trial {trial} finished: {record.brief()}"))
        report.trials.append(record)
    if n_trials < 2:
        logger.warning(f"{label}: a single trial gives no standard deviation")
    return report


def toy_trial_runner(
    task: Union[str, ToyTaskName],
    model_overrides: Dict[str, Any],
    train_config: TrainConfig,
    samples: int = 2000,
    test_samples: int = 2000,
    conditions: Sequence[float] = EVAL_CONDITIONS,
    resolution: Optional[int] = None,
    output_dir: Optional[str] = None,
    label: str = "toy",
) -> TrialRunner:
    """Train on a fresh toy dataset per trial; score SSE, test LL and head entropy."""
    task = ToyTaskName.parse(task)

    def run(trial: int, master: int) -> TrialRecord:
        data = generate_toy_dataset(task, samples, seed=master)
        test = generate_toy_dataset(task, test_samples, seed=trial_seed(master, 1))
        model = build_model(model_overrides, data.input_dim, data.target_dim, seed=master)
        partitions = partitions_for(model.config.target_range, model.config.bins_per_dim)
        config = TrainConfig.from_overrides(train_config.to_dict(), seed=master)
        trial_dir = os.path.join(output_dir, label, f"trial{trial}") if output_dir else None
        Trainer(model, config, partitions, trial_dir).train(data)

        mean_sse, per_condition = toy_sse(model, task, partitions, conditions, resolution)
        _, ll = test_log_likelihood(model, test, partitions)
        entropy = head_entropy(model, np.asarray(conditions))
        return TrialRecord(
            trial=trial,
            seed=master,
            log_likelihood=ll,
            sse=mean_sse,
            sse_by_condition={r.condition: r.sse for r in per_condition},
            entropy=entropy,
        )

    return run


def tabular_trial_runner(
    path: str,
    target_columns: Sequence[str],
    model_overrides: Dict[str, Any],
    train_config: TrainConfig,
    name: Optional[str] = None,
    seed: int = 0,
    output_dir: Optional[str] = None,
    label: str = "tabular",
) -> TrialRunner:
    """
    One 3:7 split per trial (split seed ``seed``, trial index ``trial``); the
    model and its training use the trial's master seed.
    """

    def run(trial: int, master: int) -> TrialRecord:
        dataset = load_tabular(path, target_columns, seed=seed, trial=trial, name=name)
        model = build_model(
            model_overrides,
            dataset.train.input_dim,
            dataset.train.target_dim,
            target_range=dataset.target_ranges(),
            seed=master,
        )
        partitions = partitions_for(model.config.target_range, model.config.bins_per_dim)
        config = TrainConfig.from_overrides(train_config.to_dict(), seed=master)
        trial_dir = os.path.join(output_dir, label, f"trial{trial}") if output_dir else None
        Trainer(model, config, partitions, trial_dir).train(dataset.train)
        _, ll = test_log_likelihood(model, dataset.test, partitions)
        return TrialRecord(trial=trial, seed=master, log_likelihood=ll)

    return run
