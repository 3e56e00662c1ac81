import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
from dbt.events import AdapterLogger
from dbt.events.functions import fire_event
from dbt.events.types import Note

from ddn.data.dataset import Dataset
from ddn.data.rng import make_rng
from ddn.exceptions import DdnConfigError, DdnDataError, DdnIOError, DdnNumericError, exception_handler
from ddn.model.checkpoint import Checkpoint, save_checkpoint
from ddn.model.network import DdnModel
from ddn.objective.losses import total_loss
from ddn.objective.partition import BinPartition, partitions_for
from ddn.training.config import TrainConfig
from ddn.training.optimizer import Adam

logger = AdapterLogger("DDN")

METRICS_FILE = "metrics.tsv"
FINAL_CHECKPOINT = "model.ddn"


@dataclass
class EpochStats:
    epoch: int
    nll: float
    kl: Optional[float]
    total: float
    seconds: float
    batches: int


@dataclass
class TrainingResult:
    model: DdnModel
    history: List[EpochStats] = field(default_factory=list)
    checkpoints: List[str] = field(default_factory=list)
    metrics_path: Optional[str] = None


def format_metrics_row(stats: EpochStats, with_kl: bool) -> str:
    values = [str(stats.epoch), f"{stats.nll:.9g}"]
    if with_kl:
        values.append(f"{stats.kl:.9g}")
    values += [f"{stats.total:.9g}", f"{stats.seconds:.3f}"]
    return "\t".join(values)


def metrics_header(with_kl: bool) -> str:
    return "\t".join(["epoch", "nll"] + (["kl"] if with_kl else []) + ["total", "seconds"])


class Trainer:
    """
    Mini-batch Adam training of one model on one dataset.

    Every epoch is one shuffled pass. Each sample in a batch gets its own
    conditional mask drawn uniformly from the model's mask set; a trailing
    batch of a single sample is dropped because batch normalization needs two.
    """

    def __init__(
        self,
        model: DdnModel,
        config: TrainConfig,
        partitions: Optional[Sequence[BinPartition]] = None,
        output_dir: Optional[str] = None,
    ):
        self.model = model
        self.config = config
        self.partitions = list(
            partitions
            if partitions is not None
            else partitions_for(model.config.target_range, model.config.bins_per_dim)
        )
        if len(self.partitions) != model.config.target_dim:
            raise DdnConfigError(f"{len(self.partitions)} partitions for {model.config.target_dim} targets")
        self.output_dir = output_dir
        self.beta = config.beta if config.beta is not None else model.config.beta
        self.optimizer = Adam(
            list(model.named_parameters()),
            lr=config.learning_rate,
            betas=(config.adam_beta1, config.adam_beta2),
            eps=config.adam_eps,
            clip_norm=config.clip_norm,
        )
        self.rng = make_rng(config.seed)
        self.epoch = 0

    @property
    def with_kl(self) -> bool:
        return self.model.config.variant.has_variational_layer

    def in_range(self, dataset: Dataset) -> Dataset:
        """Drop samples with any target outside the bin partitions, with a warning."""
        keep = np.ones(len(dataset), dtype=bool)
        for j, partition in enumerate(self.partitions):
            keep &= partition.contains(dataset.y[:, j])
        dropped = int((~keep).sum())
        if dropped:
            logger.warning(f"Dropping {dropped} of {len(dataset)} training samples outside the target range")
        return dataset if not dropped else dataset.subset(np.flatnonzero(keep))

    def _check_dimensions(self, dataset: Dataset) -> None:
        cfg = self.model.config
        if dataset.input_dim != cfg.input_dim or dataset.target_dim != cfg.target_dim:
            raise DdnConfigError(
                f"dataset has {dataset.input_dim} features and {dataset.target_dim} targets, "
                f"model expects {cfg.input_dim} and {cfg.target_dim}"
            )

    def train_epoch(self, dataset: Dataset, rng: Optional[np.random.Generator] = None) -> EpochStats:
        rng = rng if rng is not None else self.rng
        model = self.model
        model.train()
        started = time.perf_counter()
        batch_size = self.config.batch_size
        order = rng.permutation(len(dataset))
        sums: Dict[str, float] = {"nll": 0.0, "kl": 0.0, "total": 0.0}
        seen = 0
        batches = 0
        for start in range(0, len(order), batch_size):
            rows = order[start : start + batch_size]
            if len(rows) < 2:
                continue
            masks = None
            if model.config.target_dim > 1:
                masks = model.mask_set.sample(len(rows), rng)
            self.optimizer.zero_grad()
            try:
                heads, latent = model.forward(dataset.x[rows], dataset.y[rows], masks, rng)
                loss = total_loss(heads, latent, dataset.y[rows], self.partitions, self.beta, model.config.variant)
                loss.total.backward()
                self.optimizer.step()
            except DdnNumericError as e:
                raise DdnNumericError(f"epoch {self.epoch + 1}, batch {batches + 1} aborted: {e.msg}") from e
            values = loss.values
            for key in sums:
                sums[key] += values[key] * len(rows)
            seen += len(rows)
            batches += 1
        self.epoch += 1
        seconds = time.perf_counter() - started if self.config.record_timing else 0.0
        return EpochStats(
            epoch=self.epoch,
            nll=sums["nll"] / seen,
            kl=sums["kl"] / seen if self.with_kl else None,
            total=sums["total"] / seen,
            seconds=seconds,
            batches=batches,
        )

    def checkpoint_metadata(self) -> dict:
        return {
            "epoch": self.epoch,
            "adam_step": self.optimizer.t,
            "train_config": self.config.to_dict(),
            "partitions": [[p.lo, p.hi, p.bins] for p in self.partitions],
        }

    def save(self, path: str) -> str:
        try:
            save_checkpoint(path, self.model, self.optimizer.state_arrays(), self.checkpoint_metadata())
        except DdnIOError:
            logger.warning(f"Checkpoint write failed; state after epoch {self.epoch} exists only in memory")
            raise
        fire_event(Note(msg=f"Wrote checkpoint for epoch {self.epoch} to {path}"))
        return path

    def restore(self, checkpoint: Checkpoint) -> None:
        """Resume optimizer state and epoch count from a checkpoint of this model."""
        metadata = checkpoint.metadata
        self.optimizer.load_state_arrays(checkpoint.extra_arrays, metadata.get("adam_step", 0))
        self.epoch = int(metadata.get("epoch", 0))

    def train(self, dataset: Dataset) -> TrainingResult:
        self._check_dimensions(dataset)
        dataset = self.in_range(dataset)
        if len(dataset) < 2:
            raise DdnDataError(f"training needs at least 2 samples, got {len(dataset)}")
        result = TrainingResult(model=self.model)
        metrics = None
        if self.output_dir is not None:
            with exception_handler(f"creating {self.output_dir}"):
                os.makedirs(self.output_dir, exist_ok=True)
            result.metrics_path = os.path.join(self.output_dir, METRICS_FILE)
            with exception_handler(f"opening {result.metrics_path}"):
                metrics = open(result.metrics_path, "w", encoding="utf-8")
                metrics.write(metrics_header(self.with_kl) + "\n")
        try:
            for _ in range(self.config.epochs):
                stats = self.train_epoch(dataset)
                result.history.append(stats)
                logger.debug(
                    f"Epoch {stats.epoch}: nll={stats.nll:.5f} kl={stats.kl or 0.0:.5f} "
                    f"total={stats.total:.5f} ({stats.seconds:.2f}s)"
                )
                if metrics is not None:
                    with exception_handler(f"writing {result.metrics_path}"):
                        metrics.write(format_metrics_row(stats, self.with_kl) + "\n")
                every = self.config.checkpoint_every
                if self.output_dir is not None and every and stats.epoch % every == 0:
                    path = os.path.join(self.output_dir, f"checkpoint_epoch{stats.epoch:05d}.ddn")
                    result.checkpoints.append(self.save(path))
        finally:
            if metrics is not None:
                metrics.close()

        self.model.eval()
        if self.output_dir is not None:
            result.checkpoints.append(self.save(os.path.join(self.output_dir, FINAL_CHECKPOINT)))
        if result.history:
            fire_event(
                Note(msg=f"Finished training after {self.epoch} epochs, final loss {result.history[-1].total:.5f}")
            )
        return result


def train(
    model: DdnModel,
    dataset: Dataset,
    config: TrainConfig,
    partitions: Optional[Sequence[BinPartition]] = None,
    output_dir: Optional[str] = None,
) -> TrainingResult:
    return Trainer(model, config, partitions=partitions, output_dir=output_dir).train(dataset)
