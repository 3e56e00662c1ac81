import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml
from dbt.events import AdapterLogger
from sklearn.model_selection import train_test_split
from sklearn.preprocessing import StandardScaler

from ddn.data.dataset import Dataset, read_table, split_columns, write_dataset
from ddn.data.rng import split_seed
from ddn.exceptions import DdnConfigError, DdnDataError, ZeroVarianceError, exception_handler
from ddn.include import PACKAGE_PATH
from ddn.objective.partition import BinPartition

logger = AdapterLogger("DDN")

TRAIN_FRACTION = 0.3
REGISTRY_PATH = os.path.join(PACKAGE_PATH, "datasets.yml")


@dataclass(frozen=True)
class RegisteredDataset:
    name: str
    file: str
    rows: int
    features: int
    targets: int

    @property
    def shape(self) -> str:
        return f"{self.rows} rows, {self.features} features, {self.targets} targets"


def dataset_registry() -> Dict[str, RegisteredDataset]:
    with open(REGISTRY_PATH, encoding="utf-8") as f:
        entries = yaml.safe_load(f)["datasets"]
    return {name: RegisteredDataset(name=name, **entry) for name, entry in entries.items()}


def registered_dataset(name: str) -> RegisteredDataset:
    registry = dataset_registry()
    if name not in registry:
        raise DdnConfigError(f"unknown dataset '{name}'; registered: {', '.join(sorted(registry))}")
    return registry[name]


@dataclass(frozen=True)
class NormalizationStats:
    """Per-column z-scores from a ``StandardScaler`` fit on the training split (population std)."""

    scaler: StandardScaler

    @classmethod
    def fit(cls, values: np.ndarray, names: Sequence[str]) -> "NormalizationStats":
        scaler = StandardScaler().fit(values)
        # StandardScaler silently uses a unit scale for constant columns
        constant = scaler.var_ <= np.finfo(np.float64).eps * np.maximum(1.0, scaler.mean_**2)
        for name, flat in zip(names, constant):
            if flat:
                raise ZeroVarianceError(name)
        return cls(scaler=scaler)

    @property
    def mean(self) -> np.ndarray:
        return self.scaler.mean_

    @property
    def std(self) -> np.ndarray:
        return self.scaler.scale_

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.scaler.transform(values)

    def invert(self, values: np.ndarray) -> np.ndarray:
        return self.scaler.inverse_transform(values)

    def to_dict(self, names: Sequence[str]) -> Dict[str, Dict[str, float]]:
        return {n: {"mean": float(m), "std": float(s)} for n, m, s in zip(names, self.mean, self.std)}


@dataclass
class TabularDataset:
    name: str
    train: Dataset
    test: Dataset
    feature_stats: NormalizationStats
    target_stats: NormalizationStats
    train_rows: np.ndarray
    test_rows: np.ndarray
    seed: int
    trial: int

    @property
    def rows(self) -> int:
        return len(self.train) + len(self.test)

    def target_ranges(self) -> List[Tuple[float, float]]:
        """(floor(min) - 1, ceil(max) + 1) of each normalized training target."""
        return [
            (p.lo, p.hi) for p in (BinPartition.for_data(self.train.y[:, j]) for j in range(self.train.target_dim))
        ]

    def metadata(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "trial": self.trial,
            "train_fraction": TRAIN_FRACTION,
            "train_rows": [int(r) for r in self.train_rows],
            "test_rows": [int(r) for r in self.test_rows],
            "feature_normalization": self.feature_stats.to_dict(self.train.feature_names),
            "target_normalization": self.target_stats.to_dict(self.train.target_names),
            "target_ranges": [list(r) for r in self.target_ranges()],
        }

    def write(self, directory: str) -> Tuple[str, str]:
        """Normalized train/test files, each with the split's metadata sidecar."""
        with exception_handler(f"creating {directory}"):
            os.makedirs(directory, exist_ok=True)
        stem = f"{self.name}_trial{self.trial}"
        train_path = os.path.join(directory, f"{stem}_train.csv")
        test_path = os.path.join(directory, f"{stem}_test.csv")
        write_dataset(self.train, train_path, dict(self.metadata(), split="train"))
        write_dataset(self.test, test_path, dict(self.metadata(), split="test"))
        return train_path, test_path


def train_size(m: int) -> int:
    """round(0.3 m) with .5 rounded up."""
    return int(np.floor(TRAIN_FRACTION * m + 0.5))


def split_rows(m: int, seed: int, trial: int) -> Tuple[np.ndarray, np.ndarray]:
    """Shuffled 3:7 train/test row indices, seeded by (seed, trial)."""
    n_train = train_size(m)
    if n_train < 2 or m - n_train < 1:
        raise DdnDataError(f"{m} rows are too few for a 3:7 split")
    train, test = train_test_split(
        np.arange(m),
        train_size=n_train,
        test_size=m - n_train,
        random_state=split_seed(seed, trial),
        shuffle=True,
    )
    return np.sort(train), np.sort(test)


def _check_registry(name: Optional[str], dataset: Dataset) -> None:
    if name is None:
        return
    registry = dataset_registry()
    if name not in registry:
        logger.debug(f"Dataset {name} is not in the registry, skipping shape check")
        return
    entry = registry[name]
    found = (len(dataset), dataset.input_dim, dataset.target_dim)
    if found != (entry.rows, entry.features, entry.targets):
        logger.warning(
            f"Dataset '{name}' has shape {found[0]} rows, {found[1]} features, {found[2]} targets, "
            f"registry lists {entry.shape}"
        )


def load_tabular(
    path: str,
    target_columns: Sequence[str],
    seed: int = 0,
    trial: int = 0,
    name: Optional[str] = None,
    delimiter: Optional[str] = None,
) -> TabularDataset:
    """
    Parse a numeric table, split it 3:7 for (seed, trial) and z-score features
    and targets with training-split statistics.
    """
    names, values = read_table(path, delimiter=delimiter)
    raw = split_columns(names, values, target_columns, path)
    name = name or os.path.splitext(os.path.basename(path))[0]
    _check_registry(name, raw)

    train_rows, test_rows = split_rows(len(raw), seed, trial)
    train_raw, test_raw = raw.subset(train_rows), raw.subset(test_rows)
    feature_stats = NormalizationStats.fit(train_raw.x, raw.feature_names)
    target_stats = NormalizationStats.fit(train_raw.y, raw.target_names)

    def normalize(part: Dataset) -> Dataset:
        return Dataset(
            x=feature_stats.apply(part.x),
            y=target_stats.apply(part.y),
            feature_names=raw.feature_names,
            target_names=raw.target_names,
        )

    logger.debug(f"Loaded {name} ({len(raw)} rows): {len(train_rows)} train / {len(test_rows)} test for trial {trial}")
    return TabularDataset(
        name=name,
        train=normalize(train_raw),
        test=normalize(test_raw),
        feature_stats=feature_stats,
        target_stats=target_stats,
        train_rows=train_rows,
        test_rows=test_rows,
        seed=seed,
        trial=trial,
    )
