"""
In-memory (x, y) sample sets and their on-disk form.

A dataset file is comma-separated text with a header row, feature columns
first. Next to it lives a YAML sidecar ``<file>.meta.yml`` with the column
roles plus whatever provenance the writer supplies (seed, split,
normalization statistics).
"""
import os
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Dict, List, Optional, Sequence, Tuple

import agate
import numpy as np
import yaml
from dbt.events.functions import fire_event
from dbt.events.types import Note

from ddn.exceptions import DataParseError, DdnDataError, DdnDimensionError, DdnIOError, exception_handler

SIDECAR_SUFFIX = ".meta.yml"
NUMBER_FORMAT = "{:.9g}"


@dataclass
class Dataset:
    x: np.ndarray
    y: np.ndarray
    feature_names: List[str] = field(default_factory=list)
    target_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.ndim == 1:
            self.y = self.y[:, None]
        if self.x.shape[0] != self.y.shape[0]:
            raise DdnDimensionError(f"x has {self.x.shape[0]} rows but y has {self.y.shape[0]}")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise DdnDataError("dataset contains non-finite values")
        self.feature_names = list(self.feature_names) or [f"x{i}" for i in range(self.input_dim)]
        self.target_names = list(self.target_names) or [f"y{j}" for j in range(self.target_dim)]

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def input_dim(self) -> int:
        return self.x.shape[1]

    @property
    def target_dim(self) -> int:
        return self.y.shape[1]

    def subset(self, rows: np.ndarray) -> "Dataset":
        return Dataset(
            x=self.x[rows], y=self.y[rows], feature_names=self.feature_names, target_names=self.target_names
        )


def sidecar_path(path: str) -> str:
    return f"{path}{SIDECAR_SUFFIX}"


def read_table(path: str, delimiter: Optional[str] = None) -> Tuple[List[str], np.ndarray]:
    """Header and float matrix of a delimiter-separated numeric file."""
    if not os.path.exists(path):
        raise DdnIOError(f"dataset file not found: {path}")
    kwargs = {"delimiter": delimiter} if delimiter else {}
    # every column as text; numeric conversion below reports the offending cell
    tester = agate.TypeTester(types=[agate.Text(cast_nulls=False)])
    with exception_handler(f"reading {path}"):
        table = agate.Table.from_csv(path, column_types=tester, **kwargs)
    names = [str(n) for n in table.column_names]
    values = np.empty((len(table.rows), len(names)), dtype=np.float64)
    for r, row in enumerate(table.rows):
        for c, name in enumerate(names):
            cell = row[c]
            try:
                values[r, c] = float(cell)
            except (TypeError, ValueError):
                # rows are reported 1-based after the header line
                raise DataParseError(path, r + 1, name, "" if cell is None else str(cell))
    if not np.all(np.isfinite(values)):
        r, c = np.argwhere(~np.isfinite(values))[0]
        raise DataParseError(path, int(r) + 1, names[c], str(values[r, c]))
    return names, values


def write_table(path: str, names: Sequence[str], values: np.ndarray) -> None:
    rows = [[Decimal(NUMBER_FORMAT.format(v)) for v in row] for row in np.asarray(values, dtype=np.float64)]
    table = agate.Table(rows, list(names), [agate.Number()] * len(names))
    with exception_handler(f"writing {path}"):
        table.to_csv(path)


def read_metadata(path: str) -> Dict[str, Any]:
    meta_path = sidecar_path(path)
    if not os.path.exists(meta_path):
        return {}
    with exception_handler(f"reading {meta_path}"):
        with open(meta_path, encoding="utf-8") as f:
            return yaml.safe_load(f) or {}


def write_metadata(path: str, metadata: Dict[str, Any]) -> None:
    with exception_handler(f"writing {sidecar_path(path)}"):
        with open(sidecar_path(path), "w", encoding="utf-8") as f:
            yaml.safe_dump(metadata, f, sort_keys=True)


def write_dataset(dataset: Dataset, path: str, metadata: Optional[Dict[str, Any]] = None) -> None:
    names = dataset.feature_names + dataset.target_names
    write_table(path, names, np.concatenate([dataset.x, dataset.y], axis=1))
    sidecar = dict(metadata or {})
    sidecar.update(
        {
            "rows": len(dataset),
            "feature_columns": dataset.feature_names,
            "target_columns": dataset.target_names,
        }
    )
    write_metadata(path, sidecar)
    fire_event(Note(msg=f"Wrote {len(dataset)} rows to {path}"))


def split_columns(
    names: Sequence[str], values: np.ndarray, target_columns: Sequence[str], path: str = "<data>"
) -> Dataset:
    missing = [c for c in target_columns if c not in names]
    if missing:
        raise DdnDataError(f"{path}: target columns not found: {', '.join(missing)} (have {', '.join(names)})")
    if not target_columns:
        raise DdnDataError(f"{path}: at least one target column is required")
    target_idx = [list(names).index(c) for c in target_columns]
    feature_idx = [i for i in range(len(names)) if i not in target_idx]
    if not feature_idx:
        raise DdnDataError(f"{path}: no feature columns left after selecting targets")
    return Dataset(
        x=values[:, feature_idx],
        y=values[:, target_idx],
        feature_names=[names[i] for i in feature_idx],
        target_names=list(target_columns),
    )


def read_dataset(path: str, target_columns: Optional[Sequence[str]] = None) -> Dataset:
    """Load a dataset file; target columns default to the ones its sidecar lists."""
    metadata = read_metadata(path)
    targets = list(target_columns or metadata.get("target_columns") or [])
    if not targets:
        raise DdnDataError(f"{path}: no target columns given and no sidecar lists them")
    names, values = read_table(path)
    return split_columns(names, values, targets, path)
