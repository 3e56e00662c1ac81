import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml

from ddn.data.tabular import RegisteredDataset, dataset_registry
from ddn.data.toy import ToyTaskName
from ddn.exceptions import DdnConfigError, DdnIOError
from ddn.include import PACKAGE_PATH

RECIPES_PATH = os.path.join(PACKAGE_PATH, "recipes.yml")
UCI_PREFIX = "uci-"


@dataclass
class RecipeRun:
    label: str
    model: Dict[str, Any] = field(default_factory=dict)
    samples_factor: int = 1


@dataclass
class Recipe:
    name: str
    kind: str
    runs: List[RecipeRun]
    metric: str
    trials: int = 3
    samples: int = 2000
    tasks: List[ToyTaskName] = field(default_factory=list)
    train: Dict[str, Any] = field(default_factory=dict)
    dataset: Optional[RegisteredDataset] = None

    def dataset_path(self, data_dir: str) -> str:
        """Location of the recipe's dataset file; missing files name the expected path."""
        if self.dataset is None:
            raise DdnConfigError(f"recipe '{self.name}' does not read a dataset file")
        path = os.path.join(data_dir, self.dataset.file)
        if not os.path.exists(path):
            raise DdnIOError(
                f"recipe '{self.name}' needs the {self.dataset.name} dataset at {path} "
                f"({self.dataset.shape}); pass --data-dir or set DDN_DATA_DIR"
            )
        return path


def _load_all() -> Dict[str, Dict[str, Any]]:
    with open(RECIPES_PATH, encoding="utf-8") as f:
        return yaml.safe_load(f)["recipes"]


def recipe_names() -> List[str]:
    names = [n for n in _load_all() if n != "uci"]
    return names + [f"{UCI_PREFIX}{n}" for n in sorted(dataset_registry())]


def load_recipe(name: str) -> Recipe:
    recipes = _load_all()
    dataset = None
    if name.startswith(UCI_PREFIX):
        registry = dataset_registry()
        dataset_name = name[len(UCI_PREFIX) :]
        if dataset_name not in registry:
            raise DdnConfigError(f"unknown recipe '{name}'; available: {', '.join(recipe_names())}")
        dataset = registry[dataset_name]
        entry = recipes["uci"]
    elif name in recipes and name != "uci":
        entry = recipes[name]
    else:
        raise DdnConfigError(f"unknown recipe '{name}'; available: {', '.join(recipe_names())}")

    return Recipe(
        name=name,
        kind=entry["kind"],
        runs=[RecipeRun(**run) for run in entry["runs"]],
        metric=entry["metric"],
        trials=int(entry.get("trials", 3)),
        samples=int(entry.get("samples", 2000)),
        tasks=[ToyTaskName.parse(t) for t in entry.get("tasks", [])],
        train=dict(entry.get("train") or {}),
        dataset=dataset,
    )
