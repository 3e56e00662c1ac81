"""
Synthetic conditional tasks with known densities.

All two-dimensional tasks draw x ~ U(-1, 1); the targets follow the recipes
below. ``linear_gaussian`` is a one-target task for the univariate code path.
"""

from typing import Callable, Dict, Tuple, Union

import numpy as np
from dbt.dataclass_schema import StrEnum

from ddn.data.dataset import Dataset
from ddn.data.rng import make_rng
from ddn.exceptions import DdnConfigError

# N(0, 2) in the half-Gaussian recipe is read as a standard deviation of 2
HALF_GAUSSIAN_SCALE = 2.0
STICK_HALF_LENGTH = 6.0
LINEAR_GAUSSIAN_SLOPE = 2.0
LINEAR_GAUSSIAN_SCALE = 0.5
EVAL_CONDITIONS = (-0.75, -0.25, 0.25, 0.75)


class ToyTaskName(StrEnum):
    squares = "squares"
    half_gaussian = "half_gaussian"
    gaussian_stick = "gaussian_stick"
    elastic_ring = "elastic_ring"
    linear_gaussian = "linear_gaussian"

    @classmethod
    def default(cls) -> "ToyTaskName":
        return cls.elastic_ring

    @classmethod
    def parse(cls, name: Union[str, "ToyTaskName"]) -> "ToyTaskName":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise DdnConfigError(f"unknown toy task '{name}'; valid tasks: {valid}")

    @property
    def target_dim(self) -> int:
        return 1 if self is ToyTaskName.linear_gaussian else 2


def rotate(u: np.ndarray, v: np.ndarray, angle: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Counter-clockwise rotation of (u, v) by ``angle`` radians."""
    c, s = np.cos(angle), np.sin(angle)
    return u * c - v * s, u * s + v * c


def stick_angle(x: np.ndarray) -> np.ndarray:
    return (-0.75 + x) / 2.0 * np.pi


def _squares(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m = x.shape[0]
    lam = rng.random(m) < 0.5
    a = rng.uniform(-5.0 + x[:, None], -1.0 + x[:, None], size=(m, 2))
    b = rng.uniform(1.0 - x[:, None], 5.0 - x[:, None], size=(m, 2))
    return np.where(lam[:, None], a, b)


def _half_gaussian(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m = x.shape[0]
    a = rng.normal(0.0, HALF_GAUSSIAN_SCALE, size=m)
    b = rng.normal(0.0, HALF_GAUSSIAN_SCALE, size=m)
    return np.stack(rotate(np.abs(a), b, x * np.pi), axis=1)


def _gaussian_stick(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m = x.shape[0]
    a = rng.normal(0.0, 1.0, size=m)
    b = rng.uniform(-STICK_HALF_LENGTH, STICK_HALF_LENGTH, size=m)
    return np.stack(rotate(a, b, stick_angle(x)), axis=1)


def _elastic_ring(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    m = x.shape[0]
    d = rng.uniform(0.0, 2.0, size=m)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
    return np.stack([(4.0 + 2.0 * x + d) * np.cos(theta), (4.0 - 2.0 * x + d) * np.sin(theta)], axis=1)


def _linear_gaussian(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(LINEAR_GAUSSIAN_SLOPE * x, LINEAR_GAUSSIAN_SCALE)[:, None]


SAMPLERS: Dict[ToyTaskName, Callable[[np.ndarray, np.random.Generator], np.ndarray]] = {
    ToyTaskName.squares: _squares,
    ToyTaskName.half_gaussian: _half_gaussian,
    ToyTaskName.gaussian_stick: _gaussian_stick,
    ToyTaskName.elastic_ring: _elastic_ring,
    ToyTaskName.linear_gaussian: _linear_gaussian,
}


def sample_toy(task: Union[str, ToyTaskName], x: Union[float, np.ndarray], rng: np.random.Generator) -> np.ndarray:
    """One target draw per condition: x [M] (or a scalar) gives y [M x J]."""
    task = ToyTaskName.parse(task)
    x = np.atleast_1d(np.asarray(x, dtype=np.float64)).reshape(-1)
    return SAMPLERS[task](x, rng)


def generate_toy_dataset(task: Union[str, ToyTaskName], m: int = 2000, seed: int = 0) -> Dataset:
    task = ToyTaskName.parse(task)
    if m < 1:
        raise DdnConfigError(f"a toy dataset needs at least one sample, got {m}")
    rng = make_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=m)
    y = sample_toy(task, x, rng)
    return Dataset(x=x[:, None], y=y)
