from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import entropy

from ddn.chain.composer import joint_grid, log_likelihoods
from ddn.chain.grid import DensityGrid
from ddn.chain.paths import PermutationPaths
from ddn.data.dataset import Dataset
from ddn.data.oracle import oracle_density
from ddn.data.toy import EVAL_CONDITIONS, ToyTaskName
from ddn.exceptions import DdnDataError, DdnDimensionError
from ddn.model.network import DdnModel
from ddn.objective.partition import BinPartition

Oracle = Callable[[float, np.ndarray], np.ndarray]


def truth_grid(
    oracle: Union[str, ToyTaskName, Oracle],
    x: float,
    partitions: Sequence[BinPartition],
) -> DensityGrid:
    """Ground-truth density evaluated at every cell center of ``partitions``."""
    if not callable(oracle):
        task = oracle

        def oracle(x_, y_):
            return oracle_density(task, x_, y_)

    mesh = np.meshgrid(*(p.centers() for p in partitions), indexing="ij")
    points = np.stack(mesh, axis=-1)
    density = np.asarray(oracle(float(x), points), dtype=np.float64)
    return DensityGrid(partitions=list(partitions), density=density, condition=np.asarray([float(x)]))


def sse(estimated: DensityGrid, truth: Union[DensityGrid, str, ToyTaskName, Oracle], x: Optional[float] = None) -> float:
    """Sum over cells of (estimated - true density)^2 on the estimated grid's cells."""
    if not isinstance(truth, DensityGrid):
        condition = float(estimated.condition[0]) if x is None else float(x)
        truth = truth_grid(truth, condition, estimated.partitions)
    if not estimated.same_geometry(truth):
        raise DdnDimensionError("SSE needs both densities on the same grid geometry")
    return float(np.sum((estimated.density - truth.density) ** 2))


@dataclass
class ConditionSSE:
    condition: float
    sse: float
    grid: DensityGrid


def toy_sse(
    model: DdnModel,
    task: Union[str, ToyTaskName],
    partitions: Sequence[BinPartition],
    conditions: Sequence[float] = EVAL_CONDITIONS,
    resolution: Optional[int] = None,
) -> Tuple[float, List[ConditionSSE]]:
    """SSE of the path-averaged joint grid at each condition, and their mean."""
    results = []
    for x in conditions:
        grid = joint_grid(model, np.asarray([[x]]), partitions, resolution=resolution)
        results.append(ConditionSSE(condition=float(x), sse=sse(grid, task, x), grid=grid))
    return float(np.mean([r.sse for r in results])), results


def test_log_likelihood(
    model: DdnModel,
    dataset: Dataset,
    partitions: Sequence[BinPartition],
    paths: Optional[PermutationPaths] = None,
) -> Tuple[np.ndarray, float]:
    """Per-sample log-likelihoods of a held-out set and their mean."""
    if len(dataset) == 0:
        raise DdnDataError("cannot evaluate the log-likelihood of an empty test set")
    values = log_likelihoods(model, dataset.x, dataset.y, partitions, paths)
    return values, float(np.mean(values))


# not a pytest test despite the name
test_log_likelihood.__test__ = False


def head_entropy(model: DdnModel, conditions: np.ndarray) -> float:
    """
    Mean Shannon entropy (nats) of the unconditioned heads p(y_j | x) over all
    target dimensions and conditions; bounded by log N.
    """
    conditions = np.asarray(conditions, dtype=np.float64)
    if conditions.ndim == 1:
        conditions = conditions[:, None]
    probabilities = model.predict(conditions).astype(np.float64)
    return float(np.mean(entropy(probabilities, axis=-1)))


def oracle_log_likelihoods(
    task: Union[str, ToyTaskName],
    dataset: Dataset,
    partitions: Sequence[BinPartition],
    subdivisions: int = 4,
) -> np.ndarray:
    """
    Log of the true density discretized onto the model's bins: the oracle
    averaged over a ``subdivisions``-per-axis lattice inside each sample's cell.
    """
    y = dataset.y
    x = dataset.x[:, 0]
    offsets = (np.arange(subdivisions) + 0.5) / subdivisions
    lattice = np.stack(np.meshgrid(*([offsets] * len(partitions)), indexing="ij"), axis=-1).reshape(-1, len(partitions))
    lower = np.empty_like(y)
    inside = np.ones(len(dataset), dtype=bool)
    for j, p in enumerate(partitions):
        index = p.bin_indices(y[:, j], strict=False)
        inside &= index >= 0
        lower[:, j] = p.lo + np.maximum(index, 0) * p.width
    widths = np.asarray([p.width for p in partitions])
    points = lower[:, None, :] + lattice[None, :, :] * widths
    density = oracle_density(task, x[:, None], points).mean(axis=1)
    density = np.where(inside, density, 0.0)
    return np.log(np.maximum(density, 1e-300))
