"""
Chain-rule composition of univariate heads into joint conditional densities.

Each frozen path (A_1, ..., A_J) factorizes the joint as
p(y | x) = prod_j p(y_{A_j} | x, y_{A_1}, ..., y_{A_{j-1}}); every factor is one
eval-mode forward pass with the prefix mask of that position. Joint results are
averaged over the K paths.
"""
from typing import TYPE_CHECKING, List, Optional, Sequence

import numpy as np

from ddn.chain.grid import DensityGrid, coarse_partitions
from ddn.chain.paths import PermutationPaths, prefix_mask
from ddn.exceptions import DdnConfigError, DdnDimensionError, DdnUsageError
from ddn.objective.partition import BinPartition

if TYPE_CHECKING:
    from ddn.model.network import DdnModel

LL_DENSITY_FLOOR = 1e-300
GRID_ROW_BUDGET = 1 << 20
FORWARD_CHUNK = 8192


def _predict_chunked(model: "DdnModel", x: np.ndarray, y: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Eval-mode heads [B x J x N]; chunking is exact because eval batch norm is per row."""
    outputs = []
    for start in range(0, x.shape[0], FORWARD_CHUNK):
        stop = start + FORWARD_CHUNK
        outputs.append(model.predict(x[start:stop], y[start:stop], mask[start:stop]))
    return np.concatenate(outputs, axis=0)


def conditional_heads(
    model: "DdnModel",
    x: np.ndarray,
    y_cond: np.ndarray,
    mask: Sequence[int],
    target_index: int,
) -> np.ndarray:
    """Batched p(y_target | x, y_cond[mask]) as [B x N] probability rows."""
    cfg = model.config
    mask = tuple(int(b) for b in mask)
    if len(mask) != cfg.target_dim:
        raise DdnDimensionError(f"mask has {len(mask)} bits for {cfg.target_dim} targets")
    if not 0 <= target_index < cfg.target_dim:
        raise DdnDimensionError(f"target index {target_index} outside 0..{cfg.target_dim - 1}")
    if mask[target_index]:
        raise DdnUsageError(f"target {target_index} cannot be conditioned on itself at inference")
    model.mask_set.require(mask)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y_cond = np.atleast_2d(np.asarray(y_cond, dtype=np.float64))
    masks = np.repeat(np.asarray([mask], dtype=np.float64), x.shape[0], axis=0)
    return _predict_chunked(model, x, y_cond, masks)[:, target_index, :]


def conditional_head(
    model: "DdnModel",
    x: np.ndarray,
    y_cond: np.ndarray,
    mask: Sequence[int],
    target_index: int,
) -> np.ndarray:
    """Single-condition version of ``conditional_heads``: one length-N vector."""
    return conditional_heads(model, np.atleast_2d(x), np.atleast_2d(y_cond), mask, target_index)[0]


def _path_grid(
    model: "DdnModel",
    x: np.ndarray,
    path: Sequence[int],
    coarse: List[BinPartition],
    group: int,
) -> np.ndarray:
    target_dim = model.config.target_dim
    resolution = coarse[0].bins
    # mass over the cells of path[:position], axes in path order
    mass = np.ones((1,), dtype=np.float64)
    conditions = np.zeros((1, target_dim), dtype=np.float64)
    for position, dim in enumerate(path):
        rows = conditions.shape[0]
        mask = prefix_mask(path, position, target_dim)
        heads = conditional_heads(model, np.repeat(x, rows, axis=0), conditions, mask, dim)
        factor = heads.astype(np.float64).reshape(rows, resolution, group).sum(axis=2)
        mass = (mass.reshape(rows, 1) * factor).reshape(-1)
        if position + 1 < len(path):
            conditions = np.repeat(conditions, resolution, axis=0)
            conditions[:, dim] = np.tile(coarse[dim].centers(), rows)
    mass = mass.reshape((resolution,) * target_dim)
    # axis p holds dimension path[p]; move every dimension back to its own axis
    return np.transpose(mass, axes=[list(path).index(d) for d in range(target_dim)])


def joint_grid(
    model: "DdnModel",
    x: np.ndarray,
    partitions: Sequence[BinPartition],
    paths: Optional[PermutationPaths] = None,
    resolution: Optional[int] = None,
    row_budget: int = GRID_ROW_BUDGET,
) -> DensityGrid:
    """
    Path-averaged joint density of y given one condition x on a grid.

    Cells are the model's bins, or ``resolution`` coarser cells per dimension
    when given (N must be a multiple of it). Later factors condition on the
    cell centers of earlier ones.
    """
    cfg = model.config
    paths = paths if paths is not None else model.paths
    n = cfg.bins_per_dim
    resolution = resolution or n
    if n % resolution != 0:
        raise DdnConfigError(f"grid resolution {resolution} must divide the bin count {n}")
    if len(partitions) != cfg.target_dim:
        raise DdnDimensionError(f"{len(partitions)} partitions for {cfg.target_dim} targets")
    rows = resolution ** (cfg.target_dim - 1)
    if rows > row_budget:
        raise DdnConfigError(
            f"a {resolution}^{cfg.target_dim} grid needs {rows} forward rows per path "
            f"(budget {row_budget}); pass a coarser resolution"
        )
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    coarse = coarse_partitions(partitions, resolution)
    masses = [_path_grid(model, x, path, coarse, n // resolution) for path in paths]
    mass = masses[0] if len(masses) == 1 else np.mean(np.stack(masses), axis=0)
    grid = DensityGrid(partitions=coarse, density=mass / np.prod([p.width for p in coarse]), condition=x[0])
    return grid


def path_grids(
    model: "DdnModel",
    x: np.ndarray,
    partitions: Sequence[BinPartition],
    resolution: Optional[int] = None,
) -> List[DensityGrid]:
    """One grid per frozen path, before averaging."""
    grids = []
    for path in model.paths:
        single = PermutationPaths(target_dim=model.paths.target_dim, paths=(path,))
        grids.append(joint_grid(model, x, partitions, paths=single, resolution=resolution))
    return grids


def log_likelihoods(
    model: "DdnModel",
    x: np.ndarray,
    y: np.ndarray,
    partitions: Sequence[BinPartition],
    paths: Optional[PermutationPaths] = None,
) -> np.ndarray:
    """
    Per-sample log of the path-averaged joint density at the true targets, each
    factor conditioned on the true values of earlier targets. Zero densities
    (targets outside the range) are floored at 1e-300 before the log.
    """
    paths = paths if paths is not None else model.paths
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    target_dim = model.config.target_dim
    if y.shape != (x.shape[0], target_dim):
        raise DdnDimensionError(f"y has shape {y.shape}, expected [{x.shape[0]} x {target_dim}]")
    products = []
    for path in paths:
        product = np.ones(x.shape[0], dtype=np.float64)
        for position, dim in enumerate(path):
            heads = conditional_heads(model, x, y, prefix_mask(path, position, target_dim), dim)
            product = product * partitions[dim].densities(heads, y[:, dim])
        products.append(product)
    mean = products[0] if len(products) == 1 else np.mean(np.stack(products), axis=0)
    return np.log(np.maximum(mean, LL_DENSITY_FLOOR))


def sample_log_likelihood(
    model: "DdnModel",
    x: np.ndarray,
    y: np.ndarray,
    partitions: Sequence[BinPartition],
    paths: Optional[PermutationPaths] = None,
) -> float:
    return float(log_likelihoods(model, np.atleast_2d(x), np.atleast_2d(y), partitions, paths)[0])


def sample_density(
    model: "DdnModel",
    x: np.ndarray,
    n: int,
    partitions: Sequence[BinPartition],
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Draw n targets from the estimated density at one condition x by ancestral
    sampling along a uniformly chosen frozen path, uniform within each bin.
    """
    target_dim = model.config.target_dim
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    samples = np.zeros((n, target_dim), dtype=np.float64)
    choice = rng.integers(0, model.paths.k, size=n)
    for k, path in enumerate(model.paths):
        rows = np.flatnonzero(choice == k)
        if rows.size == 0:
            continue
        drawn = np.zeros((rows.size, target_dim), dtype=np.float64)
        for position, dim in enumerate(path):
            heads = conditional_heads(
                model, np.repeat(x, rows.size, axis=0), drawn, prefix_mask(path, position, target_dim), dim
            ).astype(np.float64)
            cumulative = np.cumsum(heads, axis=1)
            u = rng.random(rows.size) * cumulative[:, -1]
            bins = np.minimum((cumulative < u[:, None]).sum(axis=1), heads.shape[1] - 1)
            edges = partitions[dim].edges()
            drawn[:, dim] = edges[bins] + rng.random(rows.size) * partitions[dim].width
        samples[rows] = drawn
    return samples
