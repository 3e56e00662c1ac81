import itertools
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from dbt.events import AdapterLogger

from ddn.exceptions import DdnDimensionError, exception_handler
from ddn.objective.partition import BinPartition, cell_volume


logger = AdapterLogger("DDN")


@dataclass
class DensityGrid:
    """Piecewise-constant density over the cells of one partition per target dimension."""

    partitions: List[BinPartition]
    density: np.ndarray
    condition: np.ndarray

    def __post_init__(self):
        expected = tuple(p.bins for p in self.partitions)
        if self.density.shape != expected:
            raise DdnDimensionError(f"density grid {self.density.shape} does not match partitions {expected}")

    @property
    def dims(self) -> int:
        return len(self.partitions)

    @property
    def cell_volume(self) -> float:
        return cell_volume(self.partitions)

    @property
    def mass(self) -> np.ndarray:
        return self.density * self.cell_volume

    def total_mass(self) -> float:
        return float(self.mass.sum())

    def centers(self) -> List[np.ndarray]:
        return [p.centers() for p in self.partitions]

    def same_geometry(self, other: "DensityGrid") -> bool:
        return self.partitions == other.partitions

    def center_mesh(self) -> np.ndarray:
        """Coordinates of every cell center, [cells x J] in row-major cell order."""
        mesh = np.meshgrid(*self.centers(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def format_grid(grid: DensityGrid) -> str:
    lines = [
        f"# dims\t{grid.dims}",
        "# ranges\t" + "\t".join(f"{p.lo:.9g},{p.hi:.9g}" for p in grid.partitions),
        "# bins\t" + "\t".join(str(p.bins) for p in grid.partitions),
        "# condition\t" + "\t".join(f"{v:.9g}" for v in np.ravel(grid.condition)),
    ]
    header = [f"i{j}" for j in range(grid.dims)] + [f"y{j}" for j in range(grid.dims)] + ["density"]
    lines.append("\t".join(header))
    centers = grid.centers()
    for index in itertools.product(*(range(p.bins) for p in grid.partitions)):
        coords = [centers[j][i] for j, i in enumerate(index)]
        row = [str(i) for i in index] + [f"{c:.9g}" for c in coords] + [f"{grid.density[index]:.9g}"]
        lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


def export_grid(grid: DensityGrid, path: str) -> None:
    text = format_grid(grid)
    with exception_handler(f"writing density grid {path}"):
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
    logger.debug(f"Exported density grid with {grid.density.size} cells to {path}")


def read_grid(path: str) -> DensityGrid:
    with exception_handler(f"reading density grid {path}"):
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
    meta = {}
    for line in lines:
        if line.startswith("# "):
            key, _, value = line[2:].partition("\t")
            meta[key] = value.split("\t") if value else []
    ranges = [tuple(float(v) for v in r.split(",")) for r in meta["ranges"]]
    bins = [int(b) for b in meta["bins"]]
    partitions = [BinPartition(lo=lo, hi=hi, bins=n) for (lo, hi), n in zip(ranges, bins)]
    density = np.zeros(bins, dtype=np.float64)
    dims = len(bins)
    for line in lines[5:]:
        if not line:
            continue
        fields = line.split("\t")
        density[tuple(int(i) for i in fields[:dims])] = float(fields[-1])
    condition = np.asarray([float(v) for v in meta["condition"]], dtype=np.float64)
    return DensityGrid(partitions=partitions, density=density, condition=condition)


def coarse_partitions(partitions: Sequence[BinPartition], resolution: int) -> List[BinPartition]:
    return [BinPartition(lo=p.lo, hi=p.hi, bins=resolution) for p in partitions]
