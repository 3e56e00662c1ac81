import math
from dataclasses import dataclass
from typing import List, Sequence, Set, Tuple, Union

import numpy as np
from dbt.adapters.relation_configs import RelationConfigValidationMixin, RelationConfigValidationRule

from ddn.exceptions import DdnConfigError, OutOfRangeError


@dataclass(frozen=True, eq=True, unsafe_hash=True)
class BinPartition(RelationConfigValidationMixin):
    """
    [lo, hi) split into ``bins`` uniform bins of width (hi - lo) / bins.

    The upper endpoint ``hi`` itself is assigned to the last bin.
    """

    lo: float
    hi: float
    bins: int = 256

    def __post_init__(self):
        self.run_validation_rules()

    @property
    def validation_rules(self) -> Set[RelationConfigValidationRule]:
        return {
            RelationConfigValidationRule(
                validation_check=self.lo < self.hi,
                validation_error=DdnConfigError(f"partition needs lo < hi, got ({self.lo}, {self.hi})"),
            ),
            RelationConfigValidationRule(
                validation_check=self.bins >= 1,
                validation_error=DdnConfigError(f"partition needs at least one bin, got {self.bins}"),
            ),
        }

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    def edges(self) -> np.ndarray:
        return self.lo + self.width * np.arange(self.bins + 1, dtype=np.float64)

    def centers(self) -> np.ndarray:
        return self.lo + self.width * (np.arange(self.bins, dtype=np.float64) + 0.5)

    def contains(self, y: Union[float, np.ndarray]) -> Union[bool, np.ndarray]:
        return (y >= self.lo) & (y <= self.hi)

    def bin_index(self, y: float) -> int:
        if not self.contains(y):
            raise OutOfRangeError(y, self.lo, self.hi)
        return min(int(math.floor((y - self.lo) / self.width)), self.bins - 1)

    def bin_indices(self, y: np.ndarray, strict: bool = True) -> np.ndarray:
        """
        Vectorized ``bin_index``. With ``strict=False`` out-of-range values map
        to -1 instead of raising.
        """
        y = np.asarray(y, dtype=np.float64)
        inside = self.contains(y)
        if strict and not np.all(inside):
            bad = float(y[~inside].flat[0])
            raise OutOfRangeError(bad, self.lo, self.hi)
        index = np.floor((y - self.lo) / self.width)
        index = np.clip(np.nan_to_num(index, nan=0.0), 0, self.bins - 1).astype(np.int64)
        return np.where(inside, index, -1)

    def piecewise_density(self, probs: np.ndarray, y: float) -> float:
        """probs[bin(y)] / width, and 0 outside the range."""
        if not self.contains(y):
            return 0.0
        return float(probs[self.bin_index(y)]) / self.width

    def densities(self, probs: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Vectorized piecewise density for rows of ``probs`` [M x N] at targets ``y`` [M]."""
        index = self.bin_indices(y, strict=False)
        rows = np.arange(len(index))
        values = np.asarray(probs, dtype=np.float64)[rows, np.maximum(index, 0)] / self.width
        return np.where(index >= 0, values, 0.0)

    @classmethod
    def for_data(cls, values: np.ndarray, bins: int = 256) -> "BinPartition":
        """(floor(min) - 1, ceil(max) + 1), the range used for tabular targets."""
        values = np.asarray(values, dtype=np.float64)
        return cls(lo=math.floor(values.min()) - 1.0, hi=math.ceil(values.max()) + 1.0, bins=bins)


def partitions_for(ranges: Sequence[Tuple[float, float]], bins: int) -> List[BinPartition]:
    return [BinPartition(lo=float(lo), hi=float(hi), bins=bins) for lo, hi in ranges]


def cell_volume(partitions: Sequence[BinPartition]) -> float:
    return float(np.prod([p.width for p in partitions]))
