import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
from dbt.adapters.relation_configs import RelationConfigValidationMixin, RelationConfigValidationRule

from ddn.exceptions import DdnConfigError, DdnUsageError

K_CAP = 5

Path = Tuple[int, ...]
Mask = Tuple[int, ...]


@dataclass(frozen=True, eq=True, unsafe_hash=True)
class PermutationPaths(RelationConfigValidationMixin):
    """
    K frozen chain-rule orderings of the J target dimensions.

    Target dimensions are 0-based here: the path (1, 0) factorizes
    p(y1, y0 | x) = p(y1 | x) p(y0 | x, y1).
    """

    target_dim: int
    paths: Tuple[Path, ...]
    seed: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        self.run_validation_rules()

    @property
    def validation_rules(self) -> Set[RelationConfigValidationRule]:
        return {
            RelationConfigValidationRule(
                validation_check=len(self.paths) >= 1,
                validation_error=DdnConfigError("at least one chain-rule path is required"),
            ),
            RelationConfigValidationRule(
                validation_check=all(
                    sorted(path) == list(range(self.target_dim)) for path in self.paths
                ),
                validation_error=DdnConfigError(
                    f"every path must be a permutation of 0..{self.target_dim - 1}: {self.paths}"
                ),
            ),
            RelationConfigValidationRule(
                validation_check=len(set(self.paths)) == len(self.paths),
                validation_error=DdnConfigError(f"duplicate chain-rule paths: {self.paths}"),
            ),
        }

    @property
    def k(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def to_dict(self) -> dict:
        return {"target_dim": self.target_dim, "seed": self.seed, "paths": [list(p) for p in self.paths]}

    @classmethod
    def from_dict(cls, config_dict: dict) -> "PermutationPaths":
        return cls(
            target_dim=int(config_dict["target_dim"]),
            paths=tuple(tuple(int(i) for i in p) for p in config_dict["paths"]),
            seed=config_dict.get("seed"),
        )


def build_paths(target_dim: int, k_cap: int = K_CAP, seed: Optional[int] = 0) -> PermutationPaths:
    """
    K = min(J!, k_cap) distinct permutations. When J! <= k_cap all of them are
    used, in lexicographic order; otherwise K are drawn without replacement.
    """
    if target_dim < 1:
        raise DdnConfigError(f"target dimension must be at least 1, got {target_dim}")
    if k_cap < 1:
        raise DdnConfigError(f"path cap must be at least 1, got {k_cap}")

    if math.factorial(target_dim) <= k_cap:
        paths = tuple(itertools.permutations(range(target_dim)))
        return PermutationPaths(target_dim=target_dim, paths=paths, seed=seed)

    rng = np.random.default_rng(seed)
    chosen: List[Path] = []
    seen = set()
    while len(chosen) < k_cap:
        path = tuple(int(i) for i in rng.permutation(target_dim))
        if path not in seen:
            seen.add(path)
            chosen.append(path)
    return PermutationPaths(target_dim=target_dim, paths=tuple(chosen), seed=seed)


def prefix_mask(path: Sequence[int], position: int, target_dim: int) -> Mask:
    """Mask with ones exactly at path[:position], the conditions of factor ``position``."""
    bits = [0] * target_dim
    for dim in path[:position]:
        bits[dim] = 1
    return tuple(bits)


@dataclass(frozen=True, eq=True)
class MaskSet:
    """Deduplicated conditional masks of every prefix of every path, sorted lexicographically."""

    masks: Tuple[Mask, ...]

    @property
    def target_dim(self) -> int:
        return len(self.masks[0])

    def __len__(self) -> int:
        return len(self.masks)

    def __contains__(self, mask: Iterable[int]) -> bool:
        return tuple(int(b) for b in mask) in self.masks

    def as_array(self) -> np.ndarray:
        return np.asarray(self.masks, dtype=np.float32)

    def require(self, mask: Iterable[int]) -> Mask:
        mask = tuple(int(b) for b in mask)
        if mask not in self.masks:
            raise DdnUsageError(f"mask {mask} is not part of the frozen mask set")
        return mask

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` masks uniformly (with replacement) from the set."""
        picks = rng.integers(0, len(self.masks), size=count)
        return self.as_array()[picks]


def build_mask_set(paths: PermutationPaths) -> MaskSet:
    masks = {
        prefix_mask(path, position, paths.target_dim)
        for path in paths
        for position in range(paths.target_dim)
    }
    return MaskSet(masks=tuple(sorted(masks)))
