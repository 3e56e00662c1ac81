from dataclasses import dataclass, field
from typing import List, Optional, Set, Tuple

from dbt.adapters.relation_configs import RelationConfigValidationRule
from dbt.dataclass_schema import StrEnum
from mashumaro.jsonschema.annotations import Maximum, Minimum
from typing_extensions import Annotated

from ddn.configs import ConfigBase
from ddn.exceptions import DdnConfigError

TOY_RANGE = (-10.0, 10.0)


class Variant(StrEnum):
    ddn = "ddn"
    ddn_no_vl = "ddn_no_vl"
    mlp = "mlp"
    mlp_vl = "mlp_vl"

    @classmethod
    def default(cls) -> "Variant":
        return cls.ddn

    @property
    def has_variational_layer(self) -> bool:
        return self in (Variant.ddn, Variant.mlp_vl)

    @property
    def uses_deconvolution(self) -> bool:
        return self in (Variant.ddn, Variant.ddn_no_vl)


class Mode(StrEnum):
    train = "train"
    eval = "eval"

    @classmethod
    def default(cls) -> "Mode":
        return cls.eval


@dataclass(frozen=True)
class ModelConfig(ConfigBase):
    """
    Architecture of a DDN model and its ablation variants.

    The deconvolutional pathway of each head starts from a map of
    ``channels[0]`` x ``initial_length`` and runs ``len(channels) - 1``
    upsample stages, so ``bins_per_dim`` must equal
    ``initial_length * upsample_factor ** (len(channels) - 1)``.
    """

    input_dim: Annotated[int, Minimum(1)]
    target_dim: Annotated[int, Minimum(1)]
    bins_per_dim: Annotated[int, Minimum(2)] = 256
    latent_dim: Annotated[int, Minimum(1)] = 16
    beta: Annotated[float, Minimum(0)] = 0.1
    variant: Variant = Variant.default()
    target_range: Optional[List[Tuple[float, float]]] = None
    hidden_width: Annotated[int, Minimum(1)] = 64
    branch_width: Annotated[int, Minimum(1)] = 32
    channels: List[int] = field(default_factory=lambda: [16, 8, 4, 1])
    initial_length: Annotated[int, Minimum(1)] = 4
    kernel_size: Annotated[int, Minimum(1)] = 5
    upsample_factor: Annotated[int, Minimum(1)] = 4
    paths_k: Annotated[int, Minimum(1), Maximum(120)] = 5
    paths_seed: int = 0

    def __post_init__(self):
        if self.target_range is None:
            object.__setattr__(self, "target_range", [TOY_RANGE] * self.target_dim)
        else:
            object.__setattr__(
                self, "target_range", [(float(lo), float(hi)) for lo, hi in self.target_range]
            )
        object.__setattr__(self, "channels", [int(c) for c in self.channels])
        super().__post_init__()

    @property
    def upsample_stages(self) -> int:
        return len(self.channels) - 1

    @property
    def reachable_bins(self) -> int:
        return self.initial_length * self.upsample_factor ** self.upsample_stages

    @property
    def validation_rules(self) -> Set[RelationConfigValidationRule]:
        return {
            RelationConfigValidationRule(
                validation_check=self.beta >= 0,
                validation_error=DdnConfigError(f"beta must be non-negative, got {self.beta}"),
            ),
            RelationConfigValidationRule(
                validation_check=len(self.target_range) == self.target_dim,
                validation_error=DdnConfigError(
                    f"target_range has {len(self.target_range)} entries for {self.target_dim} targets"
                ),
            ),
            RelationConfigValidationRule(
                validation_check=all(lo < hi for lo, hi in self.target_range),
                validation_error=DdnConfigError(
                    f"every target range needs lo < hi, got {self.target_range}"
                ),
            ),
            RelationConfigValidationRule(
                validation_check=self.kernel_size % 2 == 1,
                validation_error=DdnConfigError(
                    f"kernel_size must be odd, got {self.kernel_size}"
                ),
            ),
            RelationConfigValidationRule(
                validation_check=len(self.channels) >= 2 and self.channels[-1] == 1,
                validation_error=DdnConfigError(
                    f"channels must list at least two stages and end with 1, got {self.channels}"
                ),
            ),
            RelationConfigValidationRule(
                validation_check=not self.variant.uses_deconvolution
                or self.reachable_bins == self.bins_per_dim,
                validation_error=DdnConfigError(
                    f"{self.bins_per_dim} bins are not reachable: initial length {self.initial_length} "
                    f"x {self.upsample_factor}^{self.upsample_stages} = {self.reachable_bins}"
                ),
            ),
        }

    @staticmethod
    def derive_initial_length(bins: int, upsample_factor: int = 4, stages: int = 3) -> int:
        """Initial map length reaching ``bins`` after ``stages`` integer upsamplings."""
        scale = upsample_factor ** stages
        if bins < scale or bins % scale != 0:
            raise DdnConfigError(
                f"{bins} bins cannot be reached by {stages} upsample stages of factor "
                f"{upsample_factor}; use a multiple of {scale}"
            )
        return bins // scale

    @property
    def deconv_input_size(self) -> int:
        return self.target_dim * self.channels[0] * self.initial_length
