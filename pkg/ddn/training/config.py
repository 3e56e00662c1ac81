from dataclasses import dataclass
from typing import Optional, Set

from dbt.adapters.relation_configs import RelationConfigValidationRule
from mashumaro.jsonschema.annotations import ExclusiveMinimum, Maximum, Minimum
from typing_extensions import Annotated

from ddn.configs import ConfigBase
from ddn.exceptions import DdnConfigError


@dataclass(frozen=True)
class TrainConfig(ConfigBase):
    """
    Optimization settings. Adam runs with its usual defaults at learning rate
    3e-4 on batches of 256. ``beta`` overrides the model config's KL weight when
    set. ``checkpoint_every`` of 0 writes only the final checkpoint. Wall-clock
    seconds are only recorded with ``record_timing`` so metrics logs replay exactly.
    """

    learning_rate: Annotated[float, ExclusiveMinimum(0)] = 3e-4
    batch_size: Annotated[int, Minimum(2)] = 256
    epochs: Annotated[int, Minimum(0)] = 100
    beta: Optional[float] = None
    seed: int = 0
    adam_beta1: Annotated[float, Minimum(0), Maximum(1)] = 0.9
    adam_beta2: Annotated[float, Minimum(0), Maximum(1)] = 0.999
    adam_eps: Annotated[float, ExclusiveMinimum(0)] = 1e-8
    checkpoint_every: Annotated[int, Minimum(0)] = 0
    clip_norm: Optional[float] = None
    record_timing: bool = False

    @property
    def validation_rules(self) -> Set[RelationConfigValidationRule]:
        return {
            RelationConfigValidationRule(
                validation_check=self.learning_rate > 0,
                validation_error=DdnConfigError(f"learning_rate must be positive, got {self.learning_rate}"),
            ),
            RelationConfigValidationRule(
                validation_check=self.batch_size >= 2,
                validation_error=DdnConfigError(
                    f"batch_size must be at least 2 for batch normalization, got {self.batch_size}"
                ),
            ),
            RelationConfigValidationRule(
                validation_check=self.epochs >= 0,
                validation_error=DdnConfigError(f"epochs must be non-negative, got {self.epochs}"),
            ),
            RelationConfigValidationRule(
                validation_check=self.beta is None or self.beta >= 0,
                validation_error=DdnConfigError(f"beta must be non-negative, got {self.beta}"),
            ),
            RelationConfigValidationRule(
                validation_check=0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1,
                validation_error=DdnConfigError(
                    f"Adam moment decays must lie in [0, 1), got ({self.adam_beta1}, {self.adam_beta2})"
                ),
            ),
            RelationConfigValidationRule(
                validation_check=self.adam_eps > 0,
                validation_error=DdnConfigError(f"adam_eps must be positive, got {self.adam_eps}"),
            ),
            RelationConfigValidationRule(
                validation_check=self.checkpoint_every >= 0,
                validation_error=DdnConfigError(
                    f"checkpoint_every must be non-negative, got {self.checkpoint_every}"
                ),
            ),
            RelationConfigValidationRule(
                validation_check=self.clip_norm is None or self.clip_norm > 0,
                validation_error=DdnConfigError(f"clip_norm must be positive when set, got {self.clip_norm}"),
            ),
        }
