from typing import Any, Dict, Optional, Sequence, Tuple

from dbt.events import AdapterLogger

from ddn.model.config import ModelConfig
from ddn.model.network import DdnModel

logger = AdapterLogger("DDN")


def resolve_model_config(
    overrides: Optional[Dict[str, Any]],
    input_dim: int,
    target_dim: int,
    target_range: Optional[Sequence[Tuple[float, float]]] = None,
) -> ModelConfig:
    """
    ModelConfig for a dataset's shape. A ``bins_per_dim`` override without an
    explicit ``initial_length`` re-derives the pathway's starting length; bin
    counts no integer upsampling chain reaches are rejected.
    """
    fields = dict(overrides or {})
    fields.setdefault("input_dim", input_dim)
    fields.setdefault("target_dim", target_dim)
    if target_range is not None:
        fields.setdefault("target_range", [list(r) for r in target_range])
    if "bins_per_dim" in fields and "initial_length" not in fields:
        variant = fields.get("variant")
        if variant is None or str(getattr(variant, "value", variant)) in ("ddn", "ddn_no_vl"):
            stages = len(fields.get("channels", [16, 8, 4, 1])) - 1
            fields["initial_length"] = ModelConfig.derive_initial_length(
                int(fields["bins_per_dim"]), int(fields.get("upsample_factor", 4)), stages
            )
    return ModelConfig.from_overrides(fields)


def build_model(
    overrides: Optional[Dict[str, Any]],
    input_dim: int,
    target_dim: int,
    target_range: Optional[Sequence[Tuple[float, float]]] = None,
    seed: int = 0,
) -> DdnModel:
    config = resolve_model_config(overrides, input_dim, target_dim, target_range)
    logger.debug(f"Building {config.variant.value} model for {input_dim} -> {target_dim} with seed {seed}")
    return DdnModel(config, seed=seed)
