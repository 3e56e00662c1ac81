from ddn.model.config import Mode, ModelConfig, Variant  # noqa: F401
from ddn.model.network import DdnModel, HeadOutputs, LatentGaussian  # noqa: F401
from ddn.model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint  # noqa: F401
from ddn.model.factory import build_model, resolve_model_config  # noqa: F401
