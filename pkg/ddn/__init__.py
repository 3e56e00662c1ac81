# these are mostly just exports, #noqa them so flake8 will be happy
from ddn.__version__ import version as __version__  # noqa: F401
from ddn.model import DdnModel, ModelConfig, Variant  # noqa: F401
from ddn.objective import BinPartition  # noqa: F401
from ddn.chain import PermutationPaths, MaskSet  # noqa: F401
from ddn.training import TrainConfig, Trainer  # noqa: F401
