from ddn.training.config import TrainConfig  # noqa: F401
from ddn.training.optimizer import Adam  # noqa: F401
from ddn.training.trainer import EpochStats, Trainer, TrainingResult, train  # noqa: F401
