from ddn.autodiff.tensor import Tensor, no_grad  # noqa: F401
from ddn.autodiff import functional  # noqa: F401
from ddn.autodiff.layers import (  # noqa: F401
    BatchNorm1d,
    Conv1d,
    LeakyReLU,
    Linear,
    Module,
    Sequential,
    Tanh,
    Upsample,
    dense_block,
)
