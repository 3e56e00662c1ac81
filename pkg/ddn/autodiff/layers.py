from collections import OrderedDict
from typing import Dict, Iterator, List, Tuple

import numpy as np

from ddn.autodiff import functional as F
from ddn.autodiff.tensor import Tensor
from ddn.exceptions import DdnConfigError, DdnDimensionError


class Module:
    """
    Base class for layers with named parameters, buffers and children.

    Parameters are trainable Tensors with ``requires_grad`` set. Buffers are
    plain arrays (batch-norm running statistics) that travel with checkpoints
    but never receive gradient updates.
    """

    def __init__(self):
        self.training = True
        self._parameters: "OrderedDict[str, Tensor]" = OrderedDict()
        self._buffers: "OrderedDict[str, np.ndarray]" = OrderedDict()
        self._children: "OrderedDict[str, Module]" = OrderedDict()

    def register_parameter(self, name: str, tensor: Tensor) -> Tensor:
        tensor.requires_grad = True
        tensor.name = name
        self._parameters[name] = tensor
        return tensor

    def register_buffer(self, name: str, array: np.ndarray) -> np.ndarray:
        self._buffers[name] = array
        return array

    def add_module(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Tensor]]:
        for name, tensor in self._parameters.items():
            yield prefix + name, tensor
        for child_name, child in self._children.items():
            yield from child.named_parameters(prefix + child_name + ".")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, array in self._buffers.items():
            yield prefix + name, array
        for child_name, child in self._children.items():
            yield from child.named_buffers(prefix + child_name + ".")

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    def children(self) -> Iterator["Module"]:
        return iter(self._children.values())

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for child in self._children.values():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for tensor in self.parameters():
            tensor.zero_grad()

    def astype(self, dtype) -> "Module":
        """Cast parameters and buffers in place, e.g. to float64 for gradient checks."""
        for _, tensor in self.named_parameters():
            tensor.data = tensor.data.astype(dtype)
            tensor.grad = None
        for module in self.modules():
            for name in module._buffers:
                module._buffers[name] = module._buffers[name].astype(dtype)
        return self

    def modules(self) -> Iterator["Module"]:
        yield self
        for child in self._children.values():
            yield from child.modules()

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state: "OrderedDict[str, np.ndarray]" = OrderedDict()
        for name, tensor in self.named_parameters():
            state[name] = tensor.data
        for name, array in self.named_buffers():
            state[name] = array
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        expected = self.state_dict()
        missing = set(expected) - set(state)
        unexpected = set(state) - set(expected)
        if missing or unexpected:
            raise DdnConfigError(
                f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}"
            )
        for module_prefix, module in self._named_modules():
            for name, tensor in module._parameters.items():
                value = np.asarray(state[module_prefix + name], dtype=tensor.dtype)
                if value.shape != tensor.shape:
                    raise DdnDimensionError(
                        f"parameter {module_prefix + name}: checkpoint shape {value.shape} "
                        f"does not match model shape {tensor.shape}"
                    )
                tensor.data = value.copy()
                tensor.grad = None
            for name, array in module._buffers.items():
                value = np.asarray(state[module_prefix + name], dtype=array.dtype)
                if value.shape != array.shape:
                    raise DdnDimensionError(f"buffer {module_prefix + name}: shape mismatch")
                module._buffers[name] = value.copy()

    def _named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix, self
        for name, child in self._children.items():
            yield from child._named_modules(prefix + name + ".")

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _fan_in_uniform(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(np.float32))


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = self.register_parameter(
            "weight", _fan_in_uniform(rng, (in_features, out_features), in_features)
        )
        self.bias = self.register_parameter("bias", Tensor(np.zeros(out_features, dtype=np.float32)))

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int, rng: np.random.Generator):
        super().__init__()
        if kernel_size % 2 == 0:
            raise DdnConfigError(f"kernel width must be odd, got {kernel_size}")
        fan_in = in_channels * kernel_size
        self.weight = self.register_parameter(
            "weight", _fan_in_uniform(rng, (out_channels, in_channels, kernel_size), fan_in)
        )
        self.bias = self.register_parameter("bias", Tensor(np.zeros(out_channels, dtype=np.float32)))

    def forward(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.weight, self.bias)


class BatchNorm1d(Module):
    def __init__(
        self,
        num_features: int,
        momentum: float = F.BATCHNORM_MOMENTUM,
        eps: float = F.BATCHNORM_EPS,
    ):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = self.register_parameter("gamma", Tensor(np.ones(num_features, dtype=np.float32)))
        self.beta = self.register_parameter("beta", Tensor(np.zeros(num_features, dtype=np.float32)))
        self.register_buffer("running_mean", np.zeros(num_features, dtype=np.float32))
        self.register_buffer("running_var", np.ones(num_features, dtype=np.float32))

    def forward(self, x: Tensor) -> Tensor:
        return F.batchnorm1d(
            x,
            self.gamma,
            self.beta,
            self._buffers["running_mean"],
            self._buffers["running_var"],
            training=self.training,
            momentum=self.momentum,
            eps=self.eps,
        )


class Upsample(Module):
    def __init__(self, factor: int):
        super().__init__()
        self.factor = factor

    def forward(self, x: Tensor) -> Tensor:
        return F.upsample_nearest(x, self.factor)


class Tanh(Module):
    def forward(self, x: Tensor) -> Tensor:
        return F.tanh(x)


class LeakyReLU(Module):
    def __init__(self, slope: float = F.LEAKY_RELU_SLOPE):
        super().__init__()
        self.slope = slope

    def forward(self, x: Tensor) -> Tensor:
        return F.leaky_relu(x, self.slope)


class Sequential(Module):
    def __init__(self, *modules: Module):
        super().__init__()
        for index, module in enumerate(modules):
            self.add_module(str(index), module)

    def forward(self, x: Tensor) -> Tensor:
        for module in self._children.values():
            x = module(x)
        return x


def dense_block(in_features: int, out_features: int, rng: np.random.Generator) -> Sequential:
    """Linear -> BatchNorm -> tanh, the hidden layer of the encoder."""
    return Sequential(Linear(in_features, out_features, rng), BatchNorm1d(out_features), Tanh())

