"""
Dense float tensors with reverse-mode automatic differentiation.

A Tensor produced by an op records its parents and a backward closure when any
parent requires a gradient. ``Tensor.backward`` walks that graph in reverse
topological order; gradients accumulate into the ``grad`` buffer of leaf tensors
only, so repeated calls add up until ``zero_grad`` is called.
"""
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ddn.exceptions import DdnNumericError, DdnUsageError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
ArrayLike = Union[np.ndarray, float, int, Sequence]

DEFAULT_DTYPE = np.float32

# graph recording is per thread; a graph never crosses threads
_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Run ops without recording a backward graph (inference)."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


def _as_array(data: ArrayLike, dtype) -> np.ndarray:
    if dtype is None:
        if isinstance(data, np.ndarray) and np.issubdtype(data.dtype, np.floating):
            dtype = data.dtype
        else:
            dtype = DEFAULT_DTYPE
    return np.ascontiguousarray(np.asarray(data, dtype=dtype))


class Tensor:
    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        dtype=None,
        name: Optional[str] = None,
    ):
        self.data = _as_array(data, dtype)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[BackwardFn] = None
        self._op = ""

    @classmethod
    def from_op(
        cls,
        data: np.ndarray,
        parents: Iterable["Tensor"],
        backward: BackwardFn,
        op: str,
    ) -> "Tensor":
        data = np.asarray(data)
        if not np.all(np.isfinite(data)):
            raise DdnNumericError(f"{op} produced non-finite values")
        parents = tuple(parents)
        out = cls(data, dtype=data.dtype)
        if is_grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        out._op = op
        return out

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{grad})"

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise DdnUsageError(f"item() needs a single element, tensor has shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.dtype)

    def zero_grad(self) -> None:
        self.grad = None

    def _topological_order(self) -> List["Tensor"]:
        order: List[Tensor] = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return order

    def backward(self) -> None:
        if self.data.size != 1:
            raise DdnUsageError(
                f"backward() needs a scalar loss, got a tensor of shape {self.shape}"
            )
        if not self.requires_grad:
            raise DdnUsageError("backward() called on a tensor that does not require grad")

        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(self._topological_order()):
            grad = grads.pop(id(node), None)
            if grad is None:
                continue
            if node.is_leaf:
                grad = grad.astype(node.dtype, copy=False)
                node.grad = grad.copy() if node.grad is None else node.grad + grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                parent_grad = np.asarray(parent_grad)
                if parent_grad.shape != parent.shape:
                    parent_grad = parent_grad.reshape(parent.shape)
                key = id(parent)
                grads[key] = grads[key] + parent_grad if key in grads else parent_grad

    # operator sugar; the ops themselves live in ddn.autodiff.functional
    def __add__(self, other):
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return F.sub(self, other)

    def __rsub__(self, other):
        return F.sub(F.as_tensor(other, like=self), self)

    def __mul__(self, other):
        return F.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return F.mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise DdnUsageError("division is only defined by a constant")
        return F.mul(self, 1.0 / other)

    def __matmul__(self, other):
        return F.matmul(self, other)

    def sum(self, axis=None):
        return F.sum(self, axis=axis)

    def mean(self, axis=None):
        return F.mean(self, axis=axis)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)


from ddn.autodiff import functional as F  # noqa: E402
