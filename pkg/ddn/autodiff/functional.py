"""
Differentiable operations on Tensors.

Every op rejects mismatched shapes instead of broadcasting. The documented
exceptions are scalar constants, ``add_bias`` (a 1-D bias along one axis) and
the bias term of ``linear`` and ``conv1d``.
"""
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ddn.autodiff.tensor import Tensor
from ddn.exceptions import (
    DdnConfigError,
    DdnDimensionError,
    DdnNumericError,
    DdnUsageError,
    ShapeMismatchError,
)

Scalar = Union[float, int]

LEAKY_RELU_SLOPE = 0.01
BATCHNORM_MOMENTUM = 0.1
BATCHNORM_EPS = 1e-5


def as_tensor(value, like: Optional[Tensor] = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else None
    data = np.asarray(value, dtype=dtype)
    if like is not None and data.ndim == 0:
        data = np.full(like.shape, data, dtype=like.dtype)
    return Tensor(data, dtype=dtype)


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatchError(op, a.shape, b.shape)


# arithmetic


def add(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        return Tensor.from_op(a.data + a.dtype.type(b), (a,), lambda g: (g,), "add")
    _require_same_shape("add", a, b)
    return Tensor.from_op(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        return add(a, -b)
    _require_same_shape("sub", a, b)
    return Tensor.from_op(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a: Tensor, b: Union[Tensor, Scalar]) -> Tensor:
    if not isinstance(b, Tensor):
        c = a.dtype.type(b)
        return Tensor.from_op(a.data * c, (a,), lambda g: (g * c,), "mul")
    _require_same_shape("mul", a, b)

    def backward(g):
        return g * b.data, g * a.data

    return Tensor.from_op(a.data * b.data, (a, b), backward, "mul")


def mul_constant(a: Tensor, constant: np.ndarray) -> Tensor:
    """Elementwise product with a constant array of the same shape (no gradient to it)."""
    constant = np.asarray(constant, dtype=a.dtype)
    if constant.shape != a.shape:
        raise ShapeMismatchError("mul_constant", a.shape, constant.shape)
    return Tensor.from_op(a.data * constant, (a,), lambda g: (g * constant,), "mul_constant")


def square(a: Tensor) -> Tensor:
    return Tensor.from_op(a.data * a.data, (a,), lambda g: (2.0 * g * a.data,), "square")


def add_bias(a: Tensor, bias: Tensor, axis: int = -1) -> Tensor:
    """Add a 1-D bias along ``axis``, the one broadcast this module allows."""
    axis = axis % a.ndim
    if bias.ndim != 1 or bias.shape[0] != a.shape[axis]:
        raise ShapeMismatchError("add_bias", a.shape, bias.shape)
    view = [1] * a.ndim
    view[axis] = bias.shape[0]
    reduce_axes = tuple(i for i in range(a.ndim) if i != axis)

    def backward(g):
        return g, g.sum(axis=reduce_axes)

    return Tensor.from_op(a.data + bias.data.reshape(view), (a, bias), backward, "add_bias")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError("matmul", a.shape, b.shape)

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor.from_op(a.data @ b.data, (a, b), backward, "matmul")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x [B x in] times weight [in x out], plus bias [out]."""
    out = matmul(x, weight)
    return add_bias(out, bias, axis=-1) if bias is not None else out


# reductions and reshaping


def sum(a: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None) -> Tensor:  # noqa: A001
    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return Tensor.from_op(np.asarray(a.data.sum(axis=axis)), (a,), backward, "sum")


def mean(a: Tensor, axis: Optional[Union[int, Tuple[int, ...]]] = None) -> Tensor:
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return mul(sum(a, axis=axis), 1.0 / count)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeMismatchError("reshape", a.shape, shape) from exc
    return Tensor.from_op(data, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise DdnUsageError("concat needs at least one tensor")
    axis = axis % tensors[0].ndim
    for t in tensors[1:]:
        other_dims = [d for i, d in enumerate(t.shape) if i != axis]
        first_dims = [d for i, d in enumerate(tensors[0].shape) if i != axis]
        if t.ndim != tensors[0].ndim or other_dims != first_dims:
            raise ShapeMismatchError("concat", tensors[0].shape, t.shape)
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def backward(g):
        index = [slice(None)] * g.ndim
        grads = []
        for start, stop in zip(bounds[:-1], bounds[1:]):
            index[axis] = slice(start, stop)
            grads.append(g[tuple(index)])
        return grads

    data = np.concatenate([t.data for t in tensors], axis=axis)
    return Tensor.from_op(data, tensors, backward, "concat")


def narrow(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    """Slice ``a[..., start:stop, ...]`` along ``axis``."""
    axis = axis % a.ndim
    if not 0 <= start < stop <= a.shape[axis]:
        raise DdnDimensionError(f"narrow: [{start}, {stop}) outside axis {axis} of {a.shape}")
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, stop)
    index = tuple(index)

    def backward(g):
        full = np.zeros(a.shape, dtype=g.dtype)
        full[index] = g
        return (full,)

    return Tensor.from_op(a.data[index], (a,), backward, "narrow")


def gather_rows(a: Tensor, indices: np.ndarray) -> Tensor:
    """Pick ``a[m, indices[m]]`` for every row m of a 2-D tensor."""
    indices = np.asarray(indices, dtype=np.int64)
    if a.ndim != 2 or indices.shape != (a.shape[0],):
        raise ShapeMismatchError("gather_rows", a.shape, indices.shape)
    if indices.size and (indices.min() < 0 or indices.max() >= a.shape[1]):
        raise DdnDimensionError(f"gather_rows: index outside [0, {a.shape[1]})")
    rows = np.arange(a.shape[0])

    def backward(g):
        full = np.zeros(a.shape, dtype=g.dtype)
        full[rows, indices] = g
        return (full,)

    return Tensor.from_op(a.data[rows, indices], (a,), backward, "gather_rows")


# activations


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return Tensor.from_op(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def leaky_relu(a: Tensor, slope: float = LEAKY_RELU_SLOPE) -> Tensor:
    scale = np.where(a.data > 0, 1.0, slope).astype(a.dtype)
    return Tensor.from_op(a.data * scale, (a,), lambda g: (g * scale,), "leaky_relu")


def softplus(a: Tensor) -> Tensor:
    out = np.logaddexp(0.0, a.data).astype(a.dtype)
    # d/dx log(1 + e^x) is the logistic function
    slope = (0.5 * (1.0 + np.tanh(0.5 * a.data))).astype(a.dtype)
    return Tensor.from_op(out, (a,), lambda g: (g * slope,), "softplus")


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor.from_op(out, (a,), backward, "softmax")


def log(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise DdnNumericError("log of a non-positive value")
    return Tensor.from_op(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def clamp_min(a: Tensor, floor: float) -> Tensor:
    passed = a.data > floor
    out = np.where(passed, a.data, a.dtype.type(floor))
    return Tensor.from_op(out, (a,), lambda g: (g * passed,), "clamp_min")


# convolutional pieces


def _batched(t: Tensor, op: str) -> Tuple[Tensor, bool]:
    if t.ndim == 2:
        return reshape(t, (1,) + t.shape), True
    if t.ndim != 3:
        raise DdnDimensionError(f"{op}: expected [C x L] or [B x C x L], got {t.shape}")
    return t, False


def conv1d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """
    Stride-1 cross-correlation with zero same-padding.

    x is [C_in x L] or [B x C_in x L]; weight is [C_out x C_in x k] with k odd;
    the output keeps the input length.
    """
    if weight.ndim != 3:
        raise DdnDimensionError(f"conv1d: weight must be [C_out x C_in x k], got {weight.shape}")
    c_out, c_in, k = weight.shape
    if k % 2 == 0:
        raise DdnConfigError(f"conv1d: kernel width must be odd, got {k}")
    x3, squeeze = _batched(x, "conv1d")
    if x3.shape[1] != c_in:
        raise ShapeMismatchError("conv1d", x3.shape, weight.shape)
    pad = (k - 1) // 2
    length = x3.shape[2]
    padded = np.pad(x3.data, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(padded, k, axis=2)  # [B, C_in, L, k]
    out = np.einsum("bclk,ock->bol", windows, weight.data, optimize=True)

    def backward(g):
        grad_w = np.einsum("bclk,bol->ock", windows, g, optimize=True)
        grad_padded = np.zeros_like(padded)
        for t in range(k):
            grad_padded[:, :, t : t + length] += np.einsum("bol,oc->bcl", g, weight.data[:, :, t])
        return grad_padded[:, :, pad : pad + length], grad_w

    result = Tensor.from_op(out.astype(x3.dtype, copy=False), (x3, weight), backward, "conv1d")
    if bias is not None:
        result = add_bias(result, bias, axis=1)
    return reshape(result, result.shape[1:]) if squeeze else result


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Repeat every value ``factor`` times along the last (length) axis."""
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise DdnConfigError(f"upsample factor must be a positive integer, got {factor!r}")
    if x.ndim not in (2, 3):
        raise DdnDimensionError(f"upsample_nearest: expected [C x L] or [B x C x L], got {x.shape}")
    if factor == 1:
        return x

    def backward(g):
        return (g.reshape(g.shape[:-1] + (x.shape[-1], factor)).sum(axis=-1),)

    return Tensor.from_op(np.repeat(x.data, factor, axis=-1), (x,), backward, "upsample_nearest")


def batchnorm1d(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BATCHNORM_MOMENTUM,
    eps: float = BATCHNORM_EPS,
) -> Tensor:
    """
    Batch normalization over [B x F] (per feature) or [B x C x L] (per channel).

    In training mode the batch statistics normalize the input and the running
    statistics are updated in place; in eval mode the running statistics are used.
    """
    if x.ndim not in (2, 3):
        raise DdnDimensionError(f"batchnorm1d: expected [B x F] or [B x C x L], got {x.shape}")
    features = x.shape[1]
    if gamma.shape != (features,) or beta.shape != (features,):
        raise ShapeMismatchError("batchnorm1d", x.shape, gamma.shape)
    axes = (0,) if x.ndim == 2 else (0, 2)
    view = (1, features) if x.ndim == 2 else (1, features, 1)
    g_view = gamma.data.reshape(view)
    b_view = beta.data.reshape(view)

    if not training:
        inv_std = (1.0 / np.sqrt(running_var + eps)).astype(x.dtype).reshape(view)
        x_hat = (x.data - running_mean.reshape(view).astype(x.dtype)) * inv_std
        out = g_view * x_hat + b_view

        def eval_backward(g):
            return g * g_view * inv_std, (g * x_hat).sum(axis=axes), g.sum(axis=axes)

        return Tensor.from_op(out, (x, gamma, beta), eval_backward, "batchnorm1d")

    count = x.size // features
    if x.shape[0] < 2:
        raise DdnUsageError("batchnorm1d: training mode needs a batch of at least 2 samples")
    batch_mean = x.data.mean(axis=axes)
    batch_var = x.data.var(axis=axes)
    inv_std = 1.0 / np.sqrt(batch_var + eps)
    x_hat = (x.data - batch_mean.reshape(view)) * inv_std.reshape(view)
    out = g_view * x_hat + b_view

    running_mean *= 1.0 - momentum
    running_mean += momentum * batch_mean
    running_var *= 1.0 - momentum
    running_var += momentum * batch_var * count / (count - 1)

    def train_backward(g):
        grad_gamma = (g * x_hat).sum(axis=axes)
        grad_beta = g.sum(axis=axes)
        d_hat = g * g_view
        grad_x = (inv_std.reshape(view) / count) * (
            count * d_hat
            - d_hat.sum(axis=axes, keepdims=True)
            - x_hat * (d_hat * x_hat).sum(axis=axes, keepdims=True)
        )
        return grad_x, grad_gamma, grad_beta

    return Tensor.from_op(out.astype(x.dtype, copy=False), (x, gamma, beta), train_backward, "batchnorm1d")
