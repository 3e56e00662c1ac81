"""Central finite-difference oracles for checking reverse-mode gradients."""
from typing import Callable, Iterable, List, Tuple

import numpy as np

from ddn.autodiff.tensor import Tensor


def numerical_gradient(
    loss_fn: Callable[[], Tensor],
    tensor: Tensor,
    index: Tuple[int, ...],
    h: float = 1e-3,
) -> float:
    """dLoss/dtensor[index] by central differences, accumulated in float64."""
    original = tensor.data[index].copy()
    try:
        tensor.data[index] = original + h
        plus = np.float64(loss_fn().item())
        tensor.data[index] = original - h
        minus = np.float64(loss_fn().item())
    finally:
        tensor.data[index] = original
    return float((plus - minus) / (2.0 * h))


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def analytic_gradients(loss_fn: Callable[[], Tensor], tensors: Iterable[Tensor]) -> List[np.ndarray]:
    tensors = list(tensors)
    for tensor in tensors:
        tensor.zero_grad()
    loss_fn().backward()
    return [
        tensor.grad.copy() if tensor.grad is not None else np.zeros_like(tensor.data)
        for tensor in tensors
    ]


def gradient_check(
    loss_fn: Callable[[], Tensor],
    tensors: Iterable[Tensor],
    n_samples: int = 20,
    h: float = 1e-3,
    rng: np.random.Generator = None,
) -> float:
    """
    Compare reverse-mode and finite-difference gradients on ``n_samples`` randomly
    chosen entries across ``tensors``; returns the worst relative error.

    ``loss_fn`` must be deterministic: rebuild the forward graph on every call.
    """
    tensors = list(tensors)
    rng = rng if rng is not None else np.random.default_rng(0)
    grads = analytic_gradients(loss_fn, tensors)
    sizes = np.array([t.size for t in tensors], dtype=np.float64)
    worst = 0.0
    for _ in range(n_samples):
        which = int(rng.choice(len(tensors), p=sizes / sizes.sum()))
        index = tuple(int(rng.integers(0, extent)) for extent in tensors[which].shape)
        numeric = numerical_gradient(loss_fn, tensors[which], index, h=h)
        worst = max(worst, relative_error(float(grads[which][index]), numeric))
    return worst
