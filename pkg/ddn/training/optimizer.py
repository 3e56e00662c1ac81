from collections import OrderedDict
from typing import Dict, List, Optional, Tuple

import numpy as np

from ddn.autodiff.tensor import Tensor
from ddn.exceptions import DdnConfigError, DdnNumericError

STATE_PREFIX = "adam"


class Adam:
    """
    Adam with bias-corrected moments:

        m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
        w -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)

    Parameters without a gradient after backward are left untouched.
    """

    def __init__(
        self,
        named_parameters: List[Tuple[str, Tensor]],
        lr: float = 3e-4,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        clip_norm: Optional[float] = None,
    ):
        self.params: "OrderedDict[str, Tensor]" = OrderedDict(named_parameters)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.clip_norm = clip_norm
        self.t = 0
        self.m: Dict[str, np.ndarray] = {name: np.zeros_like(p.data) for name, p in self.params.items()}
        self.v: Dict[str, np.ndarray] = {name: np.zeros_like(p.data) for name, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def grad_norm(self) -> float:
        total = 0.0
        for p in self.params.values():
            if p.grad is not None:
                total += float(np.sum(np.square(p.grad, dtype=np.float64)))
        return float(np.sqrt(total))

    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is not None and not np.all(np.isfinite(p.grad)):
                raise DdnNumericError(f"non-finite gradient for parameter '{name}' at step {self.t + 1}")
        scale = 1.0
        if self.clip_norm is not None:
            norm = self.grad_norm()
            if norm > self.clip_norm:
                scale = self.clip_norm / norm

        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for name, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad * scale if scale != 1.0 else p.grad
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            m_hat = m / correction1
            v_hat = v / correction2
            p.data = (p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype, copy=False)

    def state_arrays(self) -> Dict[str, np.ndarray]:
        """Moment arrays keyed ``adam.m.<param>`` / ``adam.v.<param>`` for checkpoints."""
        arrays: Dict[str, np.ndarray] = {}
        for name in self.params:
            arrays[f"{STATE_PREFIX}.m.{name}"] = self.m[name]
            arrays[f"{STATE_PREFIX}.v.{name}"] = self.v[name]
        return arrays

    def load_state_arrays(self, arrays: Dict[str, np.ndarray], step: int) -> None:
        for name, p in self.params.items():
            for kind, store in (("m", self.m), ("v", self.v)):
                key = f"{STATE_PREFIX}.{kind}.{name}"
                if key not in arrays:
                    raise DdnConfigError(f"optimizer state is missing '{key}'")
                value = np.asarray(arrays[key], dtype=p.dtype)
                if value.shape != p.shape:
                    raise DdnConfigError(f"optimizer state '{key}' has shape {value.shape}, expected {p.shape}")
                store[name] = value.copy()
        self.t = int(step)
