from typing import Union

import numpy as np
from scipy.stats import norm

from ddn.data.toy import (
    HALF_GAUSSIAN_SCALE,
    LINEAR_GAUSSIAN_SCALE,
    LINEAR_GAUSSIAN_SLOPE,
    STICK_HALF_LENGTH,
    ToyTaskName,
    rotate,
    stick_angle,
)
from ddn.exceptions import DdnDimensionError, DdnInternalError

BISECTION_STEPS = 80


def _squares(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # the two squares are disjoint for every x in (-1, 1)
    if not np.all(-1.0 + x < 1.0 - x):
        raise DdnInternalError(f"squares overlap at x={float(np.max(x))}")
    x = x[..., None]
    low = np.all((y >= -5.0 + x) & (y <= -1.0 + x), axis=-1)
    high = np.all((y >= 1.0 - x) & (y <= 5.0 - x), axis=-1)
    return np.where(low | high, 0.5 / 16.0, 0.0)


def _half_gaussian(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    u, v = rotate(y[..., 0], y[..., 1], -x * np.pi)
    p = 2.0 * norm.pdf(u, scale=HALF_GAUSSIAN_SCALE) * norm.pdf(v, scale=HALF_GAUSSIAN_SCALE)
    return np.where(u >= 0.0, p, 0.0)


def _gaussian_stick(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    u, v = rotate(y[..., 0], y[..., 1], -stick_angle(x))
    inside = np.abs(v) <= STICK_HALF_LENGTH
    return np.where(inside, norm.pdf(u) / (2.0 * STICK_HALF_LENGTH), 0.0)


def ring_excess(x: np.ndarray, y: np.ndarray, d: np.ndarray) -> np.ndarray:
    """(y1 / (4 + 2x + d))^2 + (y2 / (4 - 2x + d))^2 - 1; strictly decreasing in d >= 0 unless y = 0."""
    return (y[..., 0] / (4.0 + 2.0 * x + d)) ** 2 + (y[..., 1] / (4.0 - 2.0 * x + d)) ** 2 - 1.0


def ring_offset(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    The d in (0, 2) with ``ring_excess(x, y, d) == 0``, by bisection; NaN where
    no such d exists. Monotonicity makes the root unique when it exists.
    """
    lo = np.zeros_like(y[..., 0])
    hi = np.full_like(lo, 2.0)
    bracketed = (ring_excess(x, y, lo) > 0.0) & (ring_excess(x, y, hi) < 0.0)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        above = ring_excess(x, y, mid) > 0.0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return np.where(bracketed, 0.5 * (lo + hi), np.nan)


def _elastic_ring(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = ring_offset(x, y)
    inside = np.isfinite(d)
    d = np.where(inside, d, 1.0)
    r1 = 4.0 + 2.0 * x + d
    r2 = 4.0 - 2.0 * x + d
    theta = np.arctan2(y[..., 1] / r2, y[..., 0] / r1)
    # (d, theta) is uniform on (0, 2) x (0, 2 pi); divide by the map's Jacobian
    jacobian = r2 * np.cos(theta) ** 2 + r1 * np.sin(theta) ** 2
    return np.where(inside, 1.0 / (4.0 * np.pi) / jacobian, 0.0)


def _linear_gaussian(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return norm.pdf(y[..., 0], loc=LINEAR_GAUSSIAN_SLOPE * x, scale=LINEAR_GAUSSIAN_SCALE)


ORACLES = {
    ToyTaskName.squares: _squares,
    ToyTaskName.half_gaussian: _half_gaussian,
    ToyTaskName.gaussian_stick: _gaussian_stick,
    ToyTaskName.elastic_ring: _elastic_ring,
    ToyTaskName.linear_gaussian: _linear_gaussian,
}


def oracle_density(task: Union[str, ToyTaskName], x: Union[float, np.ndarray], y: np.ndarray) -> np.ndarray:
    """
    Ground-truth p(y | x) at targets y [... x J]. x is one condition or an array
    broadcasting against y's leading axes (one condition per target row).
    """
    task = ToyTaskName.parse(task)
    y = np.asarray(y, dtype=np.float64)
    if y.shape[-1] != task.target_dim:
        raise DdnDimensionError(f"{task.value} has {task.target_dim} targets, got y of shape {y.shape}")
    x = np.broadcast_to(np.asarray(x, dtype=np.float64), y.shape[:-1])
    return ORACLES[task](x, y)
