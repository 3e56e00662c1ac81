from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from ddn.autodiff import functional as F
from ddn.autodiff.tensor import Tensor
from ddn.exceptions import DdnDimensionError
from ddn.model.config import Variant
from ddn.objective.partition import BinPartition

if TYPE_CHECKING:
    from ddn.model.network import HeadOutputs, LatentGaussian

PROBABILITY_FLOOR = 1e-12


@dataclass
class LossBreakdown:
    nll: Tensor
    kl: Optional[Tensor]
    total: Tensor
    beta: float

    @property
    def values(self) -> dict:
        return {
            "nll": self.nll.item(),
            "kl": self.kl.item() if self.kl is not None else 0.0,
            "total": self.total.item(),
        }


def target_bins(y: np.ndarray, partitions: Sequence[BinPartition]) -> np.ndarray:
    """Bin index of every target component, [M x J]; out-of-range targets raise."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    if y.shape[1] != len(partitions):
        raise DdnDimensionError(f"targets have {y.shape[1]} columns for {len(partitions)} partitions")
    return np.stack([p.bin_indices(y[:, j]) for j, p in enumerate(partitions)], axis=1)


def nll_loss(heads: "HeadOutputs", y: np.ndarray, partitions: Sequence[BinPartition]) -> Tensor:
    """
    Discretized negative log-likelihood averaged over the batch and the J heads:
    -(1 / MJ) sum_m sum_j log f_j(bin(y_mj)).
    """
    bins = target_bins(y, partitions)
    if len(heads) != bins.shape[1]:
        raise DdnDimensionError(f"{len(heads)} heads for {bins.shape[1]} target columns")
    terms = [
        F.sum(F.log(F.clamp_min(F.gather_rows(head, bins[:, j]), PROBABILITY_FLOOR)))
        for j, head in enumerate(heads.heads)
    ]
    total = terms[0]
    for term in terms[1:]:
        total = F.add(total, term)
    return F.mul(total, -1.0 / (bins.shape[0] * bins.shape[1]))


def kl_divergence(latent: "LatentGaussian") -> Tensor:
    """
    KL(N(mu, sigma^2) || N(0, I)) = 0.5 * sum_d (mu^2 + sigma^2 - 1 - 2 log sigma),
    averaged over the batch.
    """
    per_dim = F.sub(
        F.add(F.square(latent.mu), F.square(latent.sigma)),
        F.add(F.mul(F.log(latent.sigma), 2.0), 1.0),
    )
    return F.mul(F.sum(per_dim), 0.5 / latent.mu.shape[0])


def total_loss(
    heads: "HeadOutputs",
    latent: Optional["LatentGaussian"],
    y: np.ndarray,
    partitions: Sequence[BinPartition],
    beta: float,
    variant: Variant,
) -> LossBreakdown:
    """nll + beta * kl; the KL term is absent for variants without a variational layer."""
    nll = nll_loss(heads, y, partitions)
    if not variant.has_variational_layer or latent is None:
        return LossBreakdown(nll=nll, kl=None, total=nll, beta=beta)
    kl = kl_divergence(latent)
    total = F.add(nll, F.mul(kl, beta)) if beta != 0 else nll
    return LossBreakdown(nll=nll, kl=kl, total=total, beta=beta)
