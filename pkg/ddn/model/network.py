from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from dbt.events import AdapterLogger

from ddn.autodiff import functional as F
from ddn.autodiff.layers import (
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
from ddn.autodiff.tensor import Tensor, no_grad
from ddn.chain.paths import MaskSet, PermutationPaths, build_mask_set, build_paths
from ddn.exceptions import DdnDimensionError, DdnUsageError
from ddn.model.config import Mode, ModelConfig, Variant

logger = AdapterLogger("DDN")

SIGMA_FLOOR = 1e-6


@dataclass
class LatentGaussian:
    mu: Tensor
    sigma: Tensor

    @property
    def latent_dim(self) -> int:
        return self.mu.shape[-1]


@dataclass
class HeadOutputs:
    """J probability tensors of shape [B x N], one per target dimension."""

    heads: List[Tensor]

    def __len__(self) -> int:
        return len(self.heads)

    def __getitem__(self, index: int) -> Tensor:
        return self.heads[index]

    def probabilities(self) -> np.ndarray:
        """Array of shape [B x J x N]."""
        return np.stack([head.data for head in self.heads], axis=1)


@dataclass
class NetworkInput:
    condition: Tensor
    masked_targets: Optional[Tensor] = None


class Encoder(Module):
    """
    The shared body: hidden layers of ``hidden_width`` tanh units with batch norm.

    With J >= 2 the first layer is two parallel tanh branches, one for x and
    one for [y * mask, mask], concatenated back to ``hidden_width`` units.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        self.multivariate = config.target_dim > 1
        if self.multivariate:
            self.condition_branch = self.add_module(
                "condition_branch", dense_block(config.input_dim, config.branch_width, rng)
            )
            self.mask_branch = self.add_module(
                "mask_branch", dense_block(2 * config.target_dim, config.branch_width, rng)
            )
            first_width = 2 * config.branch_width
        else:
            self.first = self.add_module("first", dense_block(config.input_dim, config.hidden_width, rng))
            first_width = config.hidden_width
        self.hidden = self.add_module("hidden", dense_block(first_width, config.hidden_width, rng))

    def forward(self, inputs: NetworkInput) -> Tensor:
        if self.multivariate:
            h = F.concat(
                [self.condition_branch(inputs.condition), self.mask_branch(inputs.masked_targets)],
                axis=1,
            )
        else:
            h = self.first(inputs.condition)
        return self.hidden(h)


class DeconvolutionalPathway(Module):
    """Upsample-Conv-BatchNorm-LeakyReLU blocks ending in one Upsample-Conv block."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        super().__init__()
        blocks: List[Module] = []
        stages = list(zip(config.channels[:-1], config.channels[1:]))
        for index, (c_in, c_out) in enumerate(stages):
            blocks.append(Upsample(config.upsample_factor))
            blocks.append(Conv1d(c_in, c_out, config.kernel_size, rng))
            if index < len(stages) - 1:
                blocks.append(BatchNorm1d(c_out))
                blocks.append(LeakyReLU())
        self.blocks = self.add_module("blocks", Sequential(*blocks))

    def forward(self, feature_map: Tensor) -> Tensor:
        logits = self.blocks(feature_map)
        return F.reshape(logits, (logits.shape[0], logits.shape[-1]))


class DdnModel(Module):
    """
    Encoder, bottleneck and J per-target estimators.

    ``variant`` selects the ablations: ``ddn`` (variational layer +
    deconvolution), ``ddn_no_vl`` (a tanh dense layer instead of the variational
    layer), ``mlp`` (dense softmax heads straight off the encoder) and
    ``mlp_vl`` (variational layer + dense softmax heads).
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__()
        self.config = config
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.paths: PermutationPaths = build_paths(
            config.target_dim, k_cap=config.paths_k, seed=config.paths_seed
        )
        self.mask_set: MaskSet = build_mask_set(self.paths)

        self.encoder = self.add_module("encoder", Encoder(config, rng))
        variant = config.variant
        if variant.has_variational_layer:
            self.mu_layer = self.add_module("mu", Linear(config.hidden_width, config.latent_dim, rng))
            self.sigma_layer = self.add_module(
                "sigma", Linear(config.hidden_width, config.latent_dim, rng)
            )
        elif variant is Variant.ddn_no_vl:
            self.bottleneck = self.add_module(
                "bottleneck", Sequential(Linear(config.hidden_width, config.latent_dim, rng), Tanh())
            )

        if variant.uses_deconvolution:
            self.expand = self.add_module("expand", Linear(config.latent_dim, config.deconv_input_size, rng))
            self.pathways = [
                self.add_module(f"head{j}", DeconvolutionalPathway(config, rng))
                for j in range(config.target_dim)
            ]
        else:
            head_input = config.latent_dim if variant.has_variational_layer else config.hidden_width
            self.dense_heads = self.add_module(
                "dense_heads", Linear(head_input, config.target_dim * config.bins_per_dim, rng)
            )
        logger.debug(
            f"Built {variant.value} model with {len(self.parameters())} parameter arrays, "
            f"{self.paths.k} paths, {len(self.mask_set)} masks"
        )

    @property
    def mode(self) -> Mode:
        return Mode.train if self.training else Mode.eval

    def assemble_input(
        self, x: np.ndarray, y: Optional[np.ndarray] = None, mask: Optional[np.ndarray] = None
    ) -> NetworkInput:
        """
        Batch arrays x [B x D], y [B x J], mask [B x J] into network inputs.

        For J = 1 the mask pathway is disabled and the input is x alone. For
        J >= 2 masked-out targets are zeroed before they reach the network, so
        their values cannot influence the output.
        """
        cfg = self.config
        dtype = self.encoder.hidden.parameters()[0].dtype
        x = np.atleast_2d(np.asarray(x, dtype=dtype))
        if x.shape[1] != cfg.input_dim:
            raise DdnDimensionError(f"x has {x.shape[1]} features, model expects {cfg.input_dim}")
        if cfg.target_dim == 1:
            return NetworkInput(condition=Tensor(x, dtype=dtype))

        batch = x.shape[0]
        y = np.zeros((batch, cfg.target_dim)) if y is None else np.atleast_2d(np.asarray(y, dtype=dtype))
        mask = np.zeros((batch, cfg.target_dim)) if mask is None else np.atleast_2d(np.asarray(mask))
        if mask.shape[0] == 1 and batch > 1:
            mask = np.repeat(mask, batch, axis=0)
        if y.shape != (batch, cfg.target_dim) or mask.shape != (batch, cfg.target_dim):
            raise DdnDimensionError(
                f"y {y.shape} and mask {mask.shape} must both be [{batch} x {cfg.target_dim}]"
            )
        if not np.all((mask == 0) | (mask == 1)):
            raise DdnUsageError("mask bits must be 0 or 1")
        gated = np.where(mask > 0, y, 0.0)
        masked_targets = np.concatenate([gated, mask], axis=1).astype(dtype)
        return NetworkInput(condition=Tensor(x, dtype=dtype), masked_targets=Tensor(masked_targets, dtype=dtype))

    def encode(self, inputs: NetworkInput) -> Tuple[Tensor, Optional[LatentGaussian]]:
        """Encoder features and, for variants with a variational layer, q(z | input)."""
        features = self.encoder(inputs)
        if not self.config.variant.has_variational_layer:
            return features, None
        mu = self.mu_layer(features)
        sigma = F.add(F.softplus(self.sigma_layer(features)), SIGMA_FLOOR)
        return features, LatentGaussian(mu=mu, sigma=sigma)

    def sample_latent(self, latent: LatentGaussian, rng: Optional[np.random.Generator] = None) -> Tensor:
        """z = mu + sigma * eps while training; z = mu exactly in eval mode."""
        if not self.training:
            return latent.mu
        rng = rng if rng is not None else np.random.default_rng()
        eps = rng.standard_normal(latent.mu.shape).astype(latent.mu.dtype)
        return F.add(latent.mu, F.mul_constant(latent.sigma, eps))

    def estimate_heads(self, z: Tensor) -> HeadOutputs:
        cfg = self.config
        batch = z.shape[0]
        if cfg.variant.uses_deconvolution:
            maps = F.reshape(
                self.expand(z), (batch, cfg.target_dim * cfg.channels[0], cfg.initial_length)
            )
            heads = []
            for j, pathway in enumerate(self.pathways):
                group = F.narrow(maps, 1, j * cfg.channels[0], (j + 1) * cfg.channels[0])
                heads.append(F.softmax(pathway(group), axis=-1))
            return HeadOutputs(heads=heads)

        logits = self.dense_heads(z)
        n = cfg.bins_per_dim
        return HeadOutputs(
            heads=[
                F.softmax(F.narrow(logits, 1, j * n, (j + 1) * n), axis=-1)
                for j in range(cfg.target_dim)
            ]
        )

    def forward(
        self,
        x: np.ndarray,
        y: Optional[np.ndarray] = None,
        mask: Optional[np.ndarray] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Tuple[HeadOutputs, Optional[LatentGaussian]]:
        inputs = self.assemble_input(x, y, mask)
        features, latent = self.encode(inputs)
        if latent is not None:
            z = self.sample_latent(latent, rng)
        elif self.config.variant is Variant.ddn_no_vl:
            z = self.bottleneck(features)
        else:
            z = features
        return self.estimate_heads(z), latent

    def predict(
        self, x: np.ndarray, y: Optional[np.ndarray] = None, mask: Optional[np.ndarray] = None
    ) -> np.ndarray:
        """Eval-mode head probabilities [B x J x N] without touching the current mode."""
        previous = self.training
        self.eval()
        try:
            with no_grad():
                heads, _ = self.forward(x, y, mask)
        finally:
            self.train(previous)
        return heads.probabilities()
