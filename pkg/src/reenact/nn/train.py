"""Adversarial training loop and deterministic inference."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ..conditioning import CorpusPair, denormalize
from ..render import RasterImage
from .losses import grad_disc_loss, grad_gen_adversarial, loss_adversarial, loss_l1
from .models import (
    DiscriminatorConfig,
    GeneratorConfig,
    discriminator_backward,
    discriminator_forward,
    generator_backward,
    generator_forward,
    init_weights,
)
from .optim import Adam


@dataclass
class TrainConfig:
    lambda_l1: float = 100.0
    batch_size: int = 4
    iterations: int = 1000
    learning_rate: float = 0.0002
    first_momentum: float = 0.5
    shuffle_seed: int = 0
    dtype: type = np.float32

    def __post_init__(self):
        for name in ("lambda_l1", "batch_size", "iterations", "learning_rate"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class NetworkWeights:
    """All trainable parameters and BN running statistics, with their configs."""

    params: dict
    gen_config: GeneratorConfig
    disc_config: DiscriminatorConfig
    seed: int

    def copy(self) -> "NetworkWeights":
        return NetworkWeights(params={k: v.copy() for k, v in self.params.items()},
                              gen_config=self.gen_config,
                              disc_config=self.disc_config, seed=self.seed)


def initialize(gen_config: GeneratorConfig, disc_config: DiscriminatorConfig,
               seed: int, dtype=np.float32) -> NetworkWeights:
    return NetworkWeights(params=init_weights(gen_config, disc_config, seed, dtype),
                          gen_config=gen_config, disc_config=disc_config, seed=seed)


@dataclass
class TrainHistory:
    iterations: list = field(default_factory=list)
    disc_loss: list = field(default_factory=list)
    gen_adversarial: list = field(default_factory=list)
    gen_l1: list = field(default_factory=list)
    aborted: bool = False

    def rows(self):
        return zip(self.iterations, self.disc_loss, self.gen_adversarial, self.gen_l1)


def _batches(n_pairs: int, batch_size: int, iterations: int, rng):
    """Deterministic epoch-shuffled batch index stream."""
    order = []
    while len(order) < iterations * batch_size:
        order.extend(rng.permutation(n_pairs))
    for i in range(iterations):
        yield order[i * batch_size:(i + 1) * batch_size]


def train(corpus: list[CorpusPair], weights: NetworkWeights,
          config: TrainConfig) -> TrainHistory:
    """Alternate one discriminator and one generator step per batch.

    Updates ``weights`` in place.  If any loss turns non-finite the loop aborts
    before applying the offending update, leaving the last good parameters.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    dt = config.dtype
    cond_all = np.stack([p.conditioning for p in corpus]).astype(dt)
    target_all = np.stack([p.target for p in corpus]).astype(dt)

    gen_cfg, disc_cfg = weights.gen_config, weights.disc_config
    params = weights.params
    opt_gen = Adam(config.learning_rate, config.first_momentum)
    opt_disc = Adam(config.learning_rate, config.first_momentum)
    rng = np.random.default_rng(config.shuffle_seed)
    drop_rng = np.random.default_rng(config.shuffle_seed + 1)
    history = TrainHistory()

    gen_names = [n for n in params if n.startswith("g_")]
    disc_names = [n for n in params if n.startswith("d_")]

    for it, idx in enumerate(_batches(len(corpus), config.batch_size,
                                      config.iterations, rng)):
        x, y = cond_all[idx], target_all[idx]

        # discriminator step (generator output detached)
        fake, _ = generator_forward(x, params, gen_cfg, "train", drop_rng)
        d_real, c_real = discriminator_forward(x, y, params, disc_cfg, "train")
        d_fake, c_fake = discriminator_forward(x, fake, params, disc_cfg, "train")
        _, disc_loss = loss_adversarial(d_real, d_fake)
        if not np.isfinite(disc_loss):
            history.aborted = True
            break
        dd_real, dd_fake = grad_disc_loss(d_real, d_fake)
        g_real, _, _ = discriminator_backward(dd_real.astype(dt), c_real,
                                              params, disc_cfg)
        g_fake, _, _ = discriminator_backward(dd_fake.astype(dt), c_fake,
                                              params, disc_cfg)
        disc_grads = {n: g_real[n] + g_fake[n] for n in g_real}
        opt_disc.step(params, {n: disc_grads[n] for n in disc_names
                               if n in disc_grads})

        # generator step
        fake, c_gen = generator_forward(x, params, gen_cfg, "train", drop_rng)
        d_fake, c_fake = discriminator_forward(x, fake, params, disc_cfg, "train")
        gen_adv, _ = loss_adversarial(None, d_fake)
        l1, dl1 = loss_l1(fake, y)
        if not (np.isfinite(gen_adv) and np.isfinite(l1)):
            history.aborted = True
            break
        dd_fake = grad_gen_adversarial(d_fake)
        _, _, d_img = discriminator_backward(dd_fake.astype(dt), c_fake,
                                             params, disc_cfg)
        d_fake_total = (d_img + config.lambda_l1 * dl1).astype(dt)
        gen_grads = generator_backward(d_fake_total, c_gen, params, gen_cfg)
        opt_gen.step(params, {n: gen_grads[n] for n in gen_names if n in gen_grads})

        history.iterations.append(it)
        history.disc_loss.append(disc_loss)
        history.gen_adversarial.append(gen_adv)
        history.gen_l1.append(l1)
    return history


def infer_frame(conditioning: np.ndarray, weights: NetworkWeights) -> RasterImage:
    """One window through the generator in infer mode, denormalized to 8 bit."""
    dtype = next(iter(weights.params.values())).dtype
    x = conditioning[None].astype(dtype)
    out, _ = generator_forward(x, weights.params, weights.gen_config, "infer")
    data = denormalize(np.transpose(out[0], (1, 2, 0)))
    h, w = data.shape[:2]
    return RasterImage(w, h, np.rint(data), "raw")


def infer_sequence(windows: list[np.ndarray],
                   weights: NetworkWeights) -> list[RasterImage]:
    """Deterministic per-window inference; one output frame per window."""
    return [infer_frame(w, weights) for w in windows]
