"""From-scratch rendering-to-video translation network (numpy only)."""

from .losses import loss_adversarial, loss_l1
from .models import (
    DiscriminatorConfig,
    GeneratorConfig,
    discriminator_forward,
    generator_forward,
    init_weights,
)
from .optim import Adam
from .serialize import load_weights, save_weights
from .train import (
    NetworkWeights,
    TrainConfig,
    TrainHistory,
    infer_sequence,
    initialize,
    train,
)

__all__ = [
    "Adam", "DiscriminatorConfig", "GeneratorConfig", "NetworkWeights",
    "TrainConfig", "TrainHistory", "discriminator_forward", "generator_forward",
    "infer_sequence", "init_weights", "initialize", "load_weights",
    "loss_adversarial", "loss_l1", "save_weights", "train",
]
