"""Adversarial and reconstruction losses with their gradients."""

from __future__ import annotations

import numpy as np

LOG_CLAMP = 1e-12


def _clamped(scores: np.ndarray) -> np.ndarray:
    # clamp in 64-bit: 1 - 1e-12 is not representable in float32, so a
    # same-dtype clip would still let saturated scores reach log(0)
    return np.clip(scores.astype(np.float64), LOG_CLAMP, 1.0 - LOG_CLAMP)


def loss_l1(pred: np.ndarray, truth: np.ndarray):
    """Mean absolute error; gradient is the sign of (pred - truth) / count."""
    if pred.shape != truth.shape:
        raise ValueError("prediction and truth shapes differ")
    diff = pred - truth
    loss = float(np.abs(diff).mean())
    dpred = np.sign(diff) / diff.size
    return loss, dpred


def loss_adversarial(d_real: np.ndarray | None, d_fake: np.ndarray):
    """Non-saturating GAN losses over patch score maps.

    disc_loss = -mean log D(real) - mean log(1 - D(fake))
    gen_loss  = -mean log D(fake)
    Logs are clamped at 1e-12 so saturated scores stay finite.
    """
    fake = _clamped(d_fake)
    gen_loss = float(-np.log(fake).mean())
    if d_real is None:
        return gen_loss, None
    real = _clamped(d_real)
    disc_loss = float(-np.log(real).mean() - np.log(1.0 - fake).mean())
    return gen_loss, disc_loss


def grad_disc_loss(d_real: np.ndarray, d_fake: np.ndarray):
    """Gradients of disc_loss w.r.t. the two score maps."""
    real = _clamped(d_real)
    fake = _clamped(d_fake)
    dd_real = -1.0 / (real * d_real.size)
    dd_fake = 1.0 / ((1.0 - fake) * d_fake.size)
    return dd_real.astype(d_real.dtype), dd_fake.astype(d_fake.dtype)


def grad_gen_adversarial(d_fake: np.ndarray):
    """Gradient of gen_loss w.r.t. the fake score map."""
    fake = _clamped(d_fake)
    return (-1.0 / (fake * d_fake.size)).astype(d_fake.dtype)
