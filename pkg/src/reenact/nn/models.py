"""Translation network: U-net generator and patch discriminator.

The generator downsamples to a 1x1 bottleneck through stride-2 convolutions
and mirrors back up through transposed convolutions with skip connections;
each upsampling module ends in two 3x3 refinement convolutions.  The
discriminator scores overlapping patches of the conditioning volume
concatenated with a real or generated frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import layers as L

FULL_DOWN_CHANNELS = (64, 128, 256, 512, 512, 512, 512, 512)
FULL_UP_CHANNELS = (512, 512, 512, 512, 256, 128, 64, 3)
FULL_DROPOUT = (0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0)

INIT_STDDEV = 0.2
LEAKY_SLOPE = 0.2


def _depth_for(size: int) -> int:
    depth = int(round(np.log2(size)))
    if size < 8 or 2 ** depth != size:
        raise ValueError(f"input size must be a power of two >= 8, got {size}")
    return depth


@dataclass(frozen=True)
class GeneratorConfig:
    """U-net layout; depth always equals log2(input_size)."""

    input_size: int = 256
    in_channels: int = 99
    down_channels: tuple = FULL_DOWN_CHANNELS
    up_channels: tuple = FULL_UP_CHANNELS
    dropout_probs: tuple = FULL_DROPOUT
    leaky_slope: float = LEAKY_SLOPE

    def __post_init__(self):
        depth = _depth_for(self.input_size)
        for name in ("down_channels", "up_channels", "dropout_probs"):
            if len(getattr(self, name)) != depth:
                raise ValueError(f"{name} must have {depth} entries")
        if self.up_channels[-1] != 3:
            raise ValueError("final upsampling module must output 3 channels")

    @property
    def depth(self) -> int:
        return _depth_for(self.input_size)

    @classmethod
    def for_size(cls, input_size: int, in_channels: int = 99) -> "GeneratorConfig":
        """Scale the full-resolution layout down: the deep (wide) modules at the
        head of the down list and the tail of the up list are kept."""
        depth = _depth_for(input_size)
        if depth > len(FULL_DOWN_CHANNELS):
            raise ValueError("input size exceeds the supported maximum of 256")
        return cls(
            input_size=input_size,
            in_channels=in_channels,
            down_channels=FULL_DOWN_CHANNELS[:depth],
            up_channels=FULL_UP_CHANNELS[-depth:],
            dropout_probs=FULL_DROPOUT[-depth:],
        )


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Patch classifier: stride-2 blocks then a one-channel scoring head."""

    input_size: int = 256
    in_channels: int = 102
    block_channels: tuple = (64, 128, 256, 512)
    leaky_slope: float = LEAKY_SLOPE

    def __post_init__(self):
        _depth_for(self.input_size)
        if self.input_size // (2 ** len(self.block_channels)) < 2:
            raise ValueError("too many discriminator blocks for this input size")

    @classmethod
    def for_size(cls, input_size: int, in_channels: int = 102) -> "DiscriminatorConfig":
        """Drop trailing blocks at small resolutions, keeping the score patch
        at 1/16 of the input so the patch classifier never sees (and cannot
        memorize) whole images."""
        n_blocks = min(4, max(1, _depth_for(input_size) - 3))
        return cls(input_size=input_size, in_channels=in_channels,
                   block_channels=(64, 128, 256, 512)[:n_blocks])


def _up_in_channels(config: GeneratorConfig, k: int) -> int:
    depth = config.depth
    if k == 0:
        return config.down_channels[-1]
    return config.up_channels[k - 1] + config.down_channels[depth - 1 - k]


def init_weights(gen: GeneratorConfig, disc: DiscriminatorConfig, seed: int,
                 dtype=np.float32) -> dict:
    """Seeded parameter dictionary: conv weights N(0, 0.2), biases zero, BN
    scale one / shift zero, running stats at the identity."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}

    def conv(name, c_out, c_in, k):
        params[f"{name}_w"] = rng.normal(0.0, INIT_STDDEV,
                                         (c_out, c_in, k, k)).astype(dtype)
        params[f"{name}_b"] = np.zeros(c_out, dtype=dtype)

    def deconv(name, c_in, c_out, k):
        params[f"{name}_w"] = rng.normal(0.0, INIT_STDDEV,
                                         (c_in, c_out, k, k)).astype(dtype)
        params[f"{name}_b"] = np.zeros(c_out, dtype=dtype)

    def bn(name, c):
        params[f"{name}_gamma"] = np.ones(c, dtype=dtype)
        params[f"{name}_beta"] = np.zeros(c, dtype=dtype)
        params[f"{name}_rmean"] = np.zeros(c, dtype=dtype)
        params[f"{name}_rvar"] = np.ones(c, dtype=dtype)

    depth = gen.depth
    c_prev = gen.in_channels
    for i, c in enumerate(gen.down_channels):
        conv(f"g_down{i}", c, c_prev, 4)
        if i > 0:
            bn(f"g_down{i}_bn", c)
        c_prev = c
    # normalization follows every convolution except the very first encoder
    # conv and the final output conv, which feeds the tanh directly
    for k, c in enumerate(gen.up_channels):
        deconv(f"g_up{k}_deconv", _up_in_channels(gen, k), c, 4)
        bn(f"g_up{k}_bn", c)
        conv(f"g_up{k}_ref1", c, c, 3)
        bn(f"g_up{k}_ref1_bn", c)
        conv(f"g_up{k}_ref2", c, c, 3)
        if k < depth - 1:
            bn(f"g_up{k}_ref2_bn", c)

    c_prev = disc.in_channels
    for i, c in enumerate(disc.block_channels):
        conv(f"d_block{i}", c, c_prev, 4)
        if i > 0:
            bn(f"d_block{i}_bn", c)
        c_prev = c
    conv("d_head", 1, c_prev, 4)
    return params


def parameter_names(params: dict) -> list[str]:
    """Trainable parameters, excluding BN running statistics."""
    return [k for k in params if not (k.endswith("_rmean") or k.endswith("_rvar"))]


# ---------------------------------------------------------------------------
# generator
# ---------------------------------------------------------------------------

def generator_forward(x: np.ndarray, params: dict, config: GeneratorConfig,
                      mode: str = "infer", dropout_rng=None):
    """Run the U-net; returns (output in (-1, 1), cache for backward)."""
    if x.ndim != 4 or x.shape[1] != config.in_channels \
            or x.shape[2] != config.input_size or x.shape[3] != config.input_size:
        raise ValueError(f"generator input shape {x.shape} does not match config")
    depth = config.depth
    caches: dict = {"mode": mode, "down": [], "up": []}

    h = x
    down_outputs = []
    for i in range(depth):
        h, c_conv = L.conv2d_forward(h, params[f"g_down{i}_w"],
                                     params[f"g_down{i}_b"], 2, 1)
        c_bn = None
        if i > 0:
            h, c_bn = L.batchnorm_forward(
                h, params[f"g_down{i}_bn_gamma"], params[f"g_down{i}_bn_beta"],
                params[f"g_down{i}_bn_rmean"], params[f"g_down{i}_bn_rvar"], mode)
        h, c_act = L.leaky_relu_forward(h, config.leaky_slope)
        down_outputs.append(h)
        caches["down"].append((c_conv, c_bn, c_act))

    for k in range(depth):
        if k == 0:
            inp, c_cat = down_outputs[-1], None
        else:
            inp, c_cat = L.concat_forward(h, down_outputs[depth - 1 - k])
        h, c_deconv = L.conv_transpose2d_forward(
            inp, params[f"g_up{k}_deconv_w"], params[f"g_up{k}_deconv_b"], 2, 1)
        h, c_bn = L.batchnorm_forward(
            h, params[f"g_up{k}_bn_gamma"], params[f"g_up{k}_bn_beta"],
            params[f"g_up{k}_bn_rmean"], params[f"g_up{k}_bn_rvar"], mode)
        h, c_drop = L.dropout_forward(h, config.dropout_probs[k], mode, dropout_rng)
        h, c_act = L.relu_forward(h)
        h, c_ref1 = L.conv2d_forward(h, params[f"g_up{k}_ref1_w"],
                                     params[f"g_up{k}_ref1_b"], 1, 1)
        h, c_bn1 = L.batchnorm_forward(
            h, params[f"g_up{k}_ref1_bn_gamma"], params[f"g_up{k}_ref1_bn_beta"],
            params[f"g_up{k}_ref1_bn_rmean"], params[f"g_up{k}_ref1_bn_rvar"], mode)
        h, c_act1 = L.relu_forward(h)
        h, c_ref2 = L.conv2d_forward(h, params[f"g_up{k}_ref2_w"],
                                     params[f"g_up{k}_ref2_b"], 1, 1)
        if k == depth - 1:
            c_bn2 = None
            h, c_act2 = L.tanh_forward(h)
        else:
            h, c_bn2 = L.batchnorm_forward(
                h, params[f"g_up{k}_ref2_bn_gamma"],
                params[f"g_up{k}_ref2_bn_beta"],
                params[f"g_up{k}_ref2_bn_rmean"],
                params[f"g_up{k}_ref2_bn_rvar"], mode)
            h, c_act2 = L.relu_forward(h)
        caches["up"].append((c_cat, c_deconv, c_bn, c_drop, c_act,
                             c_ref1, c_bn1, c_act1, c_ref2, c_bn2, c_act2))
    return h, caches


def generator_backward(dout: np.ndarray, caches: dict, params: dict,
                       config: GeneratorConfig) -> dict:
    """Gradients of a scalar loss w.r.t. every generator parameter."""
    depth = config.depth
    grads: dict[str, np.ndarray] = {}
    ddown = [None] * depth    # gradients flowing into each down output

    h = dout
    for k in reversed(range(depth)):
        c_cat, c_deconv, c_bn, c_drop, c_act, c_ref1, c_bn1, c_act1, \
            c_ref2, c_bn2, c_act2 = caches["up"][k]
        if k == depth - 1:
            h = L.tanh_backward(h, c_act2)
        else:
            h = L.relu_backward(h, c_act2)
            h, grads[f"g_up{k}_ref2_bn_gamma"], grads[f"g_up{k}_ref2_bn_beta"] \
                = L.batchnorm_backward(h, c_bn2)
        h, grads[f"g_up{k}_ref2_w"], grads[f"g_up{k}_ref2_b"] \
            = L.conv2d_backward(h, c_ref2)
        h = L.relu_backward(h, c_act1)
        h, grads[f"g_up{k}_ref1_bn_gamma"], grads[f"g_up{k}_ref1_bn_beta"] \
            = L.batchnorm_backward(h, c_bn1)
        h, grads[f"g_up{k}_ref1_w"], grads[f"g_up{k}_ref1_b"] \
            = L.conv2d_backward(h, c_ref1)
        h = L.relu_backward(h, c_act)
        h = L.dropout_backward(h, c_drop)
        h, grads[f"g_up{k}_bn_gamma"], grads[f"g_up{k}_bn_beta"] \
            = L.batchnorm_backward(h, c_bn)
        h, grads[f"g_up{k}_deconv_w"], grads[f"g_up{k}_deconv_b"] \
            = L.conv_transpose2d_backward(h, c_deconv)
        if k == 0:
            ddown[depth - 1] = _accumulate(ddown[depth - 1], h)
            h = None
        else:
            h, dskip = L.concat_backward(h, c_cat)
            ddown[depth - 1 - k] = _accumulate(ddown[depth - 1 - k], dskip)

    h = None
    for i in reversed(range(depth)):
        c_conv, c_bn, c_act = caches["down"][i]
        h = _accumulate(ddown[i], h)
        h = L.leaky_relu_backward(h, c_act)
        if c_bn is not None:
            h, grads[f"g_down{i}_bn_gamma"], grads[f"g_down{i}_bn_beta"] \
                = L.batchnorm_backward(h, c_bn)
        h, grads[f"g_down{i}_w"], grads[f"g_down{i}_b"] = L.conv2d_backward(h, c_conv)
    return grads


def _accumulate(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return a + b


# ---------------------------------------------------------------------------
# discriminator
# ---------------------------------------------------------------------------

def discriminator_forward(x: np.ndarray, img: np.ndarray, params: dict,
                          config: DiscriminatorConfig, mode: str = "infer"):
    """Patch scores in (0, 1) for a conditioning volume and candidate frame."""
    if x.shape[0] != img.shape[0] or x.shape[2:] != img.shape[2:]:
        raise ValueError("conditioning and image shapes do not match")
    h, c_cat = L.concat_forward(x, img)
    if h.shape[1] != config.in_channels:
        raise ValueError(f"discriminator expects {config.in_channels} channels, "
                         f"got {h.shape[1]}")
    caches: dict = {"mode": mode, "cat": c_cat, "blocks": []}
    for i in range(len(config.block_channels)):
        h, c_conv = L.conv2d_forward(h, params[f"d_block{i}_w"],
                                     params[f"d_block{i}_b"], 2, 1)
        c_bn = None
        if i > 0:
            h, c_bn = L.batchnorm_forward(
                h, params[f"d_block{i}_bn_gamma"], params[f"d_block{i}_bn_beta"],
                params[f"d_block{i}_bn_rmean"], params[f"d_block{i}_bn_rvar"], mode)
        h, c_act = L.leaky_relu_forward(h, config.leaky_slope)
        caches["blocks"].append((c_conv, c_bn, c_act))
    h, c_head = L.conv2d_forward(h, params["d_head_w"], params["d_head_b"], 1, 1)
    h, c_sig = L.sigmoid_forward(h)
    caches["head"], caches["sigmoid"] = c_head, c_sig
    return h, caches


def discriminator_backward(dout: np.ndarray, caches: dict, params: dict,
                           config: DiscriminatorConfig):
    """Returns (grads, d_conditioning, d_image)."""
    grads: dict[str, np.ndarray] = {}
    h = L.sigmoid_backward(dout, caches["sigmoid"])
    h, grads["d_head_w"], grads["d_head_b"] = L.conv2d_backward(h, caches["head"])
    for i in reversed(range(len(config.block_channels))):
        c_conv, c_bn, c_act = caches["blocks"][i]
        h = L.leaky_relu_backward(h, c_act)
        if c_bn is not None:
            h, grads[f"d_block{i}_bn_gamma"], grads[f"d_block{i}_bn_beta"] \
                = L.batchnorm_backward(h, c_bn)
        h, grads[f"d_block{i}_w"], grads[f"d_block{i}_b"] = L.conv2d_backward(h, c_conv)
    d_cond, d_img = L.concat_backward(h, caches["cat"])
    return grads, d_cond, d_img
