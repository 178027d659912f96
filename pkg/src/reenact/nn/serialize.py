"""Network weights file format (DVPW): JSON header plus raw little-endian arrays."""

from __future__ import annotations

import json
import struct

import numpy as np

from ..formats import FormatError
from .models import DiscriminatorConfig, GeneratorConfig
from .train import NetworkWeights

WEIGHTS_MAGIC = b"DVPW"
WEIGHTS_VERSION = 1


def save_weights(weights: NetworkWeights, path) -> None:
    names = sorted(weights.params)
    header = {
        "seed": weights.seed,
        "gen_config": {
            "input_size": weights.gen_config.input_size,
            "in_channels": weights.gen_config.in_channels,
            "down_channels": list(weights.gen_config.down_channels),
            "up_channels": list(weights.gen_config.up_channels),
            "dropout_probs": list(weights.gen_config.dropout_probs),
            "leaky_slope": weights.gen_config.leaky_slope,
        },
        "disc_config": {
            "input_size": weights.disc_config.input_size,
            "in_channels": weights.disc_config.in_channels,
            "block_channels": list(weights.disc_config.block_channels),
            "leaky_slope": weights.disc_config.leaky_slope,
        },
        "arrays": [{"name": n, "shape": list(weights.params[n].shape),
                    "dtype": weights.params[n].dtype.name} for n in names],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<B", WEIGHTS_VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for n in names:
            arr = weights.params[n]
            fh.write(np.ascontiguousarray(arr).astype(
                arr.dtype.newbyteorder("<")).tobytes())


def load_weights(path) -> NetworkWeights:
    with open(path, "rb") as fh:
        if fh.read(4) != WEIGHTS_MAGIC:
            raise FormatError(f"{path}: not a weights file")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != WEIGHTS_VERSION:
            raise FormatError(f"{path}: unsupported weights version {version}")
        (blob_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(blob_len).decode("utf-8"))
        params = {}
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"]).newbyteorder("<")
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            raw = fh.read(count * dtype.itemsize)
            params[entry["name"]] = np.frombuffer(raw, dtype=dtype) \
                .reshape(entry["shape"]).astype(entry["dtype"])
    gc, dc = header["gen_config"], header["disc_config"]
    return NetworkWeights(
        params=params,
        gen_config=GeneratorConfig(
            input_size=gc["input_size"], in_channels=gc["in_channels"],
            down_channels=tuple(gc["down_channels"]),
            up_channels=tuple(gc["up_channels"]),
            dropout_probs=tuple(gc["dropout_probs"]),
            leaky_slope=gc["leaky_slope"]),
        disc_config=DiscriminatorConfig(
            input_size=dc["input_size"], in_channels=dc["in_channels"],
            block_channels=tuple(dc["block_channels"]),
            leaky_slope=dc["leaky_slope"]),
        seed=header["seed"])
