"""File formats: basis binary (DVPB), parameter JSON-lines, landmarks, PNG frames.

All binary formats are little-endian and versioned by a one-byte format
revision after the magic.  PNG is used for every 8-bit image artifact; frame
sequences are numbered PNG directories (frame_000000.png, ...).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .facemodel import EyeAnnotation, FaceBasis, FaceParameters
from .render import RasterImage

BASIS_MAGIC = b"DVPB"
BASIS_VERSION = 1


class FormatError(ValueError):
    """Corrupt or unsupported file content."""


def _write_array(fh, arr: np.ndarray, dtype: str):
    a = np.asarray(arr, dtype=dtype)
    fh.write(struct.pack("<I", a.ndim))
    fh.write(struct.pack(f"<{a.ndim}q", *a.shape))
    fh.write(np.asfortranarray(a).tobytes(order="F"))


def _read_array(fh, dtype: str) -> np.ndarray:
    (ndim,) = struct.unpack("<I", fh.read(4))
    shape = struct.unpack(f"<{ndim}q", fh.read(8 * ndim))
    count = int(np.prod(shape))
    data = np.frombuffer(fh.read(count * np.dtype(dtype).itemsize), dtype=dtype)
    return data.reshape(shape, order="F").copy()


def save_basis(basis: FaceBasis, path) -> None:
    """Write a FaceBasis to the versioned DVPB binary format."""
    n_alpha, n_beta, n_delta = basis.dims
    with open(path, "wb") as fh:
        fh.write(BASIS_MAGIC)
        fh.write(struct.pack("<B", BASIS_VERSION))
        fh.write(struct.pack("<5q", basis.vertex_count, n_alpha, n_beta,
                             n_delta, basis.seed))
        for arr in (basis.average_geometry, basis.average_reflectance,
                    basis.geometry_basis, basis.reflectance_basis,
                    basis.expression_basis, basis.alpha_stddevs,
                    basis.beta_stddevs, basis.delta_stddevs,
                    basis.texture_coordinates):
            _write_array(fh, arr, "<f8")
        _write_array(fh, basis.triangles, "<i8")
        for eye in (basis.eye_left, basis.eye_right):
            _write_array(fh, eye.vertex_indices, "<i8")
            _write_array(fh, eye.socket_center, "<f8")
            fh.write(struct.pack("<d", eye.socket_radius))
        fh.write(struct.pack("<qd", basis.closure_dim, basis.closure_scale))


def load_basis(path) -> FaceBasis:
    with open(path, "rb") as fh:
        if fh.read(4) != BASIS_MAGIC:
            raise FormatError(f"{path}: not a basis file")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != BASIS_VERSION:
            raise FormatError(f"{path}: unsupported basis version {version}")
        vertex_count, n_alpha, n_beta, n_delta, seed = struct.unpack("<5q", fh.read(40))
        arrays = [_read_array(fh, "<f8") for _ in range(9)]
        triangles = _read_array(fh, "<i8")
        eyes = []
        for _ in range(2):
            idx = _read_array(fh, "<i8")
            center = _read_array(fh, "<f8")
            (radius,) = struct.unpack("<d", fh.read(8))
            eyes.append(EyeAnnotation(idx, center, radius))
        closure_dim, closure_scale = struct.unpack("<qd", fh.read(16))
    return FaceBasis(
        vertex_count=int(vertex_count),
        average_geometry=arrays[0],
        average_reflectance=arrays[1],
        geometry_basis=arrays[2],
        reflectance_basis=arrays[3],
        expression_basis=arrays[4],
        alpha_stddevs=arrays[5],
        beta_stddevs=arrays[6],
        delta_stddevs=arrays[7],
        texture_coordinates=arrays[8],
        triangles=triangles,
        eye_left=eyes[0],
        eye_right=eyes[1],
        closure_dim=int(closure_dim),
        closure_scale=float(closure_scale),
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# parameter sequences: JSON-lines, one frame per line, full float precision
# ---------------------------------------------------------------------------

def save_params_jsonl(params: list[FaceParameters], path, metadata: dict | None = None):
    """Write a parameter sequence; an optional metadata header line starts with '#'."""
    with open(path, "w") as fh:
        if metadata:
            fh.write("#" + json.dumps(metadata, sort_keys=True) + "\n")
        for p in params:
            fh.write(json.dumps(p.to_dict()) + "\n")


def load_params_jsonl(path) -> tuple[list[FaceParameters], dict]:
    params, metadata = [], {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                metadata = json.loads(line[1:])
                continue
            params.append(FaceParameters.from_dict(json.loads(line)))
    return params, metadata


# ---------------------------------------------------------------------------
# landmark files: one JSON document per frame
# ---------------------------------------------------------------------------

def save_landmarks(landmarks, path) -> None:
    doc = {
        "landmarks": [
            {"x": float(x), "y": float(y), "vertex": int(v), "confidence": float(c)}
            for (x, y), v, c in zip(landmarks.positions, landmarks.vertex_indices,
                                    landmarks.confidences)
        ],
        "iris_left": [float(v) for v in landmarks.iris_left],
        "iris_right": [float(v) for v in landmarks.iris_right],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_landmarks(path):
    from .fitting import LandmarkSet

    with open(path) as fh:
        doc = json.load(fh)
    entries = doc["landmarks"]
    return LandmarkSet(
        positions=np.array([[e["x"], e["y"]] for e in entries]),
        vertex_indices=np.array([e["vertex"] for e in entries], dtype=np.int64),
        confidences=np.array([e["confidence"] for e in entries]),
        iris_left=np.array(doc["iris_left"]),
        iris_right=np.array(doc["iris_right"]),
    )


# ---------------------------------------------------------------------------
# PNG images and frame directories
# ---------------------------------------------------------------------------

def write_png(img: RasterImage, path) -> None:
    """Quantize a raw [0, 255] image to 8 bit and write it as PNG."""
    if img.space != "raw":
        raise FormatError("only raw [0, 255] images are written to PNG")
    data = np.rint(np.clip(img.data, 0.0, 255.0)).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path, format="PNG")


def read_png(path) -> RasterImage:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    h, w = arr.shape[:2]
    return RasterImage(w, h, arr, "raw")


def frame_path(directory, index: int) -> Path:
    return Path(directory) / f"frame_{index:06d}.png"


def write_frame_sequence(frames: list[RasterImage], directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        write_png(frame, frame_path(directory, i))


def read_frame_sequence(directory) -> list[RasterImage]:
    directory = Path(directory)
    paths = sorted(directory.glob("frame_*.png"))
    if not paths:
        raise FormatError(f"no frames found in {directory}")
    return [read_png(p) for p in paths]
