"""Space-time conditioning volumes and the training corpus built from them.

Each frame contributes a 9-channel stack (color, correspondence, gaze); a
temporal window of the last N_w frames is concatenated oldest to newest into a
9*N_w channel input volume.  Values are normalized from [0, 255] to [-1, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .facemodel import FaceBasis, FaceParameters
from .formats import FormatError
from .render import CameraIntrinsics, ConditioningFrame, RasterImage, render_conditioning

WINDOW_SIZE = 11
CHANNELS_PER_FRAME = 9

CORPUS_MAGIC = b"DVPC"
CORPUS_VERSION = 1


def normalize(data: np.ndarray) -> np.ndarray:
    """Map raw [0, 255] pixel values to [-1, 1]."""
    return np.asarray(data, dtype=np.float64) / 127.5 - 1.0


def denormalize(data: np.ndarray) -> np.ndarray:
    """Map [-1, 1] back to raw [0, 255], clipped."""
    return np.clip((np.asarray(data, dtype=np.float64) + 1.0) * 127.5, 0.0, 255.0)


def frame_channels(frame: ConditioningFrame) -> np.ndarray:
    """One frame's 9-channel stack, (9, H, W), normalized to [-1, 1]."""
    planes = []
    for img in (frame.color, frame.correspondence, frame.gaze):
        data = normalize(img.data) if img.space == "raw" else img.data
        planes.append(np.transpose(data, (2, 0, 1)))
    return np.concatenate(planes, axis=0)


def assemble_window(frames: list[ConditioningFrame]) -> np.ndarray:
    """Stack a temporal window into a (9 * N_w, H, W) volume, oldest first."""
    if not frames:
        raise ValueError("window must contain at least one frame")
    return np.concatenate([frame_channels(f) for f in frames], axis=0)


def sliding_windows(items: list, window: int = WINDOW_SIZE,
                    padding: str = "none") -> list[list]:
    """Length-``window`` slices ending at each position.

    With ``padding="none"`` the first window ends at index window-1, yielding
    len(items) - (window - 1) windows.  With ``padding="replicate"`` the first
    item is repeated before the sequence so every position gets a window.
    """
    if window < 1:
        raise ValueError("window must be positive")
    if padding == "replicate":
        items = [items[0]] * (window - 1) + list(items)
    elif padding != "none":
        raise ValueError(f"unknown padding mode {padding!r}")
    if len(items) < window:
        raise ValueError("sequence shorter than the window")
    return [items[i:i + window] for i in range(len(items) - window + 1)]


@dataclass
class CorpusPair:
    """One training example: conditioning volume and its normalized target frame."""

    conditioning: np.ndarray   # (9 * N_w, H, W) in [-1, 1]
    target: np.ndarray         # (3, H, W) in [-1, 1]

    def __post_init__(self):
        if self.conditioning.shape[1:] != self.target.shape[1:]:
            raise ValueError("conditioning and target sizes differ")


def target_channels(frame: RasterImage) -> np.ndarray:
    return np.transpose(normalize(frame.data), (2, 0, 1))


def build_corpus(basis: FaceBasis, params: list[FaceParameters],
                 frames: list[RasterImage], cam: CameraIntrinsics,
                 window: int = WINDOW_SIZE) -> list[CorpusPair]:
    """Corpus of (window, target) pairs; yields len(params) - (window - 1) pairs.

    The conditioning for position f covers frames f-window+1 .. f and pairs
    with the recorded frame at f, so only positions with full history count.
    """
    if len(params) != len(frames):
        raise ValueError("parameter and frame counts differ")
    cond = [render_conditioning(basis, p, cam) for p in params]
    pairs = []
    for i, win in enumerate(sliding_windows(cond, window, padding="none")):
        f = i + window - 1
        pairs.append(CorpusPair(conditioning=assemble_window(win),
                                target=target_channels(frames[f])))
    return pairs


def inference_windows(basis: FaceBasis, params: list[FaceParameters],
                      cam: CameraIntrinsics,
                      window: int = WINDOW_SIZE) -> list[np.ndarray]:
    """One conditioning volume per frame, replicating the first frame's history."""
    cond = [render_conditioning(basis, p, cam) for p in params]
    return [assemble_window(w) for w in sliding_windows(cond, window, "replicate")]


# ---------------------------------------------------------------------------
# corpus cache: one DVPC file per pair, float32 little-endian
# ---------------------------------------------------------------------------

def pair_path(directory, index: int) -> Path:
    return Path(directory) / f"pair_{index:06d}.dvpc"


def save_pair(pair: CorpusPair, path) -> None:
    c, t = pair.conditioning, pair.target
    h, w = c.shape[1:]
    with open(path, "wb") as fh:
        fh.write(CORPUS_MAGIC)
        fh.write(struct.pack("<B", CORPUS_VERSION))
        fh.write(struct.pack("<4q", w, h, c.shape[0], t.shape[0]))
        fh.write(np.ascontiguousarray(c, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_pair(path) -> CorpusPair:
    with open(path, "rb") as fh:
        if fh.read(4) != CORPUS_MAGIC:
            raise FormatError(f"{path}: not a corpus pair file")
        (version,) = struct.unpack("<B", fh.read(1))
        if version != CORPUS_VERSION:
            raise FormatError(f"{path}: unsupported corpus version {version}")
        w, h, n_cond, n_tgt = struct.unpack("<4q", fh.read(32))
        cond = np.frombuffer(fh.read(n_cond * h * w * 4), dtype="<f4")
        tgt = np.frombuffer(fh.read(n_tgt * h * w * 4), dtype="<f4")
    return CorpusPair(
        conditioning=cond.reshape(n_cond, h, w).astype(np.float64),
        target=tgt.reshape(n_tgt, h, w).astype(np.float64))


def save_corpus(pairs: list[CorpusPair], directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, pair in enumerate(pairs):
        save_pair(pair, pair_path(directory, i))


def load_corpus(directory) -> list[CorpusPair]:
    paths = sorted(Path(directory).glob("pair_*.dvpc"))
    if not paths:
        raise FormatError(f"no corpus pairs found in {directory}")
    return [load_pair(p) for p in paths]
