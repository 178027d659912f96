"""Quantitative evaluation: photometric error, self-reenactment protocol,
nearest-neighbor baseline, and report files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .facemodel import FaceBasis, FaceParameters, quat_conjugate, quat_multiply, \
    quat_to_axis_angle
from .render import RasterImage

MAX_PIXEL_ERROR = math.sqrt(3.0) * 255.0


@dataclass
class ErrorReport:
    """Per-frame photometric error maps and their means for one evaluation run."""

    error_maps: list = field(default_factory=list)   # (H, W) arrays
    frame_means: list = field(default_factory=list)
    fingerprint: dict = field(default_factory=dict)  # window size, resolution, ...

    @property
    def sequence_mean(self) -> float:
        if not self.frame_means:
            return 0.0
        return float(np.mean(self.frame_means))


def photometric_error(pred: RasterImage, truth: RasterImage,
                      mask: np.ndarray | None = None):
    """Per-pixel Euclidean RGB distance in [0, 255] units; returns (map, mean).

    With a foreground mask the mean covers only masked pixels; the map is
    always full frame.
    """
    if (pred.width, pred.height) != (truth.width, truth.height):
        raise ValueError("image sizes differ")
    if pred.space != "raw" or truth.space != "raw":
        raise ValueError("photometric error expects raw [0, 255] images")
    diff = pred.data - truth.data
    err = np.sqrt((diff * diff).sum(axis=2))
    if mask is None:
        return err, float(err.mean())
    if mask.shape != err.shape:
        raise ValueError("mask size differs from the images")
    if not mask.any():
        return err, 0.0
    return err, float(err[mask].mean())


def self_reenactment_split(items: list) -> tuple[list, list]:
    """First two thirds (rounded up) for training, the rest for testing."""
    n = len(items)
    if n < 3:
        raise ValueError("need at least 3 frames to split")
    cut = math.ceil(2 * n / 3)
    return list(items[:cut]), list(items[cut:])


def interocular_distance(basis: FaceBasis) -> float:
    return float(np.linalg.norm(basis.eye_left.socket_center
                                - basis.eye_right.socket_center))


def parameter_distance(a: FaceParameters, b: FaceParameters, interocular: float,
                       w_pose: float = 1.0, w_expr: float = 1.0) -> float:
    """Pose-plus-expression distance used by the nearest-neighbor baseline.

    d_pose = geodesic rotation angle + translation distance / inter-ocular
    distance; d_expr = Euclidean distance of the expression coefficients.
    """
    angle = np.linalg.norm(quat_to_axis_angle(
        quat_multiply(quat_conjugate(a.rotation), b.rotation)))
    trans = np.linalg.norm(a.translation - b.translation) / interocular
    expr = np.linalg.norm(a.delta - b.delta)
    return float(w_pose * (angle + trans) + w_expr * expr)


def nearest_neighbor_index(query: FaceParameters, corpus: list[FaceParameters],
                           interocular: float, w_pose: float = 1.0,
                           w_expr: float = 1.0) -> int:
    """Index of the closest corpus entry; ties go to the lowest index."""
    if not corpus:
        raise ValueError("corpus is empty")
    best, best_d = 0, math.inf
    for i, entry in enumerate(corpus):
        d = parameter_distance(query, entry, interocular, w_pose, w_expr)
        if d < best_d:
            best, best_d = i, d
    return best


def nearest_neighbor_baseline(queries: list[FaceParameters],
                              corpus_params: list[FaceParameters],
                              corpus_frames: list[RasterImage],
                              interocular: float, w_pose: float = 1.0,
                              w_expr: float = 1.0) -> list[RasterImage]:
    """For each query, the corpus frame with the closest pose and expression."""
    if len(corpus_params) != len(corpus_frames):
        raise ValueError("corpus parameter and frame counts differ")
    return [corpus_frames[nearest_neighbor_index(q, corpus_params, interocular,
                                                 w_pose, w_expr)]
            for q in queries]


def build_error_report(pred_frames: list[RasterImage],
                       truth_frames: list[RasterImage],
                       fingerprint: dict | None = None) -> ErrorReport:
    if len(pred_frames) != len(truth_frames):
        raise ValueError("frame counts differ")
    report = ErrorReport(fingerprint=dict(fingerprint or {}))
    for pred, truth in zip(pred_frames, truth_frames):
        err, mean = photometric_error(pred, truth)
        report.error_maps.append(err)
        report.frame_means.append(mean)
    return report


# ---------------------------------------------------------------------------
# report files: CSV + summary JSON + PNG error maps + figures
# ---------------------------------------------------------------------------

def error_map_png(err: np.ndarray, path) -> None:
    """Linear grayscale error map, scaled by the maximum possible distance."""
    gray = np.rint(np.clip(err / MAX_PIXEL_ERROR, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(path, format="PNG")


def write_report(report: ErrorReport, directory, name: str = "run") -> Path:
    """Write one run's artifacts under <directory>/<name>/ and return that path."""
    from . import plots

    out = Path(directory) / name
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "frame_errors.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frame", "mean_error"])
        for i, mean in enumerate(report.frame_means):
            writer.writerow([i, f"{mean:.6f}"])
    summary = {
        "sequence_mean": report.sequence_mean,
        "frame_count": len(report.frame_means),
        "fingerprint": report.fingerprint,
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    maps_dir = out / "error_maps"
    maps_dir.mkdir(exist_ok=True)
    for i, err in enumerate(report.error_maps):
        error_map_png(err, maps_dir / f"frame_{i:06d}.png")
    plots.error_curve_figure(report, out / "error_curve.png")
    plots.error_map_grid_figure(report, out / "error_grid.png")
    return out
