"""Synthetic scene generation: scripted parameter trajectories with ground truth.

Stands in for real footage so round-trip tests have exact ground-truth
parameters and landmarks.  Everything is seeded and deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .facemodel import (
    GAZE_BOUND,
    FaceBasis,
    FaceParameters,
    quat_from_axis_angle,
)
from .fitting import N_LANDMARKS, LandmarkSet
from .render import (
    CameraIntrinsics,
    RasterImage,
    project,
    projected_eye,
    pupil_center_px,
    rasterize_color,
)


@dataclass
class SyntheticScene:
    seed: int = 0
    n_frames: int = 60
    rotation_amplitude_deg: float = 12.0
    translation_amplitude: float = 0.08   # fraction of head scale
    expression_amplitude: float = 0.8     # in units of coefficient stddevs
    gaze_amplitude: float = 0.5           # fraction of the gaze bound
    noise_level: float = 0.0              # additive pixel noise stddev, 8-bit units
    distance_factor: float = 3.5          # camera distance in head scales
    frequency_scale: float = 1.0          # motion cycles over the sequence
    translation_drift: tuple[float, float, float] = (0.0, 0.0, 0.0)
    illumination_drift: float = 0.0       # fractional light sweep, centered
    illumination_amplitude: float = 0.0   # fractional light oscillation
    # linear, centered sweeps over the sequence (head-scale / intensity
    # units); drift makes late frames visit states early frames never reach.
    # the light oscillation runs at a frequency incommensurate with the pose
    # curves, so frames close in pose can differ freely in brightness


def light_factor(scene: SyntheticScene, frame: int) -> float:
    """Scene light intensity scale for a frame (shared by head and background)."""
    t = frame / max(scene.n_frames - 1, 1) - 0.5
    s = 2 * math.pi * frame / max(scene.n_frames, 1)
    return 1.0 + scene.illumination_drift * t \
        + scene.illumination_amplitude * math.sin(3.7 * s + 1.0)


def select_landmark_vertices(basis: FaceBasis, count: int = N_LANDMARKS) -> np.ndarray:
    """Deterministic, well-spread landmark vertices on the front of the head.

    Farthest-point sampling over canonical front-facing vertices, seeded by
    the front-most vertex so the choice depends only on the basis.
    """
    pts = basis.average_geometry.reshape(-1, 3)
    front = np.nonzero(pts[:, 2] < 0)[0]
    if front.size < count:
        raise ValueError("not enough front-facing vertices for landmarks")
    chosen = [int(front[np.argmin(pts[front, 2])])]
    dist = np.linalg.norm(pts[front] - pts[chosen[0]], axis=1)
    while len(chosen) < count:
        nxt = int(front[np.argmax(dist)])
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(pts[front] - pts[nxt], axis=1))
    return np.array(chosen, dtype=np.int64)


def make_landmarks(basis: FaceBasis, params: FaceParameters, cam: CameraIntrinsics,
                   vertex_indices: np.ndarray | None = None,
                   noise: float = 0.0, rng: np.random.Generator | None = None) -> LandmarkSet:
    """Exact landmark detections for ground-truth parameters (optional pixel noise)."""
    if vertex_indices is None:
        vertex_indices = select_landmark_vertices(basis)
    verts = basis.average_geometry + basis.geometry_basis @ params.alpha \
        + basis.expression_basis @ params.delta
    posed = verts.reshape(-1, 3)[vertex_indices] @ params.rotation_matrix().T \
        + params.translation
    positions = project(posed, cam)
    if noise > 0:
        if rng is None:
            rng = np.random.default_rng(0)
        positions = positions + rng.normal(0.0, noise, positions.shape)

    iris = []
    for eye, yaw, pitch in ((basis.eye_left, params.gaze[0], params.gaze[1]),
                            (basis.eye_right, params.gaze[2], params.gaze[3])):
        proj = projected_eye(basis, params, cam, eye)
        if proj is None:
            iris.append(np.zeros(2))
            continue
        center, radius = proj
        iris.append(pupil_center_px(center, radius, yaw, pitch))
    return LandmarkSet(
        positions=positions,
        vertex_indices=vertex_indices,
        confidences=np.ones(len(vertex_indices)),
        iris_left=iris[0],
        iris_right=iris[1],
    )


def scene_trajectory(scene: SyntheticScene, basis: FaceBasis,
                     cam: CameraIntrinsics) -> list[FaceParameters]:
    """Smooth scripted pose/expression/gaze curves around a neutral front pose."""
    rng = np.random.default_rng(scene.seed)
    n_alpha, n_beta, n_delta = basis.dims

    alpha = rng.normal(0.0, 0.4, n_alpha) * basis.alpha_stddevs
    beta = rng.normal(0.0, 0.4, n_beta) * basis.beta_stddevs
    sh = np.zeros(27)
    for c in range(3):
        sh[9 * c] = 2.6 + 0.2 * rng.uniform(-1, 1)
        sh[9 * c + 1:9 * c + 4] = rng.uniform(-0.25, 0.25, 3)

    # a handful of active expression dimensions with random phase/frequency
    active_dims = rng.choice(np.arange(1, n_delta), size=min(6, n_delta - 1),
                             replace=False)
    phases = rng.uniform(0, 2 * math.pi, active_dims.size)
    freqs = rng.uniform(0.5, 2.0, active_dims.size) * scene.frequency_scale
    pose_phases = rng.uniform(0, 2 * math.pi, 6)
    pose_freqs = rng.uniform(0.4, 1.2, 6) * scene.frequency_scale
    gaze_phases = rng.uniform(0, 2 * math.pi, 4)

    distance = scene.distance_factor * basis.head_scale
    amp_rot = math.radians(scene.rotation_amplitude_deg)
    amp_t = scene.translation_amplitude * basis.head_scale
    drift = np.array(scene.translation_drift) * basis.head_scale

    out = []
    for f in range(scene.n_frames):
        s = 2 * math.pi * f / max(scene.n_frames, 1)
        rot_vec = amp_rot * np.array([
            0.6 * math.sin(pose_freqs[0] * s + pose_phases[0]),
            math.sin(pose_freqs[1] * s + pose_phases[1]),
            0.3 * math.sin(pose_freqs[2] * s + pose_phases[2]),
        ])
        trans = np.array([
            amp_t * math.sin(pose_freqs[3] * s + pose_phases[3]),
            amp_t * math.sin(pose_freqs[4] * s + pose_phases[4]),
            distance + amp_t * math.sin(pose_freqs[5] * s + pose_phases[5]),
        ]) + drift * (f / max(scene.n_frames - 1, 1) - 0.5)
        delta = np.zeros(n_delta)
        for d, ph, fr in zip(active_dims, phases, freqs):
            delta[d] = scene.expression_amplitude * basis.delta_stddevs[d] \
                * math.sin(fr * s + ph)
        gaze = scene.gaze_amplitude * GAZE_BOUND * np.sin(
            scene.frequency_scale * np.array([1.0, 0.7, 1.0, 0.7]) * s
            + gaze_phases)
        out.append(FaceParameters(
            rotation=quat_from_axis_angle(rot_vec),
            translation=trans,
            alpha=alpha.copy(), beta=beta.copy(), delta=delta,
            gaze=gaze, sh_coeffs=sh * light_factor(scene, f),
        ))
    return out


def scene_background(scene: SyntheticScene, cam: CameraIntrinsics) -> np.ndarray:
    """Static smooth seeded gradient background, raw [0, 255]."""
    w, h = cam.image_size
    rng = np.random.default_rng(scene.seed + 1)
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    u, v = xs / max(w - 1, 1), ys / max(h - 1, 1)
    bg = np.empty((h, w, 3))
    for c in range(3):
        a, b, cc = rng.uniform(40, 120), rng.uniform(-60, 60), rng.uniform(-60, 60)
        ph = rng.uniform(0, 2 * math.pi)
        bg[:, :, c] = a + b * u + cc * v + 15.0 * np.sin(3.0 * u + 2.0 * v + ph)
    return np.clip(bg, 0.0, 255.0)


def render_scene(basis: FaceBasis, scene: SyntheticScene, cam: CameraIntrinsics):
    """Render a full synthetic dataset.

    Returns (frames, params, landmark_sets); frames are raw [0, 255] images of
    the posed head composited over the scene background, 8-bit quantized so
    they round-trip PNG storage exactly.
    """
    params = scene_trajectory(scene, basis, cam)
    bg = scene_background(scene, cam)
    lm_vertices = select_landmark_vertices(basis)
    rng = np.random.default_rng(scene.seed + 2)
    w, h = cam.image_size

    frames, landmark_sets = [], []
    for f, p in enumerate(params):
        img, mask, _, _ = rasterize_color(basis, p, cam, return_buffers=True)
        data = bg * light_factor(scene, f)
        data[mask] = img.data[mask]
        if scene.noise_level > 0:
            data = data + rng.normal(0.0, scene.noise_level, data.shape)
        data = np.rint(np.clip(data, 0.0, 255.0))
        frames.append(RasterImage(w, h, data, "raw"))
        landmark_sets.append(make_landmarks(basis, p, cam, lm_vertices))
    return frames, params, landmark_sets
