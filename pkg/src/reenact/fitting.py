"""Analysis-by-synthesis parameter fitting.

Minimizes a weighted energy of dense photo-consistency (robust l1 via IRLS
reweighting), sparse landmark alignment and Tikhonov coefficient
regularization with damped Gauss-Newton steps.  The photometric Jacobian is
built by forward finite differences over the active parameters; landmark and
regularizer Jacobians are analytic.  Tracking mode freezes identity (alpha,
beta) and solves 97 degrees of freedom (6 pose + 64 expression + 27 SH);
full mode adds identity for 257.  Gaze is copied from the iris landmarks,
never solved.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .facemodel import (
    GAZE_BOUND,
    FaceBasis,
    FaceParameters,
    normalize_quat,
    quat_from_axis_angle,
    quat_multiply,
)
from .render import CameraIntrinsics, RasterImage, project, projected_eye, rasterize_color

logger = logging.getLogger(__name__)

N_LANDMARKS = 66
TRACKING_DOF = 6 + 64 + 27
FULL_DOF = TRACKING_DOF + 80 + 80


class EmptyForegroundError(ValueError):
    """The synthetic render has no foreground pixels (head not visible)."""


@dataclass
class LandmarkSet:
    """66 detected 2D landmarks with model correspondences, plus iris centers."""

    positions: np.ndarray       # (66, 2) pixels
    vertex_indices: np.ndarray  # (66,) int
    confidences: np.ndarray     # (66,) in [0, 1]
    iris_left: np.ndarray       # (2,) pixels
    iris_right: np.ndarray      # (2,) pixels

    def __post_init__(self):
        if self.positions.shape != (N_LANDMARKS, 2):
            raise ValueError(f"expected {N_LANDMARKS} landmarks, got {self.positions.shape}")
        if self.vertex_indices.shape != (N_LANDMARKS,):
            raise ValueError("vertex index count must match landmark count")
        if np.any(self.confidences < 0) or np.any(self.confidences > 1):
            raise ValueError("confidences must lie in [0, 1]")


@dataclass
class EnergyWeights:
    w_photo: float = 1.0
    w_land: float = 2000.0
    w_reg: float = 0.05

    def __post_init__(self):
        if min(self.w_photo, self.w_land, self.w_reg) < 0:
            raise ValueError("energy weights must be non-negative")
        if self.w_photo == self.w_land == self.w_reg == 0:
            raise ValueError("at least one energy weight must be positive")


@dataclass
class SolverConfig:
    max_iters: int = 7
    fd_step: float = 1e-4
    irls_eps: float = 1e-4
    converge_rel_tol: float = 1e-5
    init_damping: float = 1e-3
    max_damping_escalations: int = 10
    weights: EnergyWeights = field(default_factory=EnergyWeights)


@dataclass
class FitResult:
    params: FaceParameters
    energy_history: list
    converged: bool
    failed: bool = False
    dropped_landmarks: int = 0


# ---------------------------------------------------------------------------
# residual blocks
# ---------------------------------------------------------------------------

def _observed_01(frame: RasterImage) -> np.ndarray:
    if frame.space == "raw":
        return frame.data / 255.0
    return (frame.data + 1.0) / 2.0


def residuals_photo(frame: RasterImage, basis: FaceBasis, params: FaceParameters,
                    cam: CameraIntrinsics, mask: np.ndarray | None = None):
    """Per-foreground-pixel RGB residuals (synthesized - observed) in [0, 1] units.

    With ``mask`` given, residuals are evaluated on that fixed pixel set so
    finite-difference columns stay aligned with the base residual vector.
    Returns (residuals flat, mask).
    """
    synth, fg, _, _ = rasterize_color(basis, params, cam, return_buffers=True)
    if mask is None:
        mask = fg
        if not mask.any():
            raise EmptyForegroundError("no foreground pixels in synthetic render")
    res = synth.data[mask] / 255.0 - _observed_01(frame)[mask]
    return res.reshape(-1), mask


def photo_energy(residuals: np.ndarray) -> float:
    return float(np.abs(residuals).sum())


def irls_weights(residuals: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Robust-l1 reweighting: w = 1 / max(|r|, eps)."""
    return 1.0 / np.maximum(np.abs(residuals), eps)


def landmark_points(landmarks: LandmarkSet, basis: FaceBasis,
                    params: FaceParameters) -> np.ndarray:
    """Camera-space positions of the landmark vertices under current parameters."""
    from .facemodel import evaluate_geometry

    verts = evaluate_geometry(basis, params.alpha, params.delta).reshape(-1, 3)
    pts = verts[landmarks.vertex_indices]
    return pts @ params.rotation_matrix().T + params.translation


def residuals_landmark(landmarks: LandmarkSet, basis: FaceBasis,
                       params: FaceParameters, cam: CameraIntrinsics):
    """Confidence-weighted 2D landmark residuals normalized by the image diagonal.

    Landmarks behind the camera are dropped (zeroed); their count is returned.
    """
    w, h = cam.image_size
    diag = float(np.hypot(w, h))
    cam_pts = landmark_points(landmarks, basis, params)
    res = np.zeros((N_LANDMARKS, 2))
    valid = cam_pts[:, 2] > 1e-6
    dropped = int((~valid).sum())
    if valid.any():
        proj = project(cam_pts[valid], cam)
        res[valid] = (proj - landmarks.positions[valid]) / diag
    res *= landmarks.confidences[:, None]
    return res.reshape(-1), valid, dropped


def residual_reg(params: FaceParameters, basis: FaceBasis) -> np.ndarray:
    """Tikhonov residuals c_k / sigma_k over alpha, beta and delta."""
    return np.concatenate([
        params.alpha / basis.alpha_stddevs,
        params.beta / basis.beta_stddevs,
        params.delta / basis.delta_stddevs,
    ])


def total_energy(frame: RasterImage, landmarks: LandmarkSet, params: FaceParameters,
                 weights: EnergyWeights, basis: FaceBasis, cam: CameraIntrinsics,
                 mask: np.ndarray | None = None) -> float:
    """Weighted sum: w_photo * sum|r| + w_land * sum r^2 + w_reg * sum r^2."""
    r_photo, _ = residuals_photo(frame, basis, params, cam, mask=mask)
    r_land, _, _ = residuals_landmark(landmarks, basis, params, cam)
    r_reg = residual_reg(params, basis)
    return (weights.w_photo * photo_energy(r_photo)
            + weights.w_land * float(r_land @ r_land)
            + weights.w_reg * float(r_reg @ r_reg))


# ---------------------------------------------------------------------------
# gaze from iris landmarks
# ---------------------------------------------------------------------------

def gaze_from_iris(landmarks: LandmarkSet, basis: FaceBasis,
                   params: FaceParameters, cam: CameraIntrinsics) -> np.ndarray:
    """Map iris offsets within the projected eye boxes linearly to yaw/pitch.

    Inverse of the pupil placement rule used by the gaze renderer; offsets
    beyond the eye radius clamp to the gaze bound.
    """
    gaze = np.zeros(4)
    for i, (eye, iris) in enumerate(((basis.eye_left, landmarks.iris_left),
                                     (basis.eye_right, landmarks.iris_right))):
        proj = projected_eye(basis, params, cam, eye)
        if proj is None:
            continue
        center, radius = proj
        dx, dy = (np.asarray(iris) - center) / radius
        gaze[2 * i] = np.clip(dx, -1.0, 1.0) * GAZE_BOUND
        gaze[2 * i + 1] = np.clip(-dy, -1.0, 1.0) * GAZE_BOUND
    return gaze


# ---------------------------------------------------------------------------
# parameter packing and Jacobians
# ---------------------------------------------------------------------------

def active_slices(mode: str, basis: FaceBasis) -> dict:
    """Column layout of the solver state for the given mode."""
    n_alpha, n_beta, n_delta = basis.dims
    layout, at = {}, 0

    def block(name, size):
        nonlocal at
        layout[name] = slice(at, at + size)
        at += size

    block("rot", 3)
    block("trans", 3)
    if mode == "full":
        block("alpha", n_alpha)
        block("beta", n_beta)
    block("delta", n_delta)
    block("gamma", 27)
    layout["total"] = at
    return layout


def apply_step(params: FaceParameters, dx: np.ndarray, layout: dict) -> FaceParameters:
    """Update parameters by a packed increment; rotation via a left axis-angle."""
    out = params.copy()
    dq = quat_from_axis_angle(dx[layout["rot"]])
    out.rotation = normalize_quat(quat_multiply(dq, params.rotation))
    out.translation = params.translation + dx[layout["trans"]]
    if "alpha" in layout:
        out.alpha = params.alpha + dx[layout["alpha"]]
        out.beta = params.beta + dx[layout["beta"]]
    out.delta = params.delta + dx[layout["delta"]]
    out.sh_coeffs = params.sh_coeffs + dx[layout["gamma"]]
    return out


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])


def landmark_jacobian(landmarks: LandmarkSet, basis: FaceBasis, params: FaceParameters,
                      cam: CameraIntrinsics, layout: dict) -> np.ndarray:
    """Analytic Jacobian of the landmark residual block w.r.t. the active state."""
    w, h = cam.image_size
    diag = float(np.hypot(w, h))
    f = cam.focal_length_px
    r = params.rotation_matrix()
    cam_pts = landmark_points(landmarks, basis, params)
    jac = np.zeros((2 * N_LANDMARKS, layout["total"]))

    for l in range(N_LANDMARKS):
        v_hat = cam_pts[l]
        if v_hat[2] <= 1e-6:
            continue
        x, y, z = v_hat
        d_proj = np.array([[f / z, 0.0, -f * x / z ** 2],
                           [0.0, f / z, -f * y / z ** 2]])
        scale = landmarks.confidences[l] / diag
        rows = slice(2 * l, 2 * l + 2)
        u = v_hat - params.translation  # = R v
        jac[rows, layout["rot"]] = scale * d_proj @ (-_skew(u))
        jac[rows, layout["trans"]] = scale * d_proj
        vid = landmarks.vertex_indices[l]
        seg = slice(3 * vid, 3 * vid + 3)
        if "alpha" in layout:
            jac[rows, layout["alpha"]] = scale * d_proj @ r @ basis.geometry_basis[seg]
        jac[rows, layout["delta"]] = scale * d_proj @ r @ basis.expression_basis[seg]
    return jac


def reg_jacobian(basis: FaceBasis, layout: dict) -> np.ndarray:
    """Analytic Jacobian of the regularizer block (constant diagonal)."""
    n_alpha, n_beta, n_delta = basis.dims
    n_reg = n_alpha + n_beta + n_delta
    jac = np.zeros((n_reg, layout["total"]))
    if "alpha" in layout:
        jac[np.arange(n_alpha), np.arange(layout["alpha"].start, layout["alpha"].stop)] = \
            1.0 / basis.alpha_stddevs
        jac[n_alpha + np.arange(n_beta),
            np.arange(layout["beta"].start, layout["beta"].stop)] = 1.0 / basis.beta_stddevs
    jac[n_alpha + n_beta + np.arange(n_delta),
        np.arange(layout["delta"].start, layout["delta"].stop)] = 1.0 / basis.delta_stddevs
    return jac


def photo_jacobian_fd(frame: RasterImage, basis: FaceBasis, params: FaceParameters,
                      cam: CameraIntrinsics, mask: np.ndarray, base_res: np.ndarray,
                      layout: dict, step: float) -> np.ndarray:
    """Forward finite-difference Jacobian of the photometric block."""
    jac = np.empty((base_res.size, layout["total"]))
    for j in range(layout["total"]):
        dx = np.zeros(layout["total"])
        dx[j] = step
        perturbed = apply_step(params, dx, layout)
        res, _ = residuals_photo(frame, basis, perturbed, cam, mask=mask)
        jac[:, j] = (res - base_res) / step
    return jac


# ---------------------------------------------------------------------------
# frame and sequence fitting
# ---------------------------------------------------------------------------

def fit_frame(frame: RasterImage, landmarks: LandmarkSet, init: FaceParameters,
              mode: str, basis: FaceBasis, cam: CameraIntrinsics,
              config: SolverConfig | None = None) -> FitResult:
    """Fit one frame with damped Gauss-Newton / IRLS.

    ``mode`` is "full" (identity solved too) or "tracking" (alpha, beta frozen
    at their init values).  Accepted steps never increase the energy; the
    normal equations are solved by Cholesky with Levenberg damping escalated
    on rejection.  On unrecoverable failure the init is returned flagged.
    """
    if mode not in ("full", "tracking"):
        raise ValueError(f"unknown mode {mode!r}")
    config = config or SolverConfig()
    weights = config.weights
    layout = active_slices(mode, basis)

    params = init.copy()
    r_photo, _ = residuals_photo(frame, basis, params, cam)  # raises on empty fg
    _, _, dropped = residuals_landmark(landmarks, basis, params, cam)

    energy = total_energy(frame, landmarks, params, weights, basis, cam)
    history = [energy]
    damping = config.init_damping
    converged = False

    for _ in range(config.max_iters):
        r_photo, mask = residuals_photo(frame, basis, params, cam)
        r_land, _, _ = residuals_landmark(landmarks, basis, params, cam)
        r_reg = residual_reg(params, basis)

        w_irls = irls_weights(r_photo, config.irls_eps)
        sqrt_w = np.concatenate([
            np.sqrt(weights.w_photo * w_irls),
            np.full(r_land.size, np.sqrt(weights.w_land)),
            np.full(r_reg.size, np.sqrt(weights.w_reg)),
        ])
        residual = np.concatenate([r_photo, r_land, r_reg])
        jac = np.vstack([
            photo_jacobian_fd(frame, basis, params, cam, mask, r_photo,
                              layout, config.fd_step),
            landmark_jacobian(landmarks, basis, params, cam, layout),
            reg_jacobian(basis, layout),
        ])
        jw = jac * sqrt_w[:, None]
        fw = residual * sqrt_w
        jtj = jw.T @ jw
        rhs = -jw.T @ fw

        accepted = False
        for _esc in range(config.max_damping_escalations):
            try:
                factor = cho_factor(jtj + damping * np.eye(layout["total"]))
                dx = cho_solve(factor, rhs)
            except LinAlgError:
                damping *= 10.0
                continue
            candidate = apply_step(params, dx, layout)
            cand_energy = total_energy(frame, landmarks, candidate, weights, basis, cam)
            if cand_energy <= energy:
                rel_drop = (energy - cand_energy) / max(energy, 1e-30)
                if rel_drop < config.converge_rel_tol:
                    # below tolerance: stop without applying, so converged
                    # parameters are a fixed point of the solver
                    converged = True
                    accepted = True
                    break
                params = candidate
                energy = cand_energy
                history.append(energy)
                damping = max(damping * 0.5, 1e-9)
                accepted = True
                break
            damping *= 10.0
        if not accepted:
            if len(history) == 1:
                logger.warning("no step accepted; returning init parameters")
                init_out = init.copy()
                init_out.gaze = gaze_from_iris(landmarks, basis, init_out, cam)
                return FitResult(init_out, history, False, failed=True,
                                 dropped_landmarks=dropped)
            converged = True
        if converged:
            break

    if mode == "tracking":
        params.alpha = init.alpha.copy()
        params.beta = init.beta.copy()
    params.gaze = gaze_from_iris(landmarks, basis, params, cam)
    return FitResult(params, history, converged, dropped_landmarks=dropped)


def track_sequence(frames: list[RasterImage], landmark_sets: list[LandmarkSet],
                   basis: FaceBasis, cam: CameraIntrinsics,
                   config: SolverConfig | None = None,
                   init: FaceParameters | None = None) -> tuple[list[FaceParameters], list[bool]]:
    """Fit a sequence: frame 1 in full mode, the rest tracking from the previous fit.

    Returns the per-frame parameters and a per-frame failure flag list; failed
    frames carry the previous frame's parameters forward.
    """
    if not frames:
        raise ValueError("need at least one frame")
    if len(frames) != len(landmark_sets):
        raise ValueError("one landmark set per frame required")
    config = config or SolverConfig()

    if init is None:
        init = default_init(basis, cam)
    results, flags = [], []
    current = init
    for f, (frame, lm) in enumerate(zip(frames, landmark_sets)):
        mode = "full" if f == 0 else "tracking"
        try:
            fit = fit_frame(frame, lm, current, mode, basis, cam, config)
            failed = fit.failed
            current = fit.params
        except EmptyForegroundError:
            logger.warning("frame %d: empty foreground, carrying parameters forward", f)
            failed = True
        results.append(current.copy())
        flags.append(failed)
    return results, flags


def default_init(basis: FaceBasis, cam: CameraIntrinsics) -> FaceParameters:
    """Neutral head facing the camera at a distance filling ~half the image."""
    sh = np.zeros(27)
    sh[0] = sh[9] = sh[18] = 2.5
    distance = 3.5 * basis.head_scale
    n_alpha, n_beta, n_delta = basis.dims
    return FaceParameters(
        translation=np.array([0.0, 0.0, distance]),
        alpha=np.zeros(n_alpha), beta=np.zeros(n_beta), delta=np.zeros(n_delta),
        sh_coeffs=sh,
    )
