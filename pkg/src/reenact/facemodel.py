"""Parametric head model: linear geometry/reflectance/expression bases and pose.

The head is an affine model over a procedurally generated template mesh.
Geometry is ``average + geometry_basis @ alpha + expression_basis @ delta``,
reflectance is ``average + reflectance_basis @ beta``.  The procedural basis
replaces scan-derived data: a deterministic, seeded deformed ellipsoid with
eye sockets, orthonormal basis columns and geometrically decaying singular
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

DEFAULT_DIMS = (80, 80, 64)
N_SH_COEFFS = 27  # 9 per RGB channel, 3 SH bands
GAZE_BOUND = math.pi / 4.0


class BasisError(ValueError):
    """Raised when a procedural basis cannot be constructed as requested."""


class ShapeMismatchError(ValueError):
    """Coefficient vector length does not match the basis dimensions."""


@dataclass(frozen=True)
class EyeAnnotation:
    """Vertex set and socket geometry for one eye, in canonical model space."""

    vertex_indices: np.ndarray  # (k,) int
    socket_center: np.ndarray   # (3,)
    socket_radius: float


@dataclass(frozen=True)
class FaceBasis:
    """Average head plus linear bases; immutable after construction."""

    vertex_count: int
    average_geometry: np.ndarray      # (3N,)
    average_reflectance: np.ndarray   # (3N,) linear RGB albedo in [0, 1]
    geometry_basis: np.ndarray        # (3N, N_alpha)
    reflectance_basis: np.ndarray     # (3N, N_beta)
    expression_basis: np.ndarray      # (3N, N_delta)
    alpha_stddevs: np.ndarray         # (N_alpha,)
    beta_stddevs: np.ndarray          # (N_beta,)
    delta_stddevs: np.ndarray         # (N_delta,)
    triangles: np.ndarray             # (T, 3) int
    texture_coordinates: np.ndarray   # (N, 2) in [0, 1]^2
    eye_left: EyeAnnotation
    eye_right: EyeAnnotation
    closure_dim: int                  # expression dimension driving eyelid closure
    closure_scale: float              # delta[closure_dim] at which eyes are fully shut
    seed: int

    @property
    def dims(self) -> tuple[int, int, int]:
        return (
            self.geometry_basis.shape[1],
            self.reflectance_basis.shape[1],
            self.expression_basis.shape[1],
        )

    @property
    def head_scale(self) -> float:
        """Characteristic head size: max distance of the average mesh from its centroid."""
        pts = self.average_geometry.reshape(-1, 3)
        return float(np.linalg.norm(pts - pts.mean(axis=0), axis=1).max())


@dataclass
class FaceParameters:
    """Per-frame parameter vector: pose, identity, expression, gaze, lighting.

    6 pose + 80 alpha + 80 beta + 64 delta + 4 gaze + 27 SH = 261 scalars.
    """

    rotation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    alpha: np.ndarray = field(default_factory=lambda: np.zeros(DEFAULT_DIMS[0]))
    beta: np.ndarray = field(default_factory=lambda: np.zeros(DEFAULT_DIMS[1]))
    delta: np.ndarray = field(default_factory=lambda: np.zeros(DEFAULT_DIMS[2]))
    gaze: np.ndarray = field(default_factory=lambda: np.zeros(4))
    sh_coeffs: np.ndarray = field(default_factory=lambda: np.zeros(N_SH_COEFFS))

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.beta = np.asarray(self.beta, dtype=np.float64)
        self.delta = np.asarray(self.delta, dtype=np.float64)
        self.gaze = np.asarray(self.gaze, dtype=np.float64)
        self.sh_coeffs = np.asarray(self.sh_coeffs, dtype=np.float64)
        norm = float(np.linalg.norm(self.rotation))
        if abs(norm - 1.0) > 1e-6:
            raise ValueError(f"rotation quaternion norm {norm} too far from 1")
        if abs(norm - 1.0) > 1e-12:
            self.rotation = self.rotation / norm
        if self.rotation.shape != (4,):
            raise ShapeMismatchError("rotation must be a unit quaternion (w, x, y, z)")
        if self.translation.shape != (3,) or self.gaze.shape != (4,):
            raise ShapeMismatchError("translation must be length 3, gaze length 4")
        if self.sh_coeffs.shape != (N_SH_COEFFS,):
            raise ShapeMismatchError(f"sh_coeffs must be length {N_SH_COEFFS}")
        if np.any(np.abs(self.gaze) > GAZE_BOUND + 1e-12):
            raise ValueError("gaze angles must lie within [-pi/4, +pi/4]")

    @property
    def scalar_count(self) -> int:
        return 6 + self.alpha.size + self.beta.size + self.delta.size + 4 + 27

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.rotation
        return Rotation.from_quat([x, y, z, w]).as_matrix()

    def copy(self) -> "FaceParameters":
        return FaceParameters(
            rotation=self.rotation.copy(),
            translation=self.translation.copy(),
            alpha=self.alpha.copy(),
            beta=self.beta.copy(),
            delta=self.delta.copy(),
            gaze=self.gaze.copy(),
            sh_coeffs=self.sh_coeffs.copy(),
        )

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "alpha": self.alpha.tolist(),
            "beta": self.beta.tolist(),
            "delta": self.delta.tolist(),
            "gaze": self.gaze.tolist(),
            "sh_coeffs": self.sh_coeffs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FaceParameters":
        return cls(**{k: np.asarray(v, dtype=np.float64) for k, v in d.items()})


# ---------------------------------------------------------------------------
# quaternion helpers (scalar-first convention)
# ---------------------------------------------------------------------------

def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product q1 * q2, both (w, x, y, z)."""
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_axis_angle(axis_angle: np.ndarray) -> np.ndarray:
    """Unit quaternion for a rotation vector (axis * angle)."""
    aa = np.asarray(axis_angle, dtype=np.float64)
    r = Rotation.from_rotvec(aa)
    x, y, z, w = r.as_quat()
    return np.array([w, x, y, z])


def quat_to_axis_angle(q: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of a unit quaternion, angle in [0, pi]."""
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_rotvec()


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return Rotation.from_quat([x, y, z, w]).as_matrix()


def normalize_quat(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q)


# ---------------------------------------------------------------------------
# procedural basis synthesis
# ---------------------------------------------------------------------------

def _ring_grid(vertex_count: int) -> tuple[int, int]:
    """Factor vertex_count - 2 into rings x segments for a closed lat/long mesh."""
    body = vertex_count - 2
    best = None
    for segs in range(4, body // 4 + 1):
        if body % segs:
            continue
        rings = body // segs
        if rings < 4:
            continue
        score = abs(segs - 2 * rings)  # prefer roughly isotropic quads
        if best is None or score < best[0]:
            best = (score, rings, segs)
    if best is None:
        raise BasisError(
            f"vertex_count={vertex_count} admits no rings x segments grid "
            "(vertex_count - 2 must factor into two integers >= 4)"
        )
    return best[1], best[2]


def _sphere_mesh(rings: int, segs: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit-sphere directions, triangle list and (u, v) coordinates.

    "Up" through the top of the head is -y so that the head renders upright
    with image-style y-down camera coordinates; the face looks toward -z.
    """
    dirs = np.empty((rings * segs + 2, 3))
    uv = np.empty((rings * segs + 2, 2))
    for i in range(rings):
        phi = math.pi * (i + 1) / (rings + 1)  # angle from top of head
        for j in range(segs):
            theta = 2.0 * math.pi * j / segs
            idx = i * segs + j
            dirs[idx] = (
                math.sin(phi) * math.cos(theta),
                -math.cos(phi),
                math.sin(phi) * math.sin(theta),
            )
            uv[idx] = (j / segs, (i + 1) / (rings + 1))
    top, bottom = rings * segs, rings * segs + 1
    dirs[top] = (0.0, -1.0, 0.0)
    dirs[bottom] = (0.0, 1.0, 0.0)
    uv[top] = (0.5, 0.0)
    uv[bottom] = (0.5, 1.0)

    tris = []
    for j in range(segs):
        jn = (j + 1) % segs
        # cap fans; winding chosen so face normals point outward
        tris.append((top, j, jn))
        tris.append((bottom, (rings - 1) * segs + jn, (rings - 1) * segs + j))
        for i in range(rings - 1):
            a, b = i * segs + j, i * segs + jn
            c, d = (i + 1) * segs + j, (i + 1) * segs + jn
            tris.append((a, d, b))
            tris.append((a, c, d))
    return dirs, np.array(tris, dtype=np.int64), uv


_EYE_DIR_LEFT = np.array([-0.35, -0.28, -0.90])
_EYE_DIR_RIGHT = np.array([0.35, -0.28, -0.90])


def _eye_region(dirs: np.ndarray, eye_dir: np.ndarray) -> np.ndarray:
    """Vertex indices within an angular patch around the eye direction."""
    e = eye_dir / np.linalg.norm(eye_dir)
    cosines = dirs @ e
    for half_angle in np.linspace(math.radians(16), math.radians(45), 16):
        idx = np.nonzero(cosines >= math.cos(half_angle))[0]
        if idx.size >= 3:
            return idx
    raise BasisError("mesh too coarse to carry eye annotations")


def _orthonormal_columns(rng: np.random.Generator, n_rows: int, n_cols: int,
                         first_col: np.ndarray | None = None) -> np.ndarray:
    """Orthonormal (n_rows, n_cols) matrix; optionally pins the first column."""
    raw = rng.standard_normal((n_rows, n_cols))
    if first_col is not None:
        raw[:, 0] = first_col / np.linalg.norm(first_col)
    q, r = np.linalg.qr(raw)
    # fix QR sign ambiguity for determinism across BLAS builds
    q = q * np.sign(np.diag(r))
    return q[:, :n_cols]


def synthesize_basis(seed: int, vertex_count: int,
                     dims: tuple[int, int, int] = DEFAULT_DIMS) -> FaceBasis:
    """Build a deterministic procedural head basis.

    The template is an ellipsoid deformed by seeded smooth radial lobes, a
    nose bump and eye-socket indentations.  Basis columns are orthonormal and
    scaled by geometrically decaying singular values sigma_k = sigma_0 * 0.95^k;
    those singular values double as the regularizer's coefficient stddevs.
    Expression dimension 0 is a crafted eyelid-closure mode.
    """
    n_alpha, n_beta, n_delta = dims
    if vertex_count < 64:
        raise BasisError("vertex_count must be at least 64")
    if min(dims) < 1:
        raise BasisError("basis dimensions must be positive")

    rings, segs = _ring_grid(vertex_count)
    dirs, tris, uv = _sphere_mesh(rings, segs)
    n = dirs.shape[0]
    rng = np.random.default_rng(seed)

    # smooth seeded radial bump field
    bump = np.ones(n)
    lobe_dirs = rng.standard_normal((6, 3))
    lobe_dirs /= np.linalg.norm(lobe_dirs, axis=1, keepdims=True)
    lobe_amps = rng.uniform(-0.07, 0.07, size=6)
    for w, a in zip(lobe_dirs, lobe_amps):
        bump += a * np.exp(4.0 * (dirs @ w - 1.0))
    nose_dir = np.array([0.0, 0.08, -1.0])
    nose_dir /= np.linalg.norm(nose_dir)
    bump += 0.18 * np.exp(14.0 * (dirs @ nose_dir - 1.0))
    for eye_dir in (_EYE_DIR_LEFT, _EYE_DIR_RIGHT):
        e = eye_dir / np.linalg.norm(eye_dir)
        bump -= 0.06 * np.exp(10.0 * (dirs @ e - 1.0))

    radii = np.array([0.75, 1.0, 0.82])
    verts = dirs * radii * bump[:, None]
    avg_geometry = verts.reshape(-1)

    # skin-toned albedo with gentle seeded variation
    base_tone = np.array([0.72, 0.52, 0.42])
    tone = base_tone + 0.05 * np.tanh(verts @ rng.standard_normal((3, 3)) * 0.5)
    avg_reflectance = np.clip(tone, 0.05, 0.95).reshape(-1)

    left_idx = _eye_region(dirs, _EYE_DIR_LEFT)
    right_idx = _eye_region(dirs, _EYE_DIR_RIGHT)

    def annotate(idx: np.ndarray) -> EyeAnnotation:
        pts = verts[idx]
        center = pts.mean(axis=0)
        radius = float(np.linalg.norm(pts - center, axis=1).mean())
        return EyeAnnotation(idx.copy(), center, radius)

    sigma_alpha = 0.05 * 0.95 ** np.arange(n_alpha)
    sigma_beta = 0.04 * 0.95 ** np.arange(n_beta)
    sigma_delta = 0.03 * 0.95 ** np.arange(n_delta)

    geometry_basis = _orthonormal_columns(rng, 3 * n, n_alpha) * sigma_alpha
    reflectance_basis = _orthonormal_columns(rng, 3 * n, n_beta) * sigma_beta

    # eyelid closure mode: eye-region vertices sink inward along -dir
    closure = np.zeros((n, 3))
    for idx in (left_idx, right_idx):
        closure[idx] -= dirs[idx] * 0.05
    expression_basis = _orthonormal_columns(
        rng, 3 * n, n_delta, first_col=closure.reshape(-1)) * sigma_delta

    basis = FaceBasis(
        vertex_count=n,
        average_geometry=avg_geometry,
        average_reflectance=avg_reflectance,
        geometry_basis=geometry_basis,
        reflectance_basis=reflectance_basis,
        expression_basis=expression_basis,
        alpha_stddevs=sigma_alpha,
        beta_stddevs=sigma_beta,
        delta_stddevs=sigma_delta,
        triangles=tris,
        texture_coordinates=uv,
        eye_left=annotate(left_idx),
        eye_right=annotate(right_idx),
        closure_dim=0,
        closure_scale=2.0 * sigma_delta[0],
        seed=seed,
    )
    for arr in (basis.average_geometry, basis.average_reflectance,
                basis.geometry_basis, basis.reflectance_basis,
                basis.expression_basis, basis.triangles):
        arr.setflags(write=False)
    return basis


# ---------------------------------------------------------------------------
# model evaluation
# ---------------------------------------------------------------------------

def evaluate_geometry(basis: FaceBasis, alpha: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """Vertex positions ``average + G @ alpha + E @ delta`` as a flat (3N,) vector."""
    alpha = np.asarray(alpha, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    n_alpha, _, n_delta = basis.dims
    if alpha.shape != (n_alpha,):
        raise ShapeMismatchError(f"alpha must have length {n_alpha}, got {alpha.shape}")
    if delta.shape != (n_delta,):
        raise ShapeMismatchError(f"delta must have length {n_delta}, got {delta.shape}")
    return basis.average_geometry + basis.geometry_basis @ alpha + basis.expression_basis @ delta


def evaluate_reflectance(basis: FaceBasis, beta: np.ndarray, clamp: bool = True) -> np.ndarray:
    """Per-vertex albedo; clamped to [0, 1] unless the raw affine value is wanted."""
    beta = np.asarray(beta, dtype=np.float64)
    n_beta = basis.dims[1]
    if beta.shape != (n_beta,):
        raise ShapeMismatchError(f"beta must have length {n_beta}, got {beta.shape}")
    refl = basis.average_reflectance + basis.reflectance_basis @ beta
    return np.clip(refl, 0.0, 1.0) if clamp else refl


def apply_rigid_pose(vertices: np.ndarray, rotation: np.ndarray,
                     translation: np.ndarray) -> np.ndarray:
    """Map model-space vertices (flat 3N or (N, 3)) to camera space R v + t."""
    rotation = np.asarray(rotation, dtype=np.float64)
    norm = float(np.linalg.norm(rotation))
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"quaternion norm {norm} too far from 1")
    pts = np.asarray(vertices, dtype=np.float64)
    flat = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    out = pts @ quat_to_matrix(rotation / norm).T + np.asarray(translation, dtype=np.float64)
    return out.reshape(-1) if flat else out
