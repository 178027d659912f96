"""Perspective projection, spherical-harmonics shading and software rasterization.

The rasterizer is deterministic by construction: all fragments are generated
and resolved with a fixed ordering (pixel, depth, triangle index), so output
never depends on evaluation schedule.  Depth ties go to the lower triangle
index.  It produces the three conditioning image kinds: shaded color,
canonical-position correspondence, and the schematic eye-gaze image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .facemodel import (
    GAZE_BOUND,
    FaceBasis,
    FaceParameters,
    evaluate_geometry,
    evaluate_reflectance,
)

_Z_NEAR = 1e-6


class BehindCameraError(ValueError):
    """A point with non-positive depth was handed to the projector."""


class DegenerateNormalError(ValueError):
    """Vertex normal accumulation produced a zero vector."""


@dataclass(frozen=True)
class CameraIntrinsics:
    focal_length_px: float
    principal_point: tuple[float, float]
    image_size: tuple[int, int]  # (W, H)

    def __post_init__(self):
        if self.focal_length_px <= 0:
            raise ValueError("focal length must be positive")
        cx, cy = self.principal_point
        w, h = self.image_size
        if not (0 <= cx < w and 0 <= cy < h):
            raise ValueError("principal point must lie inside the image")


def default_intrinsics(width: int, height: int) -> CameraIntrinsics:
    """Default camera: f = 1.2 * max(W, H), principal point at image center."""
    return CameraIntrinsics(
        focal_length_px=1.2 * max(width, height),
        principal_point=(width / 2.0, height / 2.0),
        image_size=(width, height),
    )


@dataclass
class RasterImage:
    """Row-major RGB image; ``space`` is "raw" ([0, 255]) or "normalized" ([-1, +1])."""

    width: int
    height: int
    data: np.ndarray  # (H, W, 3) float64
    space: str = "raw"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.shape != (self.height, self.width, 3):
            raise ValueError(f"data shape {self.data.shape} does not match "
                             f"{(self.height, self.width, 3)}")
        if self.space not in ("raw", "normalized"):
            raise ValueError(f"unknown color space tag {self.space!r}")

    @classmethod
    def blank(cls, width: int, height: int, space: str = "raw") -> "RasterImage":
        return cls(width, height, np.zeros((height, width, 3)), space)


@dataclass
class ConditioningFrame:
    """The three per-frame conditioning renderings, identically sized."""

    color: RasterImage
    correspondence: RasterImage
    gaze: RasterImage

    def __post_init__(self):
        sizes = {(im.width, im.height) for im in (self.color, self.correspondence, self.gaze)}
        if len(sizes) != 1:
            raise ValueError("conditioning images must share dimensions")


# ---------------------------------------------------------------------------
# projection and shading
# ---------------------------------------------------------------------------

def project(points: np.ndarray, cam: CameraIntrinsics) -> np.ndarray:
    """Perspective projection of camera-space points to pixel coordinates.

    Accepts a single (3,) point or an (N, 3) array; raises if any depth <= 0.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 3)
    if np.any(pts[:, 2] <= 0):
        raise BehindCameraError("point depth must be positive")
    f = cam.focal_length_px
    cx, cy = cam.principal_point
    out = np.stack([f * pts[:, 0] / pts[:, 2] + cx,
                    f * pts[:, 1] / pts[:, 2] + cy], axis=1)
    return out[0] if single else out


def sh_basis(normals: np.ndarray) -> np.ndarray:
    """Real spherical-harmonics basis, bands 0-2, evaluated at unit directions.

    Returns (..., 9) in the order: constant; y, z, x; xy, yz, 3z^2-1, xz, x^2-y^2.
    """
    n = np.asarray(normals, dtype=np.float64)
    x, y, z = n[..., 0], n[..., 1], n[..., 2]
    c0 = 0.5 * math.sqrt(1.0 / math.pi)
    c1 = math.sqrt(3.0 / (4.0 * math.pi))
    c2a = 0.5 * math.sqrt(15.0 / math.pi)
    c2b = 0.25 * math.sqrt(5.0 / math.pi)
    c2c = 0.25 * math.sqrt(15.0 / math.pi)
    return np.stack([
        np.full_like(x, c0),
        c1 * y, c1 * z, c1 * x,
        c2a * x * y, c2a * y * z, c2b * (3.0 * z * z - 1.0),
        c2a * x * z, c2c * (x * x - y * y),
    ], axis=-1)


def shade_vertex(albedo: np.ndarray, normal: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Diffuse radiance ``albedo * sum_b gamma_b Y_b(normal)`` per RGB channel.

    ``gamma`` holds 27 coefficients, 9 per channel (R first).
    """
    normal = np.asarray(normal, dtype=np.float64)
    norms = np.linalg.norm(normal, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise ValueError("normals must be unit length")
    gamma = np.asarray(gamma, dtype=np.float64).reshape(3, 9)
    basis = sh_basis(normal)  # (..., 9)
    irradiance = basis @ gamma.T  # (..., 3)
    return np.asarray(albedo, dtype=np.float64) * irradiance


def compute_vertex_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals of a watertight mesh, unit length."""
    pts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    tris = np.asarray(triangles)
    e1 = pts[tris[:, 1]] - pts[tris[:, 0]]
    e2 = pts[tris[:, 2]] - pts[tris[:, 0]]
    face = np.cross(e1, e2)  # magnitude = 2 * area; zero for degenerate faces
    acc = np.zeros_like(pts)
    for k in range(3):
        np.add.at(acc, tris[:, k], face)
    norms = np.linalg.norm(acc, axis=1)
    if np.any(norms < 1e-15):
        raise DegenerateNormalError("zero accumulated normal at a vertex")
    return acc / norms[:, None]


# ---------------------------------------------------------------------------
# rasterization core
# ---------------------------------------------------------------------------

def rasterize_attributes(vertices_cam: np.ndarray, triangles: np.ndarray,
                         attributes: np.ndarray, cam: CameraIntrinsics):
    """Z-buffered, back-face-culled triangle rasterization.

    Per-vertex ``attributes`` (N, K) are interpolated with perspective-correct
    barycentrics.  Returns (image (H, W, K), depth (H, W), triangle index map
    (H, W) with -1 for background, and the per-pixel barycentric weights
    (H, W, 3)).  Winding must be counter-clockwise seen from outside; faces
    oriented away from the origin are culled.
    """
    w, h = cam.image_size
    k = attributes.shape[1]
    img = np.zeros((h, w, k))
    depth = np.full((h, w), np.inf)
    tri_map = np.full((h, w), -1, dtype=np.int64)
    bary = np.zeros((h, w, 3))

    pts = np.asarray(vertices_cam, dtype=np.float64).reshape(-1, 3)
    tris = np.asarray(triangles)

    v0, v1, v2 = pts[tris[:, 0]], pts[tris[:, 1]], pts[tris[:, 2]]
    visible = (v0[:, 2] > _Z_NEAR) & (v1[:, 2] > _Z_NEAR) & (v2[:, 2] > _Z_NEAR)
    face_n = np.cross(v1 - v0, v2 - v0)
    centroid = (v0 + v1 + v2) / 3.0
    visible &= np.einsum("ij,ij->i", face_n, centroid) < 0  # facing the camera
    tri_ids = np.nonzero(visible)[0]
    if tri_ids.size == 0:
        return img, depth, tri_map, bary

    tv = tris[tri_ids]
    p = np.stack([project(pts[tv[:, i]], cam) for i in range(3)], axis=1)  # (T, 3, 2)
    z = np.stack([pts[tv[:, i], 2] for i in range(3)], axis=1)             # (T, 3)

    # integer pixel bounding boxes, clipped to the viewport
    x0 = np.clip(np.floor(p[:, :, 0].min(axis=1) - 0.5).astype(np.int64), 0, w - 1)
    x1 = np.clip(np.ceil(p[:, :, 0].max(axis=1) + 0.5).astype(np.int64), 0, w)
    y0 = np.clip(np.floor(p[:, :, 1].min(axis=1) - 0.5).astype(np.int64), 0, h - 1)
    y1 = np.clip(np.ceil(p[:, :, 1].max(axis=1) + 0.5).astype(np.int64), 0, h)
    bw = np.maximum(x1 - x0, 0)
    bh = np.maximum(y1 - y0, 0)
    frag_counts = bw * bh
    keep = frag_counts > 0
    tri_ids, tv, p, z = tri_ids[keep], tv[keep], p[keep], z[keep]
    x0, y0, bw, bh, frag_counts = x0[keep], y0[keep], bw[keep], bh[keep], frag_counts[keep]
    if tri_ids.size == 0:
        return img, depth, tri_map, bary

    # flat fragment lists: one entry per (triangle, bbox pixel)
    total = int(frag_counts.sum())
    owner = np.repeat(np.arange(tri_ids.size), frag_counts)
    offsets = np.concatenate(([0], np.cumsum(frag_counts)[:-1]))
    local = np.arange(total) - np.repeat(offsets, frag_counts)
    px = x0[owner] + local % bw[owner]
    py = y0[owner] + local // bw[owner]
    cxs = px + 0.5
    cys = py + 0.5

    pa, pb, pc = p[owner, 0], p[owner, 1], p[owner, 2]

    def edge(qa, qb):
        return ((qb[:, 0] - qa[:, 0]) * (cys - qa[:, 1])
                - (qb[:, 1] - qa[:, 1]) * (cxs - qa[:, 0]))

    area2 = ((pb[:, 0] - pa[:, 0]) * (pc[:, 1] - pa[:, 1])
             - (pb[:, 1] - pa[:, 1]) * (pc[:, 0] - pa[:, 0]))
    ok = np.abs(area2) > 1e-14
    l0 = np.where(ok, edge(pb, pc) / np.where(ok, area2, 1.0), -1.0)
    l1 = np.where(ok, edge(pc, pa) / np.where(ok, area2, 1.0), -1.0)
    l2 = 1.0 - l0 - l1
    covered = ok & (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
    if not covered.any():
        return img, depth, tri_map, bary
    owner, px, py = owner[covered], px[covered], py[covered]
    l0, l1, l2 = l0[covered], l1[covered], l2[covered]

    za, zb, zc = z[owner, 0], z[owner, 1], z[owner, 2]
    inv_z = l0 / za + l1 / zb + l2 / zc
    frag_depth = 1.0 / inv_z
    w0 = (l0 / za) * frag_depth
    w1 = (l1 / zb) * frag_depth
    w2 = (l2 / zc) * frag_depth

    # z-resolve: per pixel keep smallest depth, ties to the lowest triangle index
    pix = py * w + px
    order = np.lexsort((tri_ids[owner], frag_depth, pix))
    first = np.ones(order.size, dtype=bool)
    first[1:] = pix[order][1:] != pix[order][:-1]
    sel = order[first]

    a = attributes[tv[owner[sel], 0]] * w0[sel, None] \
        + attributes[tv[owner[sel], 1]] * w1[sel, None] \
        + attributes[tv[owner[sel], 2]] * w2[sel, None]
    img[py[sel], px[sel]] = a
    depth[py[sel], px[sel]] = frag_depth[sel]
    tri_map[py[sel], px[sel]] = tri_ids[owner[sel]]
    bary[py[sel], px[sel]] = np.stack([w0[sel], w1[sel], w2[sel]], axis=1)
    return img, depth, tri_map, bary


# ---------------------------------------------------------------------------
# conditioning renders
# ---------------------------------------------------------------------------

def _posed_geometry(basis: FaceBasis, params: FaceParameters):
    verts_model = evaluate_geometry(basis, params.alpha, params.delta).reshape(-1, 3)
    r = params.rotation_matrix()
    verts_cam = verts_model @ r.T + params.translation
    return verts_model, verts_cam, r


def rasterize_color(basis: FaceBasis, params: FaceParameters,
                    cam: CameraIntrinsics, return_buffers: bool = False):
    """Shaded render of the posed head; raw [0, 255] image, black background.

    With ``return_buffers`` also returns the foreground mask and the per-pixel
    interpolated albedo and unit normals (used by the photometric solver).
    """
    _, verts_cam, r = _posed_geometry(basis, params)
    albedo = evaluate_reflectance(basis, params.beta).reshape(-1, 3)
    normals_model = compute_vertex_normals(
        evaluate_geometry(basis, params.alpha, params.delta), basis.triangles)
    normals_cam = normals_model @ r.T

    attrs = np.concatenate([albedo, normals_cam], axis=1)
    img, _, tri_map, _ = rasterize_attributes(verts_cam, basis.triangles, attrs, cam)
    mask = tri_map >= 0

    out = np.zeros_like(img[:, :, :3])
    if mask.any():
        n = img[mask][:, 3:6]
        n = n / np.linalg.norm(n, axis=1, keepdims=True)
        shaded = shade_vertex(img[mask][:, 0:3], n, params.sh_coeffs)
        out[mask] = np.clip(shaded, 0.0, 1.0) * 255.0
    w, h = cam.image_size
    result = RasterImage(w, h, out, "raw")
    if return_buffers:
        return result, mask, img[:, :, 0:3], img[:, :, 3:6]
    return result


def correspondence_codes(basis: FaceBasis) -> np.ndarray:
    """Per-vertex RGB code: average-geometry position affine-mapped to [0, 255]."""
    pts = basis.average_geometry.reshape(-1, 3)
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    return (pts - lo) / span * 255.0


def rasterize_correspondence(basis: FaceBasis, params: FaceParameters,
                             cam: CameraIntrinsics) -> RasterImage:
    """Gradient-texture render uniquely encoding canonical surface location."""
    _, verts_cam, _ = _posed_geometry(basis, params)
    img, _, _, _ = rasterize_attributes(
        verts_cam, basis.triangles, correspondence_codes(basis), cam)
    w, h = cam.image_size
    return RasterImage(w, h, img, "raw")


def eye_closure_fraction(basis: FaceBasis, params: FaceParameters) -> float:
    """Eyelid closure in [0, 1] from the designated expression dimension."""
    return float(np.clip(params.delta[basis.closure_dim] / basis.closure_scale, 0.0, 1.0))


def projected_eye(basis: FaceBasis, params: FaceParameters, cam: CameraIntrinsics,
                  eye) -> tuple[np.ndarray, float] | None:
    """Projected socket center and pixel radius, or None if the eye faces away."""
    r = params.rotation_matrix()
    center_cam = r @ eye.socket_center + params.translation
    if center_cam[2] <= _Z_NEAR:
        return None
    outward = r @ (eye.socket_center / np.linalg.norm(eye.socket_center))
    if np.dot(outward, center_cam) >= 0:
        return None
    center_px = project(center_cam, cam)
    radius_px = eye.socket_radius * cam.focal_length_px / center_cam[2]
    return center_px, radius_px


def pupil_center_px(center_px: np.ndarray, radius_px: float,
                    yaw: float, pitch: float) -> np.ndarray:
    """Pupil center: socket center displaced by gaze, clamped to the eye radius."""
    disp = np.array([yaw / GAZE_BOUND, -pitch / GAZE_BOUND]) * radius_px
    norm = np.linalg.norm(disp)
    if norm > radius_px:
        disp *= radius_px / norm
    return np.asarray(center_px) + disp


def rasterize_gaze(basis: FaceBasis, params: FaceParameters,
                   cam: CameraIntrinsics) -> RasterImage:
    """Schematic gaze image: white sclera regions, blue pupil disks, black elsewhere.

    The pupil center is the projected socket center displaced by
    (yaw, pitch) / gaze-bound times the projected eye radius; displacement is
    clamped to the sclera boundary.  Eyelid closure clips the sclera band
    vertically around its center.
    """
    w, h = cam.image_size
    out = np.zeros((h, w, 3))
    verts_model, verts_cam, _ = _posed_geometry(basis, params)
    closure = eye_closure_fraction(basis, params)
    ys, xs = np.mgrid[0:h, 0:w]
    cxs, cys = xs + 0.5, ys + 0.5

    for eye, yaw, pitch in ((basis.eye_left, params.gaze[0], params.gaze[1]),
                            (basis.eye_right, params.gaze[2], params.gaze[3])):
        proj = projected_eye(basis, params, cam, eye)
        if proj is None:
            continue
        center_px, radius_px = proj
        region = verts_cam[eye.vertex_indices]
        if np.any(region[:, 2] <= _Z_NEAR):
            continue
        pts2d = project(region, cam)
        try:
            hull = ConvexHull(pts2d)
        except QhullError:
            continue
        # inside test against every hull half-plane
        inside = np.ones((h, w), dtype=bool)
        hp = pts2d[hull.vertices]
        for i in range(len(hp)):
            a, b = hp[i], hp[(i + 1) % len(hp)]
            cross = (b[0] - a[0]) * (cys - a[1]) - (b[1] - a[1]) * (cxs - a[0])
            inside &= cross >= 0
        y_lo, y_hi = hp[:, 1].min(), hp[:, 1].max()
        y_mid, half = (y_lo + y_hi) / 2.0, (y_hi - y_lo) / 2.0
        inside &= np.abs(cys - y_mid) <= (1.0 - closure) * half
        out[inside] = (255.0, 255.0, 255.0)

        pc = pupil_center_px(center_px, radius_px, yaw, pitch)
        pupil = inside & ((cxs - pc[0]) ** 2 + (cys - pc[1]) ** 2
                          <= (0.3 * radius_px) ** 2)
        out[pupil] = (0.0, 0.0, 255.0)

    return RasterImage(w, h, out, "raw")


def render_conditioning(basis: FaceBasis, params: FaceParameters,
                        cam: CameraIntrinsics) -> ConditioningFrame:
    """All three conditioning renderings for one parameter set."""
    return ConditioningFrame(
        color=rasterize_color(basis, params, cam),
        correspondence=rasterize_correspondence(basis, params, cam),
        gaze=rasterize_gaze(basis, params, cam),
    )
