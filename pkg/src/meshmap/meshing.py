"""Per-frame mesh construction.

A frame's features are triangulated in the image plane, over-long triangles
are discarded there, surviving vertices are lifted to 3D through the depth
image, and two more per-triangle gates remove depth-discontinuity spans
(max 3D edge length) and grazing triangles (view ray nearly parallel to the
surface).  Vertex colors are sampled at the source pixel and never alter
geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .delaunay import Triangulation2D, triangulate
from .features import SamplingParams, detect_features, rgb_to_gray
from .geometry import CameraModel, Pose, unproject

# triangles flatter than this cross-product norm (m^2) count as degenerate
_DEGENERATE_CROSS = 1e-12


@dataclass(frozen=True)
class RejectionThresholds:
    """Outlier gates: max 2D side (px), max 3D side (m), and the minimum
    |view . normal| cosine below which a triangle counts as grazing."""

    l_p: float = 80.0
    l_v: float = 0.5
    d: float = 0.1

    def __post_init__(self):
        if self.l_p <= 0:
            raise ValueError("l_p must be positive")
        if self.l_v <= 0:
            raise ValueError("l_v must be positive")
        if not (0.0 <= self.d < 1.0):
            raise ValueError("d must be in [0, 1)")


@dataclass(frozen=True)
class Frame:
    """One posed RGB-D input: color in [0, 1], metric depth (0 = invalid),
    world-from-camera pose."""

    timestamp: float
    color: np.ndarray  # (H, W, 3) float64
    depth: np.ndarray  # (H, W) float64, meters
    pose: Pose
    index: int = 0


@dataclass(frozen=True)
class FrameMesh:
    """World-frame vertices with colors plus CCW triangles from one frame."""

    positions: np.ndarray  # (k, 3) float64, world frame
    colors: np.ndarray  # (k, 3) uint8
    triangles: np.ndarray  # (m, 3) int32
    source_frame: int = 0
    feature_count: int = 0
    diagnostic: str | None = None

    @property
    def vertex_count(self) -> int:
        return self.positions.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]


def empty_frame_mesh(frame_id: int = 0, feature_count: int = 0,
                     diagnostic: str | None = None) -> FrameMesh:
    return FrameMesh(np.empty((0, 3)), np.empty((0, 3), np.uint8),
                     np.empty((0, 3), np.int32), frame_id, feature_count,
                     diagnostic)


def max_side_2d(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return np.maximum(np.linalg.norm(b - a, axis=-1),
                      np.maximum(np.linalg.norm(c - b, axis=-1),
                                 np.linalg.norm(a - c, axis=-1)))


def reject_2d(tri: Triangulation2D, l_p: float) -> Triangulation2D:
    """Drop triangles whose longest image-plane side exceeds l_p pixels.
    Vertices are kept untouched (orphans allowed)."""
    if tri.triangle_count == 0:
        return tri
    keep = max_side_2d(tri.vertices, tri.triangles) <= l_p
    return Triangulation2D(tri.vertices, tri.triangles[keep])


def sample_depth_bilinear(depth: np.ndarray, pixels: np.ndarray):
    """Bilinear depth at sub-pixel positions.

    A sample is valid only when all four contributing pixels are inside the
    image and hold a positive finite measurement; this avoids inventing
    depth across holes.  Returns (values, valid).
    """
    d = np.asarray(depth, dtype=np.float64)
    px = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    h, w = d.shape
    u = px[:, 0]
    v = px[:, 1]
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    inside = (u0 >= 0) & (u0 + 1 <= w - 1) & (v0 >= 0) & (v0 + 1 <= h - 1)
    u0c = np.clip(u0, 0, w - 2)
    v0c = np.clip(v0, 0, h - 2)
    d00 = d[v0c, u0c]
    d01 = d[v0c, u0c + 1]
    d10 = d[v0c + 1, u0c]
    d11 = d[v0c + 1, u0c + 1]
    stacked = np.stack([d00, d01, d10, d11])
    valid = inside & np.all(np.isfinite(stacked) & (stacked > 0), axis=0)
    fu = u - u0c
    fv = v - v0c
    value = ((1 - fv) * ((1 - fu) * d00 + fu * d01)
             + fv * ((1 - fu) * d10 + fu * d11))
    return np.where(valid, value, 0.0), valid


def lift_vertices(tri: Triangulation2D, depth: np.ndarray, cam: CameraModel,
                  pose: Pose):
    """Lift triangulation vertices to world-frame 3D through the depth image.

    Returns (positions (n, 3), valid (n,)); positions of invalid vertices
    are zero-filled and must not be used.
    """
    d = np.asarray(depth, dtype=np.float64)
    if d.shape != (cam.height, cam.width):
        raise ValueError("depth image does not match camera dimensions")
    values, valid = sample_depth_bilinear(d, tri.vertices)
    positions = np.zeros((tri.vertex_count, 3))
    if np.any(valid):
        cam_pts = unproject(tri.vertices[valid], values[valid], cam)
        positions[valid] = pose.transform(cam_pts)
    return positions, valid


def max_side_3d(triangles: np.ndarray, positions: np.ndarray) -> np.ndarray:
    a = positions[triangles[:, 0]]
    b = positions[triangles[:, 1]]
    c = positions[triangles[:, 2]]
    return np.maximum(np.linalg.norm(b - a, axis=-1),
                      np.maximum(np.linalg.norm(c - b, axis=-1),
                                 np.linalg.norm(a - c, axis=-1)))


def reject_3d_edges(triangles: np.ndarray, positions: np.ndarray,
                    l_v: float) -> np.ndarray:
    """Drop triangles whose longest 3D side exceeds l_v meters (these span
    depth discontinuities rather than surfaces)."""
    t = np.asarray(triangles, dtype=np.int32).reshape(-1, 3)
    if t.shape[0] == 0:
        return t
    return t[max_side_3d(t, positions) <= l_v]


def grazing_cosines(triangles: np.ndarray, positions: np.ndarray,
                    camera_center: np.ndarray):
    """|view . normal| per triangle with unit view ray from the camera
    center to the centroid and unit CCW normal.  Degenerate triangles get
    cosine -1 so any non-negative gate removes them."""
    t = np.asarray(triangles, dtype=np.int32).reshape(-1, 3)
    a = positions[t[:, 0]]
    b = positions[t[:, 1]]
    c = positions[t[:, 2]]
    n = np.cross(b - a, c - a)
    n_norm = np.linalg.norm(n, axis=-1)
    centroid = (a + b + c) / 3.0
    view = centroid - np.asarray(camera_center, dtype=np.float64)
    v_norm = np.linalg.norm(view, axis=-1)
    ok = (n_norm > _DEGENERATE_CROSS) & (v_norm > _DEGENERATE_CROSS)
    cosine = np.full(t.shape[0], -1.0)
    if np.any(ok):
        dots = np.einsum("ij,ij->i", n[ok], view[ok])
        cosine[ok] = np.abs(dots) / (n_norm[ok] * v_norm[ok])
    return cosine


def reject_3d_grazing(triangles: np.ndarray, positions: np.ndarray,
                      camera_center: np.ndarray, d: float) -> np.ndarray:
    """Drop triangles seen nearly edge-on: |view . normal| < d.  Zero-area
    triangles are removed unconditionally."""
    t = np.asarray(triangles, dtype=np.int32).reshape(-1, 3)
    if t.shape[0] == 0:
        return t
    return t[grazing_cosines(t, positions, camera_center) >= d]


def sample_colors(color: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """Nearest-pixel RGB at each (u, v), as uint8."""
    img = np.asarray(color, dtype=np.float64)
    px = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    h, w = img.shape[:2]
    u = np.clip(np.round(px[:, 0]).astype(np.int64), 0, w - 1)
    v = np.clip(np.round(px[:, 1]).astype(np.int64), 0, h - 1)
    return np.clip(np.round(img[v, u] * 255.0), 0, 255).astype(np.uint8)


def build_frame_mesh(frame: Frame, cam: CameraModel,
                     sampling: SamplingParams,
                     thresholds: RejectionThresholds) -> FrameMesh:
    """Full single-frame pipeline: detect, triangulate, reject in 2D, lift,
    reject in 3D, attach colors.

    Degenerate inputs (too few or collinear features) yield an empty mesh
    with a diagnostic instead of raising.
    """
    gray = rgb_to_gray(frame.color)
    feats = detect_features(gray, sampling)
    n_feats = feats.shape[0]
    if n_feats < 3:
        return empty_frame_mesh(frame.index, n_feats, "insufficient points")
    try:
        tri = triangulate(feats)
    except ValueError as err:
        return empty_frame_mesh(frame.index, n_feats, str(err))

    tri = reject_2d(tri, thresholds.l_p)
    positions, valid = lift_vertices(tri, frame.depth, cam, frame.pose)

    # drop triangles touching an invalid-depth vertex, then compact vertices
    tris = tri.triangles[np.all(valid[tri.triangles], axis=1)]
    new_index = np.cumsum(valid) - 1
    positions = positions[valid]
    pixels = tri.vertices[valid]
    tris = new_index[tris].astype(np.int32) if tris.size else tris

    tris = reject_3d_edges(tris, positions, thresholds.l_v)
    tris = reject_3d_grazing(tris, positions, frame.pose.translation,
                             thresholds.d)
    colors = sample_colors(frame.color, pixels)
    return FrameMesh(positions, colors, tris, frame.index, n_feats, None)
