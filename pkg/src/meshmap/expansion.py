"""Sliding-window map expansion.

The global mesh map grows frame by frame: geometry from the last N frames
is projected into the current image, new points are sampled away from the
projected vertices, points over the existing mesh are kept only when they
are genuinely off the local surface plane, and the image-plane mesh is
re-triangulated over old and new vertices together.  The vertex store is
append-only, so triangle indices stay valid forever and a failed update
leaves the map untouched.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from numba import njit

from .delaunay import dedup_points, locate_batch, triangulate
from .features import SamplingParams, detect_features, rgb_to_gray
from .geometry import CameraModel, Pose, project_visible, unproject
from .meshing import (Frame, RejectionThresholds, build_frame_mesh,
                      max_side_2d, reject_3d_edges, reject_3d_grazing,
                      sample_colors, sample_depth_bilinear)

_PLANE_DEGENERATE = 1e-12


@dataclass(frozen=True)
class ExpansionParams:
    window_size: int = 25
    min_pixel_distance: float = 10.0
    d_min: float = 0.05

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.min_pixel_distance < 0:
            raise ValueError("min_pixel_distance must be >= 0")
        if self.d_min < 0:
            raise ValueError("d_min must be >= 0")


class SampleDecision(enum.Enum):
    DISCARD = "discard"
    KEEP_OUTSIDE = "keep_outside"
    KEEP_OFF_PLANE = "keep_off_plane"


@dataclass
class ExpansionStats:
    frame_id: int
    bootstrap: bool = False
    features_detected: int = 0
    kept_outside: int = 0
    kept_off_plane: int = 0
    discarded_on_plane: int = 0
    discarded_depth: int = 0
    vertices_added: int = 0
    triangles_added: int = 0
    diagnostic: str | None = None


class MeshMap:
    """Global vertex-colored triangle map with an append-only vertex store
    and a sliding window of recent frames eligible for projection."""

    def __init__(self):
        self.positions = np.empty((0, 3), dtype=np.float64)
        self.colors = np.empty((0, 3), dtype=np.uint8)
        self.frame_ids = np.empty(0, dtype=np.int64)
        self.triangles = np.empty((0, 3), dtype=np.int32)
        self.window: list[tuple[int, Pose]] = []
        self.dense_point_count = 0

    @property
    def vertex_count(self) -> int:
        return self.positions.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.vertex_count == 0

    def window_frame_ids(self) -> list[int]:
        return [fid for fid, _ in self.window]

    def copy(self) -> "MeshMap":
        m = MeshMap()
        m.positions = self.positions.copy()
        m.colors = self.colors.copy()
        m.frame_ids = self.frame_ids.copy()
        m.triangles = self.triangles.copy()
        m.window = list(self.window)
        m.dense_point_count = self.dense_point_count
        return m

    def _append(self, positions, colors, frame_id, triangles):
        if positions.shape[0]:
            self.positions = np.vstack([self.positions, positions])
            self.colors = np.vstack([self.colors, colors])
            self.frame_ids = np.concatenate(
                [self.frame_ids,
                 np.full(positions.shape[0], frame_id, dtype=np.int64)])
        if triangles.shape[0]:
            self.triangles = np.vstack([self.triangles,
                                        triangles.astype(np.int32)])

    def _advance_window(self, frame_id: int, pose: Pose, window_size: int):
        self.window.append((frame_id, pose))
        if len(self.window) > window_size:
            self.window = self.window[-window_size:]


@dataclass(frozen=True)
class ProjectedMesh:
    """Window geometry seen from the current camera: projected pixels, the
    map vertices they came from, and the triangles fully visible."""

    vertex_ids: np.ndarray  # (k,) int64 map vertex indices
    pixels: np.ndarray  # (k, 2) float64
    positions: np.ndarray  # (k, 3) float64 world-frame copies
    triangles: np.ndarray  # (t, 3) int32 into the arrays above

    @property
    def vertex_count(self) -> int:
        return self.vertex_ids.shape[0]

    @property
    def is_empty(self) -> bool:
        return self.vertex_count == 0


def empty_projection() -> ProjectedMesh:
    return ProjectedMesh(np.empty(0, np.int64), np.empty((0, 2)),
                         np.empty((0, 3)), np.empty((0, 3), np.int32))


def project_window(mesh_map: MeshMap, cam: CameraModel,
                   current_pose: Pose) -> ProjectedMesh:
    """Project map vertices originating in the window into the current
    image.  Vertices behind the camera or outside the image are culled;
    triangles survive only when all three corners are visible."""
    if mesh_map.is_empty or not mesh_map.window:
        return empty_projection()
    window_ids = np.array(mesh_map.window_frame_ids(), dtype=np.int64)
    in_window = np.isin(mesh_map.frame_ids, window_ids)
    candidate_ids = np.nonzero(in_window)[0]
    if candidate_ids.size == 0:
        return empty_projection()
    cam_pts = current_pose.transform_inverse(mesh_map.positions[candidate_ids])
    pixels, visible = project_visible(cam_pts, cam)
    vertex_ids = candidate_ids[visible]
    if vertex_ids.size == 0:
        return empty_projection()
    pixels = pixels[visible]

    local = np.full(mesh_map.vertex_count, -1, dtype=np.int64)
    local[vertex_ids] = np.arange(vertex_ids.size)
    tri_local = local[mesh_map.triangles]
    tris = tri_local[np.all(tri_local >= 0, axis=1)].astype(np.int32)
    return ProjectedMesh(vertex_ids, pixels,
                         mesh_map.positions[vertex_ids].copy(), tris)


def point_plane_distance(v_n, v1, v2, v3) -> float:
    """Signed distance from v_n to the plane through v1, v2, v3, measured
    along the unit normal of (v2-v1) x (v3-v1)."""
    v1 = np.asarray(v1, dtype=np.float64)
    n = np.cross(np.asarray(v2, dtype=np.float64) - v1,
                 np.asarray(v3, dtype=np.float64) - v1)
    norm = np.linalg.norm(n)
    if norm <= _PLANE_DEGENERATE:
        raise ValueError("degenerate plane")
    return float(np.dot(n / norm, np.asarray(v_n, dtype=np.float64) - v1))


def _plane_distances(points: np.ndarray, tri_vertices: np.ndarray) -> np.ndarray:
    """Signed plane distance for each (point, triangle-vertex-triple) pair;
    degenerate planes yield +inf so the off-plane gate keeps those samples."""
    v1 = tri_vertices[:, 0]
    n = np.cross(tri_vertices[:, 1] - v1, tri_vertices[:, 2] - v1)
    norm = np.linalg.norm(n, axis=-1)
    ok = norm > _PLANE_DEGENERATE
    out = np.full(points.shape[0], np.inf)
    if np.any(ok):
        d = np.einsum("ij,ij->i", n[ok], points[ok] - v1[ok]) / norm[ok]
        out[ok] = d
    return out


def classify_sample(pixel, depth: float, cam: CameraModel, current_pose: Pose,
                    projected: ProjectedMesh,
                    d_min: float) -> SampleDecision:
    """Classify one candidate sample against the projected window mesh.

    Outside the projected hull the sample is always kept; over an existing
    triangle it is kept only when its 3D point is more than d_min from that
    triangle's plane; invalid depth discards.
    """
    if not (np.isfinite(depth) and depth > 0):
        return SampleDecision.DISCARD
    px = np.asarray(pixel, dtype=np.float64).reshape(2)
    if projected.is_empty or projected.triangles.shape[0] == 0:
        return SampleDecision.KEEP_OUTSIDE
    hit = locate_batch(projected.pixels, projected.triangles,
                       px.reshape(1, 2))[0]
    if hit < 0:
        return SampleDecision.KEEP_OUTSIDE
    point = current_pose.transform(unproject(px, depth, cam))
    tri = projected.positions[projected.triangles[hit]]
    dist = _plane_distances(point.reshape(1, 3), tri.reshape(1, 3, 3))[0]
    if abs(dist) > d_min:
        return SampleDecision.KEEP_OFF_PLANE
    return SampleDecision.DISCARD


@njit(cache=True)
def _disk_mask(height, width, us, vs, radius):
    """Boolean eligibility mask: False within radius of any given pixel."""
    mask = np.ones((height, width), np.bool_)
    r2 = radius * radius
    ri = int(radius) + 1
    for i in range(us.shape[0]):
        u = us[i]
        v = vs[i]
        r0 = max(0, int(v) - ri)
        r1 = min(height - 1, int(v) + ri)
        c0 = max(0, int(u) - ri)
        c1 = min(width - 1, int(u) + ri)
        for rr in range(r0, r1 + 1):
            dv = rr - v
            for cc in range(c0, c1 + 1):
                du = cc - u
                if du * du + dv * dv < r2:
                    mask[rr, cc] = False
    return mask


def sampling_exclusion_mask(projected: ProjectedMesh, cam: CameraModel,
                            radius: float) -> np.ndarray | None:
    """Detector mask excluding disks around projected vertices (None when
    nothing is projected or the radius is zero)."""
    if projected.is_empty or radius <= 0:
        return None
    return _disk_mask(cam.height, cam.width,
                      np.ascontiguousarray(projected.pixels[:, 0]),
                      np.ascontiguousarray(projected.pixels[:, 1]),
                      float(radius))


def _bootstrap(mesh_map: MeshMap, frame: Frame, cam: CameraModel,
               params: ExpansionParams, thresholds: RejectionThresholds,
               sampling: SamplingParams, valid_depth: int) -> ExpansionStats:
    fm = build_frame_mesh(frame, cam, sampling, thresholds)
    stats = ExpansionStats(frame_id=frame.index, bootstrap=True,
                           features_detected=fm.feature_count,
                           kept_outside=fm.vertex_count,
                           vertices_added=fm.vertex_count,
                           triangles_added=fm.triangle_count,
                           diagnostic=fm.diagnostic)
    mesh_map._append(fm.positions, fm.colors, frame.index, fm.triangles)
    mesh_map._advance_window(frame.index, frame.pose, params.window_size)
    mesh_map.dense_point_count += valid_depth
    return stats


def expand(mesh_map: MeshMap, frame: Frame, cam: CameraModel,
           params: ExpansionParams, thresholds: RejectionThresholds,
           sampling: SamplingParams) -> ExpansionStats:
    """Grow the map with one frame.

    All geometry is computed before the map is touched, so any error leaves
    the previous map intact.  An empty map makes this equivalent to
    build_frame_mesh.
    """
    depth = np.asarray(frame.depth, dtype=np.float64)
    if depth.shape != (cam.height, cam.width):
        raise ValueError("depth image does not match camera dimensions")
    valid_depth = int(np.count_nonzero(np.isfinite(depth) & (depth > 0)))

    if mesh_map.is_empty:
        return _bootstrap(mesh_map, frame, cam, params, thresholds, sampling,
                          valid_depth)

    projected = project_window(mesh_map, cam, frame.pose)
    mask = sampling_exclusion_mask(projected, cam, params.min_pixel_distance)
    gray = rgb_to_gray(frame.color)
    feats = detect_features(gray, sampling, mask)
    stats = ExpansionStats(frame_id=frame.index,
                           features_detected=feats.shape[0])

    kept_px = np.empty((0, 2))
    kept_world = np.empty((0, 3))
    if feats.shape[0]:
        depths, dvalid = sample_depth_bilinear(depth, feats)
        stats.discarded_depth = int(np.count_nonzero(~dvalid))

        candidates = feats[dvalid]
        cand_depths = depths[dvalid]
        if candidates.shape[0]:
            if projected.triangles.shape[0]:
                hits = locate_batch(projected.pixels, projected.triangles,
                                    candidates)
            else:
                hits = np.full(candidates.shape[0], -1, dtype=np.int64)
            world = frame.pose.transform(
                unproject(candidates, cand_depths, cam))
            keep = hits < 0
            stats.kept_outside = int(np.count_nonzero(keep))
            inside = ~keep
            if np.any(inside):
                tri_pts = projected.positions[
                    projected.triangles[hits[inside]]]
                dist = _plane_distances(world[inside], tri_pts)
                off_plane = np.abs(dist) > params.d_min
                stats.kept_off_plane = int(np.count_nonzero(off_plane))
                stats.discarded_on_plane = int(np.count_nonzero(~off_plane))
                keep[np.nonzero(inside)[0][off_plane]] = True
            kept_px = candidates[keep]
            kept_world = world[keep]

    new_triangles = np.empty((0, 3), np.int32)
    append_mask = np.ones(kept_px.shape[0], dtype=bool)
    if kept_px.shape[0]:
        combined = np.vstack([projected.pixels, kept_px])
        unique, index_map = dedup_points(combined)
        n_proj = projected.vertex_count
        # representative combined slot per unique point (first occurrence)
        _, rep_slot = np.unique(index_map, return_index=True)
        # samples merged into an earlier point are not new vertices
        append_mask = rep_slot[index_map[n_proj:]] == np.arange(
            n_proj, combined.shape[0])

        tri2 = None
        if unique.shape[0] >= 3:
            try:
                tri2 = triangulate(unique)
            except ValueError:
                tri2 = None
        if tri2 is not None and tri2.triangle_count:
            slots = rep_slot[tri2.triangles]
            fresh = np.any(slots >= n_proj, axis=1)
            tris = tri2.triangles[fresh]
            slots = slots[fresh]
            if tris.shape[0]:
                # image-plane edge-length gate
                keep2d = max_side_2d(unique, tris) <= thresholds.l_p
                tris, slots = tris[keep2d], slots[keep2d]
            if tris.shape[0]:
                # global ids: projected slots map to existing vertices, new
                # samples to their future rows in the vertex store
                new_rows = np.cumsum(append_mask) - 1
                global_of_slot = np.empty(combined.shape[0], dtype=np.int64)
                global_of_slot[:n_proj] = projected.vertex_ids
                global_of_slot[n_proj:] = mesh_map.vertex_count + new_rows
                all_positions = np.vstack([mesh_map.positions,
                                           kept_world[append_mask]])
                gtris = global_of_slot[slots]
                gtris = reject_3d_edges(gtris, all_positions, thresholds.l_v)
                gtris = reject_3d_grazing(gtris, all_positions,
                                          frame.pose.translation, thresholds.d)
                new_triangles = gtris.astype(np.int32)

    new_px = kept_px[append_mask]
    new_world = kept_world[append_mask]
    new_colors = sample_colors(frame.color, new_px)

    mesh_map._append(new_world, new_colors, frame.index, new_triangles)
    mesh_map._advance_window(frame.index, frame.pose, params.window_size)
    mesh_map.dense_point_count += valid_depth
    stats.vertices_added = new_world.shape[0]
    stats.triangles_added = new_triangles.shape[0]
    return stats
