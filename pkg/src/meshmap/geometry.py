"""Camera model, rigid poses, and the pinhole projection maps.

Conventions used throughout the package:

* poses are world-from-camera: ``transform`` maps camera-frame points into
  the world frame,
* pixel coordinates are (u, v) with u along image columns and v along rows,
* depth value 0 in a depth image means "no measurement" and must be skipped
  by every consumer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Orthonormality drift allowed when constructing a Pose from external data.
_ROTATION_ATOL = 1e-6


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus image dimensions (no distortion model)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")


@dataclass(frozen=True)
class Pose:
    """Rigid world-from-camera transform: x_world = R @ x_cam + t."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(t))):
            raise ValueError("pose contains non-finite values")
        if np.max(np.abs(R.T @ R - np.eye(3))) > _ROTATION_ATOL:
            raise ValueError("rotation is not orthonormal")
        if np.linalg.det(R) < 0:
            raise ValueError("rotation must be proper (det +1)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.eye(3), np.zeros(3))

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def transform(self, points) -> np.ndarray:
        """Map camera-frame point(s) of shape (..., 3) into the world frame."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation

    def transform_inverse(self, points) -> np.ndarray:
        """Map world-frame point(s) of shape (..., 3) into the camera frame."""
        p = np.asarray(points, dtype=np.float64)
        return (p - self.translation) @ self.rotation


def project(point, cam: CameraModel) -> np.ndarray:
    """Project camera-frame point(s) (..., 3) to pixel coordinates (..., 2).

    Raises ValueError for any point at or behind the camera plane (z <= 0).
    """
    p = np.asarray(point, dtype=np.float64)
    z = p[..., 2]
    if np.any(~np.isfinite(z)) or np.any(z <= 0):
        raise ValueError("behind camera")
    u = cam.fx * p[..., 0] / z + cam.cx
    v = cam.fy * p[..., 1] / z + cam.cy
    return np.stack([u, v], axis=-1)


def unproject(pixel, depth, cam: CameraModel) -> np.ndarray:
    """Back-project pixel(s) (..., 2) at the given metric depth(s) to the
    camera frame.  Depth must be strictly positive and finite."""
    px = np.asarray(pixel, dtype=np.float64)
    d = np.asarray(depth, dtype=np.float64)
    if np.any(~np.isfinite(d)) or np.any(d <= 0):
        raise ValueError("invalid depth")
    x = (px[..., 0] - cam.cx) * d / cam.fx
    y = (px[..., 1] - cam.cy) * d / cam.fy
    return np.stack([x, y, np.broadcast_to(d, x.shape)], axis=-1)


def project_visible(points_cam, cam: CameraModel):
    """Project camera-frame points (n, 3) without raising.

    Returns (pixels (n, 2), visible (n,) bool); ``visible`` is True where the
    point is in front of the camera and its pixel lies inside the image grid.
    Pixels for non-visible points are undefined.
    """
    p = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    z = p[:, 2]
    in_front = np.isfinite(z) & (z > 0)
    safe_z = np.where(in_front, z, 1.0)
    u = cam.fx * p[:, 0] / safe_z + cam.cx
    v = cam.fy * p[:, 1] / safe_z + cam.cy
    visible = (in_front & (u >= 0.0) & (u <= cam.width - 1.0)
               & (v >= 0.0) & (v <= cam.height - 1.0))
    return np.stack([u, v], axis=-1), visible
