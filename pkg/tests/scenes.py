"""Synthetic scene generation shared by the test suite.

Scenes are world-anchored procedural textures on planes, rendered through
the pinhole model, so multiple views of the same scene are geometrically
and photometrically consistent.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.spatial.transform import Rotation

from meshmap import CameraModel, Frame, Pose
from meshmap.config import dump_config, PipelineConfig
from meshmap.dataset import write_color, write_depth


def make_camera(width=320, height=240, f=300.0) -> CameraModel:
    return CameraModel(fx=f, fy=f, cx=width / 2 - 0.5, cy=height / 2 - 0.5,
                       width=width, height=height)


def ray_grid(cam: CameraModel):
    """Camera-frame ray directions (H, W, 3) with unit z."""
    u, v = np.meshgrid(np.arange(cam.width, dtype=np.float64),
                       np.arange(cam.height, dtype=np.float64))
    return np.stack([(u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy,
                     np.ones_like(u)], axis=-1)


def plane_intersections(cam: CameraModel, pose: Pose, plane_z: float):
    """Intersect every pixel ray with the world plane z = plane_z.

    Returns (depth (H, W) camera-frame z, world points (H, W, 3));
    depth <= 0 marks rays that never hit the plane.
    """
    rays = ray_grid(cam)
    dirs_world = rays @ pose.rotation.T
    dz = dirs_world[..., 2]
    lam = np.where(np.abs(dz) > 1e-12,
                   (plane_z - pose.translation[2]) / np.where(
                       np.abs(dz) > 1e-12, dz, 1.0), -1.0)
    world = lam[..., None] * dirs_world + pose.translation
    return lam, world


def checker_texture(wx, wy, period=0.25, lo=0.25, hi=0.75):
    """World-anchored checkerboard in [lo, hi]."""
    cells = np.floor(wx / period) + np.floor(wy / period)
    return np.where(cells % 2 == 0, lo, hi)


def render_plane_frame(cam: CameraModel, pose: Pose, plane_z: float = 2.0,
                       period: float = 0.25, timestamp: float = 0.0,
                       index: int = 0) -> Frame:
    """Fronto-textured plane at world z = plane_z seen from the given pose."""
    depth, world = plane_intersections(cam, pose, plane_z)
    tex = checker_texture(world[..., 0], world[..., 1], period)
    rgb = np.stack([tex, tex, tex], axis=-1)
    depth = np.where(depth > 0, depth, 0.0)
    return Frame(timestamp, rgb, depth, pose, index)


def render_two_plane_frame(cam: CameraModel, pose: Pose, z_near=2.0,
                           z_far=3.0, split_x=0.0, period=0.25,
                           timestamp=0.0, index=0) -> Frame:
    """Two fronto-parallel planes split at world x = split_x (near plane on
    the left) producing a clean depth discontinuity."""
    d_near, w_near = plane_intersections(cam, pose, z_near)
    d_far, w_far = plane_intersections(cam, pose, z_far)
    use_near = w_near[..., 0] < split_x
    depth = np.where(use_near, d_near, d_far)
    world = np.where(use_near[..., None], w_near, w_far)
    tex = checker_texture(world[..., 0], world[..., 1], period)
    rgb = np.stack([tex, tex, tex], axis=-1)
    depth = np.where(depth > 0, depth, 0.0)
    return Frame(timestamp, rgb, depth, pose, index)


def sweep_poses(n_frames: int, step=0.02, axis=0):
    """Pure translations along one axis (world-from-camera)."""
    poses = []
    for i in range(n_frames):
        t = np.zeros(3)
        t[axis] = i * step
        poses.append(Pose(np.eye(3), t))
    return poses


def coral_frame(rng: np.random.Generator, cam: CameraModel,
                depth_m: float = 2.2):
    """Scene whose texture detectability hinges on channel balance.

    A neutral mid-gray plane carries two kinds of checker patches: a few
    strong achromatic anchors that dominate the corner-score maximum, and
    many red-vs-green opponent patches whose luma contrast nearly cancels
    once red has been attenuated by the water column.  Enhancement restores
    the channel balance and with it the opponent texture.

    Returns (rgb, depth) for a clean (pre-degradation) frame.
    """
    h, w = cam.height, cam.width
    rgb = np.full((h, w, 3), 0.45)
    depth = np.full((h, w), depth_m)

    def paint_checker(cx, cy, size, cells, delta):
        half = size * cells // 2
        y0, y1 = max(0, cy - half), min(h, cy + half)
        x0, x1 = max(0, cx - half), min(w, cx + half)
        if y1 <= y0 or x1 <= x0:
            return
        yy, xx = np.meshgrid(np.arange(y0, y1), np.arange(x0, x1),
                             indexing="ij")
        sign = np.where(((xx // size) + (yy // size)) % 2 == 0, 1.0, -1.0)
        rgb[y0:y1, x0:x1] += sign[..., None] * np.asarray(delta)

    margin = 24
    # anchors: strong neutral corners that set the score-map maximum
    for _ in range(4):
        cx = int(rng.integers(margin, w - margin))
        cy = int(rng.integers(margin, h - margin))
        paint_checker(cx, cy, 8, 4, (0.40, 0.40, 0.40))
    # opponent texture: red up, green/blue slightly down
    for _ in range(40):
        cx = int(rng.integers(margin, w - margin))
        cy = int(rng.integers(margin, h - margin))
        paint_checker(cx, cy, 8, 2, (0.32, -0.045, -0.045))
    np.clip(rgb, 0.0, 1.0, out=rgb)
    return rgb, depth


def quantize_rgb(rgb: np.ndarray) -> np.ndarray:
    """Round-trip an image through 8-bit storage."""
    return np.round(np.clip(rgb, 0, 1) * 255.0) / 255.0


def pose_to_tum_line(t: float, pose: Pose) -> str:
    q = Rotation.from_matrix(pose.rotation).as_quat()
    tx, ty, tz = pose.translation
    return (f"{t:.6f} {tx:.9f} {ty:.9f} {tz:.9f} "
            f"{q[0]:.9f} {q[1]:.9f} {q[2]:.9f} {q[3]:.9f}")


def write_sequence(root, frames: list[Frame], cam: CameraModel,
                   depth_scale: float = 1.0 / 5000.0,
                   config: PipelineConfig | None = None) -> Path:
    """Write frames as a TUM-layout sequence plus a matching config.toml."""
    root = Path(root)
    (root / "rgb").mkdir(parents=True, exist_ok=True)
    (root / "depth").mkdir(parents=True, exist_ok=True)
    rgb_lines, depth_lines, gt_lines = [], [], []
    for frame in frames:
        name = f"{frame.timestamp:.6f}.png"
        write_color(root / "rgb" / name, frame.color)
        write_depth(root / "depth" / name, frame.depth, depth_scale)
        rgb_lines.append(f"{frame.timestamp:.6f} rgb/{name}")
        depth_lines.append(f"{frame.timestamp:.6f} depth/{name}")
        gt_lines.append(pose_to_tum_line(frame.timestamp, frame.pose))
    (root / "rgb.txt").write_text("# color images\n" + "\n".join(rgb_lines) + "\n")
    (root / "depth.txt").write_text("# depth images\n" + "\n".join(depth_lines) + "\n")
    (root / "groundtruth.txt").write_text("# trajectory\n" + "\n".join(gt_lines) + "\n")
    if config is None:
        config = PipelineConfig(camera=cam, depth_scale=depth_scale)
    (root / "config.toml").write_text(dump_config(config))
    return root
