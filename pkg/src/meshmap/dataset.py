"""Posed RGB-D sequence ingestion (TUM-style layout) and mesh export.

A sequence directory holds ``rgb.txt`` and ``depth.txt`` indexes
(``timestamp filename`` lines, ``#`` comments), a quaternion
``groundtruth.txt`` trajectory, 8-bit color images and 16-bit depth PNGs.
Color and depth are associated by nearest timestamp, poses interpolated
between bracketing trajectory samples, and frames decoded lazily so memory
stays independent of sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from PIL import Image
from scipy.spatial.transform import Rotation, Slerp

from .config import PipelineConfig
from .evaluation import Trajectory
from .geometry import Pose
from .meshing import Frame

_PLY_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"),
                       ("red", "u1"), ("green", "u1"), ("blue", "u1")])
_FACE_DTYPE = np.dtype([("n", "u1"), ("v", "<i4", (3,))])


def read_color(path) -> np.ndarray:
    """8-bit color PNG to (H, W, 3) float64 in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def write_color(path, rgb: np.ndarray):
    """[0, 1] float image to an 8-bit RGB PNG."""
    arr = np.clip(np.round(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path)


def read_depth(path, depth_scale: float) -> np.ndarray:
    """16-bit depth PNG to float64 meters; raw 0 stays 0 (no measurement)."""
    with Image.open(path) as img:
        arr = np.asarray(img, dtype=np.float64)
    return arr * depth_scale


def write_depth(path, depth_m: np.ndarray, depth_scale: float):
    """Metric depth to a 16-bit PNG of raw = depth / depth_scale."""
    raw = np.round(np.asarray(depth_m, dtype=np.float64) / depth_scale)
    raw = np.clip(raw, 0, 65535).astype(np.uint16)
    Image.fromarray(raw).save(path)


def _read_index(path: Path) -> list[tuple[float, str]]:
    entries = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise ValueError(f"malformed index line in {path}: {line!r}")
        entries.append((float(parts[0]), parts[1]))
    entries.sort(key=lambda e: e[0])
    return entries


def load_trajectory(path) -> Trajectory:
    """TUM trajectory file: ``timestamp tx ty tz qx qy qz qw`` per line."""
    data = np.loadtxt(path, comments="#", ndmin=2, dtype=np.float64)
    if data.size == 0:
        raise ValueError(f"empty trajectory file: {path}")
    if data.shape[1] < 8:
        raise ValueError(f"expected 8 columns in trajectory file: {path}")
    order = np.argsort(data[:, 0])
    data = data[order]
    rots = Rotation.from_quat(data[:, 4:8])
    poses = [Pose(r.as_matrix(), t) for r, t in zip(rots, data[:, 1:4])]
    return Trajectory(data[:, 0], poses)


def _greedy_pairs(ts_a: np.ndarray, ts_b: np.ndarray, max_dt: float):
    """Nearest-timestamp greedy matching, each side used at most once."""
    dt = np.abs(ts_a[:, None] - ts_b[None, :])
    ai, bi = np.nonzero(dt <= max_dt)
    order = np.lexsort((bi, ai, dt[ai, bi]))
    used_a = np.zeros(ts_a.shape[0], dtype=bool)
    used_b = np.zeros(ts_b.shape[0], dtype=bool)
    pairs = []
    for k in order:
        a, b = ai[k], bi[k]
        if not used_a[a] and not used_b[b]:
            used_a[a] = True
            used_b[b] = True
            pairs.append((a, b))
    pairs.sort()
    return pairs


@dataclass
class SequenceManifest:
    """Resolved view of a sequence directory: associated (timestamp, color,
    depth) entries with interpolable poses, plus the camera and depth scale
    used to decode frames."""

    root: Path
    entries: list[tuple[float, str, str]]
    depth_scale: float
    trajectory_path: Path
    camera: object
    skipped: int = 0
    _slerp: Slerp | None = None
    _traj_ts: np.ndarray | None = None
    _traj_pos: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def pose_at(self, t: float) -> Pose:
        ts = self._traj_ts
        alpha = np.interp(t, ts, np.arange(ts.shape[0]))
        i0 = int(np.floor(alpha))
        i1 = min(i0 + 1, ts.shape[0] - 1)
        w = alpha - i0
        trans = (1.0 - w) * self._traj_pos[i0] + w * self._traj_pos[i1]
        rot = self._slerp(np.clip(t, ts[0], ts[-1])).as_matrix()
        return Pose(rot, trans)

    def frames(self, color_dir=None, max_frames: int | None = None,
               enhance: Callable[[np.ndarray], np.ndarray] | None = None
               ) -> Iterator[Frame]:
        """Decode frames lazily in timestamp order.

        color_dir substitutes color images by identical filename (the
        external-enhancement injection point); ``enhance`` post-processes
        each decoded color image.
        """
        for index, (t, color_rel, depth_rel) in enumerate(self.entries):
            if max_frames is not None and index >= max_frames:
                return
            color_path = self.root / color_rel
            if color_dir is not None:
                color_path = Path(color_dir) / Path(color_rel).name
            color = read_color(color_path)
            if enhance is not None:
                color = enhance(color)
            depth = read_depth(self.root / depth_rel, self.depth_scale)
            yield Frame(timestamp=t, color=color, depth=depth,
                        pose=self.pose_at(t), index=index)


def load_sequence(root, config: PipelineConfig) -> SequenceManifest:
    """Resolve a sequence directory into an associated, pose-interpolable
    manifest.  Missing files raise by name; frames without a depth match or
    outside the trajectory time range are skipped and counted."""
    root = Path(root)
    for name in ("rgb.txt", "depth.txt", "groundtruth.txt"):
        if not (root / name).exists():
            raise FileNotFoundError(f"missing {name} in {root}")
    rgb = _read_index(root / "rgb.txt")
    depth = _read_index(root / "depth.txt")
    if not rgb or not depth:
        raise ValueError(f"empty rgb/depth index in {root}")
    traj = load_trajectory(root / "groundtruth.txt")

    ts_rgb = np.array([t for t, _ in rgb])
    ts_depth = np.array([t for t, _ in depth])
    pairs = _greedy_pairs(ts_rgb, ts_depth, config.max_dt)
    skipped = len(rgb) - len(pairs)

    t_lo, t_hi = traj.timestamps[0], traj.timestamps[-1]
    entries = []
    last_t = None
    for a, b in pairs:
        t = float(ts_rgb[a])
        if not (t_lo <= t <= t_hi):
            skipped += 1
            continue
        if last_t is not None and t <= last_t:
            skipped += 1
            continue
        entries.append((t, rgb[a][1], depth[b][1]))
        last_t = t
    for t, color_rel, depth_rel in entries:
        for rel in (color_rel, depth_rel):
            if not (root / rel).exists():
                raise FileNotFoundError(f"missing image file: {root / rel}")

    manifest = SequenceManifest(root=root, entries=entries,
                                depth_scale=config.depth_scale,
                                trajectory_path=root / "groundtruth.txt",
                                camera=config.camera, skipped=skipped)
    manifest._traj_ts = traj.timestamps
    manifest._traj_pos = traj.positions
    manifest._slerp = Slerp(traj.timestamps,
                            Rotation.from_matrix(
                                np.array([p.rotation for p in traj.poses])))
    return manifest


def export_mesh(mesh, path, fmt: str | None = None):
    """Write a vertex-colored triangle mesh as binary PLY or text OBJ.

    ``mesh`` needs positions (n, 3), colors (n, 3) uint8 and triangles
    (m, 3); the format defaults to the file extension.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower() or "ply"
    fmt = fmt.lower()
    positions = np.asarray(mesh.positions, dtype=np.float64).reshape(-1, 3)
    colors = np.asarray(mesh.colors, dtype=np.uint8).reshape(-1, 3)
    triangles = np.asarray(mesh.triangles, dtype=np.int32).reshape(-1, 3)
    if fmt == "ply":
        _write_ply(path, positions, colors, triangles)
    elif fmt == "obj":
        _write_obj(path, positions, colors, triangles)
    else:
        raise ValueError(f"unsupported mesh format: {fmt}")


def _write_ply(path: Path, positions, colors, triangles):
    n, m = positions.shape[0], triangles.shape[0]
    header = ("ply\n"
              "format binary_little_endian 1.0\n"
              f"element vertex {n}\n"
              "property float x\n"
              "property float y\n"
              "property float z\n"
              "property uchar red\n"
              "property uchar green\n"
              "property uchar blue\n"
              f"element face {m}\n"
              "property list uchar int vertex_indices\n"
              "end_header\n")
    verts = np.empty(n, dtype=_PLY_DTYPE)
    verts["x"] = positions[:, 0].astype("<f4")
    verts["y"] = positions[:, 1].astype("<f4")
    verts["z"] = positions[:, 2].astype("<f4")
    verts["red"] = colors[:, 0]
    verts["green"] = colors[:, 1]
    verts["blue"] = colors[:, 2]
    faces = np.empty(m, dtype=_FACE_DTYPE)
    faces["n"] = 3
    faces["v"] = triangles.astype("<i4")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(verts.tobytes())
        fh.write(faces.tobytes())


def _write_obj(path: Path, positions, colors, triangles):
    lines = []
    col = colors.astype(np.float64) / 255.0
    for p, c in zip(positions, col):
        lines.append("v %.9g %.9g %.9g %.6f %.6f %.6f"
                     % (p[0], p[1], p[2], c[0], c[1], c[2]))
    for t in triangles:
        lines.append("f %d %d %d" % (t[0] + 1, t[1] + 1, t[2] + 1))
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class LoadedMesh:
    positions: np.ndarray
    colors: np.ndarray
    triangles: np.ndarray

    @property
    def vertex_count(self) -> int:
        return self.positions.shape[0]

    @property
    def triangle_count(self) -> int:
        return self.triangles.shape[0]


def import_ply(path) -> LoadedMesh:
    """Read back a PLY written by export_mesh (same property layout)."""
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.find(b"end_header\n")
    if not data.startswith(b"ply") or end < 0:
        raise ValueError(f"not a PLY file: {path}")
    header = data[:end].decode("ascii").splitlines()
    n = m = None
    for line in header:
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n = int(parts[2])
        elif parts[:2] == ["element", "face"]:
            m = int(parts[2])
        elif parts[:2] == ["format", "ascii"]:
            raise ValueError("only binary_little_endian PLY is supported")
    if n is None or m is None:
        raise ValueError(f"malformed PLY header: {path}")
    body = data[end + len(b"end_header\n"):]
    verts = np.frombuffer(body, dtype=_PLY_DTYPE, count=n)
    faces = np.frombuffer(body[n * _PLY_DTYPE.itemsize:], dtype=_FACE_DTYPE,
                          count=m)
    positions = np.stack([verts["x"], verts["y"], verts["z"]],
                         axis=-1).astype(np.float64)
    colors = np.stack([verts["red"], verts["green"], verts["blue"]], axis=-1)
    return LoadedMesh(positions, colors, faces["v"].astype(np.int32))
