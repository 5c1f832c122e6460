"""Trajectory and map evaluation: absolute trajectory error after rigid
alignment, map compactness statistics, and per-stage timing summaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .geometry import Pose


@dataclass(frozen=True)
class Trajectory:
    """Timestamped poses with strictly increasing timestamps."""

    timestamps: np.ndarray  # (n,) float64 seconds
    poses: list[Pose]

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        if len(self.poses) != ts.shape[0]:
            raise ValueError("timestamp/pose count mismatch")
        if ts.shape[0] > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "timestamps", ts)

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def positions(self) -> np.ndarray:
        return np.array([p.translation for p in self.poses]).reshape(-1, 3)


@dataclass(frozen=True)
class AteReport:
    mean: float
    median: float
    rmse: float
    pairs: int

    def format(self) -> str:
        return (f"ate mean_m={self.mean:.6f} median_m={self.median:.6f} "
                f"rmse_m={self.rmse:.6f} pairs={self.pairs}")

    def to_dict(self) -> dict:
        return {"mean_m": self.mean, "median_m": self.median,
                "rmse_m": self.rmse, "pairs": self.pairs}


def associate(est: Trajectory, gt: Trajectory, max_dt: float = 0.02):
    """Greedy nearest-timestamp pairing (smallest |dt| first, each pose used
    once, pairs beyond max_dt dropped).

    Returns (est_indices, gt_indices); raises when nothing associates.
    """
    if len(est) == 0 or len(gt) == 0:
        raise ValueError("no associations")
    dt = np.abs(est.timestamps[:, None] - gt.timestamps[None, :])
    ei, gi = np.nonzero(dt <= max_dt)
    if ei.size == 0:
        raise ValueError("no associations")
    order = np.lexsort((gi, ei, dt[ei, gi]))
    used_e = np.zeros(len(est), dtype=bool)
    used_g = np.zeros(len(gt), dtype=bool)
    pairs_e, pairs_g = [], []
    for k in order:
        e, g = ei[k], gi[k]
        if not used_e[e] and not used_g[g]:
            used_e[e] = True
            used_g[g] = True
            pairs_e.append(e)
            pairs_g.append(g)
    idx = np.argsort(np.asarray(pairs_e))
    return np.asarray(pairs_e)[idx], np.asarray(pairs_g)[idx]


def umeyama_align(est_points: np.ndarray, gt_points: np.ndarray):
    """Closed-form least-squares rigid transform (R, t) minimising
    sum ||R p_est + t - p_gt||^2, scale fixed at 1.

    Raises for fewer than 3 pairs or a collinear configuration.
    """
    p = np.asarray(est_points, dtype=np.float64).reshape(-1, 3)
    q = np.asarray(gt_points, dtype=np.float64).reshape(-1, 3)
    if p.shape != q.shape or p.shape[0] < 3:
        raise ValueError("alignment underdetermined")
    pc = p - p.mean(axis=0)
    qc = q - q.mean(axis=0)
    cov = qc.T @ pc / p.shape[0]
    u, s, vt = np.linalg.svd(cov)
    scale = max(np.linalg.norm(pc, axis=1).max(),
                np.linalg.norm(qc, axis=1).max(), 1e-300)
    if s[1] <= 1e-9 * scale * scale:
        raise ValueError("alignment underdetermined")
    sign = np.sign(np.linalg.det(u @ vt))
    d = np.diag([1.0, 1.0, sign if sign != 0 else 1.0])
    rot = u @ d @ vt
    t = q.mean(axis=0) - rot @ p.mean(axis=0)
    return rot, t


def ate(est: Trajectory, gt: Trajectory, max_dt: float = 0.02) -> AteReport:
    """Absolute trajectory error: associate, rigidly align, then report the
    mean/median/RMSE of the translational residuals."""
    ei, gi = associate(est, gt, max_dt)
    p = est.positions[ei]
    q = gt.positions[gi]
    rot, t = umeyama_align(p, q)
    err = np.linalg.norm(p @ rot.T + t - q, axis=1)
    return AteReport(mean=float(np.mean(err)), median=float(np.median(err)),
                     rmse=float(np.sqrt(np.mean(err * err))),
                     pairs=int(err.shape[0]))


@dataclass(frozen=True)
class MapStats:
    vertex_count: int
    triangle_count: int
    dense_point_count: int

    def format(self) -> str:
        return (f"map vertices={self.vertex_count} "
                f"triangles={self.triangle_count} "
                f"dense_points={self.dense_point_count}")


def map_stats(mesh_map) -> MapStats:
    """Counts plus the number of points an equivalent per-pixel point-cloud
    map would have stored (valid-depth pixels over all processed frames)."""
    return MapStats(vertex_count=mesh_map.vertex_count,
                    triangle_count=mesh_map.triangle_count,
                    dense_point_count=mesh_map.dense_point_count)


@dataclass(frozen=True)
class StageTiming:
    mean_ms: float
    p50_ms: float
    p95_ms: float


@dataclass(frozen=True)
class TimingReport:
    stages: dict[str, StageTiming]
    frames: int
    fps: float

    def format(self) -> str:
        lines = [
            f"stage={name} mean_ms={st.mean_ms:.3f} p50_ms={st.p50_ms:.3f} "
            f"p95_ms={st.p95_ms:.3f}"
            for name, st in self.stages.items()
        ]
        lines.append(f"overall frames={self.frames} fps={self.fps:.2f}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "frames": self.frames,
            "fps": self.fps,
            "stages": {
                name: {"mean_ms": st.mean_ms, "p50_ms": st.p50_ms,
                       "p95_ms": st.p95_ms}
                for name, st in self.stages.items()
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def timing_report(log: list[dict[str, float]]) -> TimingReport:
    """Summarise a per-frame log of stage durations (seconds).

    Each log entry maps stage name -> seconds; fps is frames divided by the
    total time across all stages.
    """
    if not log:
        raise ValueError("empty timing log")
    names: list[str] = []
    for entry in log:
        for name in entry:
            if name not in names:
                names.append(name)
    stages = {}
    total = 0.0
    for name in names:
        vals = np.array([entry[name] for entry in log if name in entry])
        ms = vals * 1000.0
        stages[name] = StageTiming(mean_ms=float(ms.mean()),
                                   p50_ms=float(np.percentile(ms, 50)),
                                   p95_ms=float(np.percentile(ms, 95)))
        total += float(vals.sum())
    fps = len(log) / total if total > 0 else float("inf")
    return TimingReport(stages=stages, frames=len(log), fps=fps)
