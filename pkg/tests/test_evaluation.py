import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from meshmap import (MeshMap, Pose, Trajectory, associate, ate, map_stats,
                     timing_report, umeyama_align)


def make_trajectory(positions, t0=0.0, dt=0.1):
    positions = np.asarray(positions, dtype=np.float64)
    ts = t0 + dt * np.arange(len(positions))
    return Trajectory(ts, [Pose(np.eye(3), p) for p in positions])


def random_trajectory(rng, n=40):
    pos = np.cumsum(rng.normal(scale=0.1, size=(n, 3)), axis=0)
    return make_trajectory(pos)


def transform_trajectory(traj, rot, t):
    poses = [Pose(rot @ p.rotation, rot @ p.translation + t)
             for p in traj.poses]
    return Trajectory(traj.timestamps, poses)


class TestAssociate:
    def test_identical_timestamps_full_pairing(self):
        rng = np.random.default_rng(0)
        a = random_trajectory(rng)
        b = random_trajectory(rng)
        ei, gi = associate(a, b, 0.02)
        assert len(ei) == len(a)
        assert np.array_equal(ei, gi)

    def test_half_tolerance_offset_full_pairing(self):
        rng = np.random.default_rng(1)
        a = random_trajectory(rng)
        shifted = Trajectory(a.timestamps + 0.01, a.poses)
        ei, gi = associate(shifted, a, 0.02)
        assert len(ei) == len(a)

    def test_disjoint_ranges_no_associations(self):
        a = make_trajectory(np.zeros((5, 3)), t0=0.0)
        b = make_trajectory(np.zeros((5, 3)), t0=100.0)
        with pytest.raises(ValueError, match="no associations"):
            associate(a, b, 0.02)

    def test_each_pose_used_once(self):
        a = make_trajectory(np.zeros((10, 3)), dt=0.01)
        b = make_trajectory(np.zeros((3, 3)), dt=0.05)
        ei, gi = associate(a, b, 0.02)
        assert len(set(ei.tolist())) == len(ei)
        assert len(set(gi.tolist())) == len(gi)


class TestUmeyama:
    def test_identity_for_identical(self):
        rng = np.random.default_rng(2)
        p = rng.normal(size=(30, 3))
        rot, t = umeyama_align(p, p)
        assert np.max(np.abs(rot - np.eye(3))) < 1e-9
        assert np.max(np.abs(t)) < 1e-9

    def test_exact_recovery(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            p = rng.normal(size=(25, 3))
            rot0 = Rotation.from_rotvec(rng.normal(size=3)).as_matrix()
            t0 = rng.normal(size=3)
            q = p @ rot0.T + t0
            rot, t = umeyama_align(p, q)
            assert np.max(np.abs(rot - rot0)) < 1e-9
            assert np.max(np.abs(t - t0)) < 1e-9

    def test_noisy_beats_identity(self):
        rng = np.random.default_rng(4)
        p = rng.normal(size=(50, 3))
        rot0 = Rotation.from_rotvec([0.1, -0.2, 0.05]).as_matrix()
        q = p @ rot0.T + [0.3, 0, 0] + rng.normal(scale=0.01, size=(50, 3))
        rot, t = umeyama_align(p, q)
        aligned = np.linalg.norm(p @ rot.T + t - q, axis=1)
        identity = np.linalg.norm(p - q, axis=1)
        assert np.sqrt(np.mean(aligned**2)) <= np.sqrt(np.mean(identity**2))

    def test_monte_carlo_optimality(self):
        rng = np.random.default_rng(5)
        p = rng.normal(size=(20, 3))
        q = p @ Rotation.from_rotvec([0.2, 0.1, -0.3]).as_matrix().T + 1.0
        q += rng.normal(scale=0.05, size=(20, 3))
        rot, t = umeyama_align(p, q)
        best = np.sum((p @ rot.T + t - q) ** 2)
        for _ in range(1000):
            rr = Rotation.from_rotvec(rng.normal(scale=0.5, size=3)).as_matrix()
            tt = rng.normal(scale=0.5, size=3) + t
            cand = np.sum((p @ rr.T + tt - q) ** 2)
            assert best <= cand + 1e-12

    def test_no_reflection(self):
        rng = np.random.default_rng(6)
        # planar points invite a reflection; det must stay +1
        p = rng.normal(size=(20, 3))
        p[:, 2] = 0.0
        q = -p.copy()
        q[:, 2] = 0.0
        rot, _ = umeyama_align(p, q)
        assert np.isclose(np.linalg.det(rot), 1.0, atol=1e-9)

    def test_degenerate_raises(self):
        line = np.outer(np.arange(10.0), [1.0, 2.0, 3.0])
        with pytest.raises(ValueError, match="underdetermined"):
            umeyama_align(line, line + [0, 0, 1])
        with pytest.raises(ValueError, match="underdetermined"):
            umeyama_align(np.zeros((2, 3)), np.zeros((2, 3)))


class TestAte:
    def test_identical_trajectories_zero(self):
        rng = np.random.default_rng(7)
        traj = random_trajectory(rng)
        report = ate(traj, traj, 0.02)
        assert report.mean < 1e-12
        assert report.median < 1e-12
        assert report.rmse < 1e-12
        assert report.pairs == len(traj)

    def test_rigid_copy_zero(self):
        rng = np.random.default_rng(8)
        traj = random_trajectory(rng)
        rot = Rotation.from_rotvec([0.4, -0.1, 0.2]).as_matrix()
        moved = transform_trajectory(traj, rot, np.array([1.0, -2.0, 0.5]))
        report = ate(moved, traj, 0.02)
        assert report.rmse < 1e-9

    def test_alternating_offsets_rmse(self):
        # each cube corner appears twice with +/- 0.1 m z offsets, so the
        # cross-covariance of the perturbation vanishes and the optimal
        # alignment is the identity
        corners = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1)
                            for z in (-1, 1)], dtype=np.float64)
        gt_pos = np.repeat(corners, 2, axis=0)
        offsets = np.zeros_like(gt_pos)
        offsets[0::2, 2] = 0.1
        offsets[1::2, 2] = -0.1
        gt = make_trajectory(gt_pos)
        est = make_trajectory(gt_pos + offsets)
        report = ate(est, gt, 0.02)
        assert abs(report.rmse - 0.1) < 1e-9
        assert abs(report.mean - 0.1) < 1e-9
        # brute-force check: no small rigid perturbation does better
        rng = np.random.default_rng(9)
        p = est.positions
        q = gt.positions
        best = np.sum((p - q) ** 2)
        for _ in range(500):
            rr = Rotation.from_rotvec(rng.normal(scale=0.05, size=3)).as_matrix()
            tt = rng.normal(scale=0.05, size=3)
            assert best <= np.sum((p @ rr.T + tt - q) ** 2) + 1e-9

    def test_rigid_invariance_of_report(self):
        rng = np.random.default_rng(10)
        est = random_trajectory(rng)
        gt = transform_trajectory(est, np.eye(3), np.zeros(3))
        gt = Trajectory(gt.timestamps,
                        [Pose(p.rotation, p.translation + rng.normal(
                            scale=0.02, size=3)) for p in gt.poses])
        base = ate(est, gt, 0.02)
        rot = Rotation.from_rotvec([0.3, 0.2, -0.4]).as_matrix()
        moved = transform_trajectory(est, rot, np.array([5.0, 1.0, -2.0]))
        report = ate(moved, gt, 0.02)
        assert abs(report.rmse - base.rmse) < 1e-9
        assert abs(report.mean - base.mean) < 1e-9
        assert abs(report.median - base.median) < 1e-9

    def test_report_identities(self):
        rng = np.random.default_rng(11)
        est = random_trajectory(rng)
        gt = Trajectory(est.timestamps,
                        [Pose(p.rotation, p.translation + rng.normal(
                            scale=0.05, size=3)) for p in est.poses])
        report = ate(est, gt, 0.02)
        ei, gi = associate(est, gt, 0.02)
        rot, t = umeyama_align(est.positions[ei], gt.positions[gi])
        err = np.linalg.norm(est.positions[ei] @ rot.T + t
                             - gt.positions[gi], axis=1)
        assert report.median <= err.max()
        assert abs(report.rmse ** 2 - np.mean(err ** 2)) < 1e-12


class TestTrajectoryType:
    def test_strictly_increasing_enforced(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            Trajectory(np.array([0.0, 0.0]),
                       [Pose.identity(), Pose.identity()])


class TestMapStats:
    def test_empty_map(self):
        stats = map_stats(MeshMap())
        assert stats.vertex_count == 0
        assert stats.triangle_count == 0
        assert stats.dense_point_count == 0

    def test_single_triangle(self):
        m = MeshMap()
        m._append(np.eye(3), np.zeros((3, 3), np.uint8), 0,
                  np.array([[0, 1, 2]], np.int32))
        stats = map_stats(m)
        assert stats.vertex_count == 3
        assert stats.triangle_count == 1
        assert "vertices=3" in stats.format()


class TestTimingReport:
    def test_constant_durations(self):
        log = [{"expand": 0.010} for _ in range(50)]
        report = timing_report(log)
        st = report.stages["expand"]
        assert np.isclose(st.mean_ms, 10.0)
        assert np.isclose(st.p50_ms, 10.0)
        assert np.isclose(st.p95_ms, 10.0)
        assert np.isclose(report.fps, 100.0)

    def test_outlier_percentiles(self):
        log = [{"expand": 0.010} for _ in range(99)] + [{"expand": 0.100}]
        report = timing_report(log)
        st = report.stages["expand"]
        assert np.isclose(st.p95_ms, 10.0)
        assert np.isclose(st.mean_ms, 10.9)
        assert np.isclose(st.p50_ms, 10.0)

    def test_empty_log_raises(self):
        with pytest.raises(ValueError, match="empty timing log"):
            timing_report([])

    def test_format_machine_readable(self):
        report = timing_report([{"expand": 0.01, "decode": 0.002}])
        text = report.format()
        assert "stage=expand mean_ms=10.000" in text
        assert "stage=decode" in text
        json_dict = report.to_dict()
        assert json_dict["stages"]["expand"]["p95_ms"] == 10.0
