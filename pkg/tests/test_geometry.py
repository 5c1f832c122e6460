import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from meshmap import CameraModel, Pose, project, project_visible, unproject


CAM = CameraModel(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)


def random_pose(rng):
    return Pose(Rotation.from_rotvec(rng.normal(size=3)).as_matrix(),
                rng.normal(size=3))


class TestCameraModel:
    def test_invariants(self):
        with pytest.raises(ValueError):
            CameraModel(fx=-1, fy=500, cx=320, cy=240, width=640, height=480)
        with pytest.raises(ValueError):
            CameraModel(fx=500, fy=500, cx=700, cy=240, width=640, height=480)
        with pytest.raises(ValueError):
            CameraModel(fx=500, fy=500, cx=320, cy=0, width=640, height=480)


class TestProject:
    def test_optical_axis_hits_principal_point(self):
        assert np.allclose(project([0, 0, 2], CAM), [320.0, 240.0])

    def test_unit_offset(self):
        assert np.allclose(project([1, 0, 1], CAM), [820.0, 240.0])

    def test_behind_camera_errors(self):
        with pytest.raises(ValueError, match="behind camera"):
            project([0, 0, -1], CAM)
        with pytest.raises(ValueError, match="behind camera"):
            project([0, 0, 0], CAM)

    def test_round_trip_random(self):
        rng = np.random.default_rng(0)
        px = rng.uniform([0, 0], [640, 480], size=(200, 2))
        d = rng.uniform(0.1, 10.0, size=200)
        back = project(unproject(px, d, CAM), CAM)
        assert np.max(np.abs(back - px)) < 1e-9


class TestUnproject:
    def test_principal_point_on_axis(self):
        assert np.allclose(unproject([320, 240], 3.0, CAM), [0, 0, 3])

    def test_hand_inverted_example(self):
        assert np.allclose(unproject([820, 240], 1.0, CAM), [1, 0, 1])

    def test_invalid_depth_errors(self):
        for bad in (0.0, -1.0, np.nan):
            with pytest.raises(ValueError, match="invalid depth"):
                unproject([320, 240], bad, CAM)


class TestPose:
    def test_identity_transform(self):
        p = np.array([1.0, -2.0, 3.0])
        assert np.allclose(Pose.identity().transform(p), p)

    def test_pure_translation(self):
        pose = Pose(np.eye(3), [0, 0, 5])
        assert np.allclose(pose.transform([1, 1, 1]), [1, 1, 6])

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            pose = random_pose(rng)
            p = rng.normal(size=3)
            q = pose.inverse().transform(pose.transform(p))
            assert np.max(np.abs(q - p)) < 1e-9

    def test_group_laws(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a, b, c = (random_pose(rng) for _ in range(3))
            left = a.compose(b).compose(c)
            right = a.compose(b.compose(c))
            assert np.max(np.abs(left.rotation - right.rotation)) < 1e-9
            assert np.max(np.abs(left.translation - right.translation)) < 1e-9
            ident = a.compose(a.inverse())
            assert np.max(np.abs(ident.rotation - np.eye(3))) < 1e-9
            assert np.max(np.abs(ident.translation)) < 1e-9

    def test_transform_inverse_matches_inverse(self):
        rng = np.random.default_rng(3)
        pose = random_pose(rng)
        pts = rng.normal(size=(10, 3))
        assert np.allclose(pose.transform_inverse(pts),
                           pose.inverse().transform(pts))

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 2.0, np.zeros(3))
        with pytest.raises(ValueError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


class TestProjectVisible:
    def test_culls_behind_and_outside(self):
        pts = np.array([
            [0.0, 0.0, 2.0],    # center, visible
            [0.0, 0.0, -2.0],   # behind
            [10.0, 0.0, 1.0],   # far off image
        ])
        px, vis = project_visible(pts, CAM)
        assert vis.tolist() == [True, False, False]
        assert np.allclose(px[0], [320, 240])

    def test_matches_project_for_visible(self):
        rng = np.random.default_rng(4)
        pts = np.column_stack([rng.normal(size=50), rng.normal(size=50),
                               rng.uniform(0.5, 5.0, size=50)])
        px, vis = project_visible(pts, CAM)
        assert np.allclose(px[vis], project(pts[vis], CAM))
