import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vidstereo.geometry import (CameraRig, Pose, apply_transform, apply_transform_point,
                                depth_from_disparity, disparity_from_depth, project, q_inverse,
                                q_matrix, relative_pose, rotation_about_axis, temporal_transform,
                                unproject)

RIG = CameraRig(f=100.0, cx=320.0, cy=240.0, b=0.1, width=640, height=480)


def rot_y(deg):
    a = np.deg2rad(deg)
    return np.array([[np.cos(a), 0, np.sin(a)], [0, 1, 0], [-np.sin(a), 0, np.cos(a)]])


def stereo_to_camera(rig, u, v, d):
    # Independent oracle: Z = f b / d, then pinhole back-projection.
    Z = rig.f * rig.b / d
    return np.array([(u - rig.cx) * Z / rig.f, (v - rig.cy) * Z / rig.f, Z])


def camera_to_stereo(rig, X):
    return np.array([rig.f * X[0] / X[2] + rig.cx, rig.f * X[1] / X[2] + rig.cy, rig.f * rig.b / X[2]])


rigs = st.builds(
    lambda f, fx, fy, b, w, h: CameraRig(f=f, cx=fx * w, cy=fy * h, b=b, width=w, height=h),
    st.floats(10, 2000), st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.01, 2.0),
    st.integers(16, 2048), st.integers(16, 2048),
)


def random_pose(rng, max_angle=np.pi, max_t=1.0):
    axis = rng.normal(size=3)
    return Pose(rotation_about_axis(axis, rng.uniform(-max_angle, max_angle)),
                rng.uniform(-max_t, max_t, size=3))


class TestRig:
    @pytest.mark.parametrize("kwargs", [
        dict(f=0, cx=1, cy=1, b=1, width=4, height=4),
        dict(f=1, cx=1, cy=1, b=-0.1, width=4, height=4),
        dict(f=1, cx=0, cy=1, b=1, width=4, height=4),
        dict(f=1, cx=1, cy=4, b=1, width=4, height=4),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            CameraRig(**kwargs)

    def test_scaled_keeps_pixel_centres(self):
        small = RIG.scaled(4)
        assert small.f == 25.0 and small.width == 160 and small.height == 120
        # image pixel 4u + 1.5 is the centre of feature pixel u
        assert small.cx == pytest.approx((RIG.cx - 1.5) / 4)


class TestQ:
    def test_rows(self):
        Q = q_matrix(RIG)
        np.testing.assert_array_equal(Q[2], [0, 0, 0, 100])
        np.testing.assert_array_equal(Q[3], [0, 0, 10, 0])
        np.testing.assert_array_equal(Q[0], [1, 0, 0, -320])
        np.testing.assert_array_equal(Q[1], [0, 1, 0, -240])

    def test_unit_rig_is_permutation_like(self):
        # A rig needs 0 < cx < width, so the principal point sits at 0.5 and
        # (u, v, d, 1) maps to (u - 0.5, v - 0.5, 1, d).
        Q = q_matrix(CameraRig(f=1.0, cx=0.5, cy=0.5, b=1.0, width=2, height=2))
        out = Q @ np.array([3.0, 4.0, 5.0, 1.0])
        np.testing.assert_allclose(out, [2.5, 3.5, 1.0, 5.0])

    def test_principal_point_at_one_metre(self):
        X = q_matrix(RIG) @ np.array([320.0, 240.0, 10.0, 1.0])
        np.testing.assert_allclose(X[:3] / X[3], [0, 0, 1.0])

    def test_inverse_maps_back(self):
        p = q_inverse(RIG) @ np.array([0.0, 0.0, 1.0, 1.0])
        np.testing.assert_allclose(p[:3] / p[3], [320, 240, 10])

    @settings(max_examples=200, deadline=None)
    @given(rigs)
    def test_closed_form_inverse(self, rig):
        np.testing.assert_allclose(q_inverse(rig) @ q_matrix(rig), np.eye(4), atol=1e-12)
        np.testing.assert_allclose(q_matrix(rig) @ q_inverse(rig), np.eye(4), atol=1e-12)

    def test_round_trip_against_oracle(self):
        rng = np.random.default_rng(0)
        rig = CameraRig(f=350.0, cx=200.0, cy=150.0, b=0.12, width=400, height=300)
        X = np.column_stack([rng.uniform(-2, 2, 1000), rng.uniform(-2, 2, 1000), rng.uniform(0.1, 100, 1000)])
        p = project(rig, X)
        for i in range(0, 1000, 97):
            np.testing.assert_allclose(p[i], camera_to_stereo(rig, X[i]), rtol=1e-12)
        np.testing.assert_allclose(unproject(rig, p), X, atol=1e-9)


class TestRelativePose:
    def test_same_pose_is_identity(self):
        P = random_pose(np.random.default_rng(1))
        rel = relative_pose(P, P)
        np.testing.assert_allclose(rel.matrix(), np.eye(4), atol=1e-12)

    def test_pure_translation(self):
        rel = relative_pose(Pose.identity(), Pose(np.eye(3), [0.1, -0.2, 0.3]))
        np.testing.assert_allclose(rel.rotation, np.eye(3))
        np.testing.assert_allclose(rel.translation, [0.1, -0.2, 0.3])

    def test_rotation_inverts(self):
        rel = relative_pose(Pose(rot_y(10), np.zeros(3)), Pose.identity())
        np.testing.assert_allclose(rel.rotation, rot_y(-10), atol=1e-12)

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a, b = random_pose(rng), random_pose(rng)
            expect = b.matrix() @ np.linalg.inv(a.matrix())
            np.testing.assert_allclose(relative_pose(a, b).matrix(), expect, atol=1e-12)

    def test_pose_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
        with pytest.raises(ValueError):
            Pose(np.eye(3) * 1.01, np.zeros(3))


class TestTemporalTransform:
    def test_identity(self):
        np.testing.assert_allclose(temporal_transform(RIG, Pose.identity()), np.eye(4), atol=1e-12)

    def test_forward_motion_doubles_disparity(self):
        T = temporal_transform(RIG, Pose(np.eye(3), [0, 0, -0.5]))
        np.testing.assert_allclose(apply_transform_point(T, 320, 240, 10), (320, 240, 20), atol=1e-9)

    def test_lateral_baseline_shift(self):
        T = temporal_transform(RIG, Pose(np.eye(3), [RIG.b, 0, 0]))
        np.testing.assert_allclose(apply_transform_point(T, 320, 240, 10), (330, 240, 10), atol=1e-9)

    @pytest.mark.parametrize("k", [-2, 1, 3])
    def test_lateral_k_baselines(self, k):
        rng = np.random.default_rng(k + 10)
        T = temporal_transform(RIG, Pose(np.eye(3), [k * RIG.b, 0, 0]))
        pts = np.column_stack([rng.uniform(0, 640, 500), rng.uniform(0, 480, 500), rng.uniform(0.5, 60, 500)])
        out, valid = apply_transform(T, pts)
        assert valid.all()
        np.testing.assert_allclose(out[:, 0], pts[:, 0] + k * pts[:, 2], atol=1e-9)
        np.testing.assert_allclose(out[:, 1:], pts[:, 1:], atol=1e-9)

    def test_half_turn_is_invalid(self):
        T = temporal_transform(RIG, Pose(rot_y(180), np.zeros(3)))
        assert apply_transform_point(T, 320, 240, 10) is None
        rng = np.random.default_rng(3)
        pts = np.column_stack([rng.uniform(0, 640, 100), rng.uniform(0, 480, 100), rng.uniform(0.5, 60, 100)])
        out, valid = apply_transform(T, pts)
        assert not valid.any() and np.isnan(out).all()

    def test_against_project_unproject_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            rel = random_pose(rng, max_angle=0.3, max_t=0.2)
            u, v, d = rng.uniform(0, 640), rng.uniform(0, 480), rng.uniform(2, 50)
            X = rel.rotation @ stereo_to_camera(RIG, u, v, d) + rel.translation
            got = apply_transform_point(temporal_transform(RIG, rel), u, v, d)
            if X[2] <= 0:
                assert got is None
            else:
                np.testing.assert_allclose(got, camera_to_stereo(RIG, X), rtol=1e-9, atol=1e-9)

    def test_composition(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            a, b = random_pose(rng), random_pose(rng)
            lhs = temporal_transform(RIG, a @ b)
            rhs = temporal_transform(RIG, a) @ temporal_transform(RIG, b)
            np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 640), st.floats(0, 480), st.floats(0.01, 500))
    def test_identity_fixes_every_point(self, u, v, d):
        got = apply_transform_point(temporal_transform(RIG, Pose.identity()), u, v, d)
        np.testing.assert_allclose(got, (u, v, d), rtol=1e-9, atol=1e-9)

    def test_non_positive_input_disparity_is_invalid(self):
        out, valid = apply_transform(np.eye(4), np.array([[1.0, 2.0, 0.0], [1.0, 2.0, -3.0]]))
        assert not valid.any()


class TestDepth:
    def test_hand_value(self):
        assert depth_from_disparity(RIG, 10.0) == pytest.approx(1.0)

    def test_round_trip(self):
        d = np.linspace(0.1, 300, 101)
        np.testing.assert_allclose(disparity_from_depth(RIG, depth_from_disparity(RIG, d)), d, rtol=1e-12)

    def test_monotone(self):
        z = depth_from_disparity(RIG, np.linspace(0.5, 1e4, 1000))
        assert np.all(np.diff(z) < 0)

    @pytest.mark.parametrize("bad", [0.0, -1.0])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(ValueError):
            depth_from_disparity(RIG, bad)
        with pytest.raises(ValueError):
            disparity_from_depth(RIG, bad)
