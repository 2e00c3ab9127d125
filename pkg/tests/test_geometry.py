import numpy as np
import pytest

from conftest import random_pose
from models.camera import Intrinsics, Pose
from models.frames import DepthFrame, MaskFrame, RenderOutput
from processor.geometry import (
    disparity_to_depth,
    intrinsics_from_focal,
    look_at,
    project,
    rotation_angle,
    transform_point,
    unproject,
    view_angles,
)
from utils.errors import BehindCameraError, NonPositiveDepthError


def test_principal_axis_projects_to_principal_point(small_K):
    u, v, z = project([0.0, 0.0, 5.0], small_K)
    assert (u, v, z) == (small_K.cx, small_K.cy, 5.0)


def test_project_unproject_round_trip(small_K, rng):
    points = np.column_stack([rng.uniform(-2, 2, 200), rng.uniform(-2, 2, 200), rng.uniform(0.5, 20, 200)])
    u, v, z = project(points, small_K)
    np.testing.assert_allclose(unproject(u, v, z, small_K), points, rtol=0, atol=1e-12)


def test_project_rejects_points_behind_camera(small_K):
    with pytest.raises(BehindCameraError):
        project([0.0, 0.0, 0.0], small_K)
    with pytest.raises(BehindCameraError):
        project([[0.0, 0.0, 1.0], [1.0, 1.0, -1.0]], small_K)


def test_unproject_rejects_non_positive_depth(small_K):
    with pytest.raises(NonPositiveDepthError):
        unproject(1.0, 1.0, 0.0, small_K)


def test_unproject_broadcasts_scalar_depth(small_K):
    out = unproject(np.array([16.0, 56.0]), np.array([12.0, 12.0]), 2.0, small_K)
    np.testing.assert_allclose(out, [[0.0, 0.0, 2.0], [2.0, 0.0, 2.0]])


def test_transform_point_between_cameras(rng):
    a, b = random_pose(rng), random_pose(rng)
    p = rng.normal(size=3)
    np.testing.assert_allclose(transform_point(p, a, a), p, atol=1e-12)
    back = transform_point(transform_point(p, a, b), b, a)
    np.testing.assert_allclose(back, p, atol=1e-12)
    np.testing.assert_allclose(transform_point(p, a, Pose.identity()), a.apply(p), atol=1e-12)


def test_pose_inverse_and_compose(rng):
    pose = random_pose(rng)
    np.testing.assert_allclose(pose.compose(pose.inverse()).matrix, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(pose.inverse().matrix, np.linalg.inv(pose.matrix), atol=1e-12)


def test_batch_and_single_transforms_agree_bitwise(rng):
    pose = random_pose(rng)
    points = rng.normal(size=(50, 3))
    batch = pose.apply(points)
    for i in range(50):
        assert np.array_equal(batch[i], pose.apply(points[i]))
    inv = pose.apply_inverse(points)
    assert np.array_equal(inv[7], pose.apply_inverse(points[7]))


def test_pose_rejects_bad_rotation():
    with pytest.raises(ValueError):
        Pose(np.diag([1.0, 1.0, 1.1]), np.zeros(3))
    with pytest.raises(ValueError):
        Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        Pose(np.eye(3), [0.0, np.nan, 0.0])


def test_pose_is_immutable(rng):
    pose = random_pose(rng)
    with pytest.raises(ValueError):
        pose.rotation[0, 0] = 2.0


def test_pose_dict_round_trip(rng):
    pose = random_pose(rng)
    again = Pose.from_dict(pose.to_dict())
    assert np.array_equal(again.matrix, pose.matrix)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        Intrinsics(fx=0.0, fy=1.0, cx=1.0, cy=1.0, width=4, height=4)
    with pytest.raises(ValueError):
        Intrinsics(fx=1.0, fy=1.0, cx=4.0, cy=1.0, width=4, height=4)


def test_look_at_puts_target_on_optical_axis():
    eye, target = np.array([3.0, 1.0, 2.0]), np.array([0.0, 0.0, 1.5])
    pose = look_at(eye, target)
    local = pose.apply_inverse(target)
    np.testing.assert_allclose(local[:2], 0.0, atol=1e-12)
    assert local[2] == pytest.approx(np.linalg.norm(target - eye), abs=1e-12)
    # upright: image x stays horizontal, image y points down
    assert abs(pose.rotation[2, 0]) < 1e-12
    assert pose.rotation[2, 1] < 0


def test_look_at_degenerate_inputs():
    with pytest.raises(ValueError):
        look_at([0.0, 0.0, 1.0], [0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        look_at([0.0, 0.0, 3.0], [0.0, 0.0, 1.0])


def test_view_angles_and_rotation_angle():
    level = look_at([-2.0, 0.0, 1.0], [0.0, 0.0, 1.0])
    pitch, yaw = view_angles(level)
    assert pitch == pytest.approx(0.0, abs=1e-12)
    assert yaw == pytest.approx(0.0, abs=1e-12)

    turned = look_at([0.0, -2.0, 1.0], [0.0, 0.0, 1.0])
    assert view_angles(turned)[1] == pytest.approx(np.pi / 2)
    assert rotation_angle(level, turned) == pytest.approx(np.pi / 2)

    down = look_at([-1.0, 0.0, 2.0], [0.0, 0.0, 1.0])
    assert view_angles(down)[0] == pytest.approx(-np.pi / 4)


def test_intrinsics_from_focal_is_centered():
    K = intrinsics_from_focal(1024, 576)
    assert (K.fx, K.fy, K.cx, K.cy) == (500.0, 500.0, 512.0, 288.0)


def test_disparity_to_depth():
    frame = DepthFrame.from_array(np.array([[2.0, 0.0], [0.25, -1.0]]))
    depth = disparity_to_depth(frame)
    assert depth.valid.tolist() == [[True, False], [True, False]]
    assert depth.values[0, 0] == 0.5
    assert depth.values[1, 0] == 4.0


def test_depth_frame_marks_non_finite_invalid():
    frame = DepthFrame.from_array(np.array([[1.0, np.nan], [np.inf, -2.0]]))
    assert frame.n_valid == 1
    assert np.isnan(frame.values[0, 1])


def test_render_output_mask_requires_depth():
    depth = DepthFrame(np.ones((2, 2)), np.array([[True, False], [True, True]]))
    with pytest.raises(ValueError):
        RenderOutput(depth, MaskFrame(np.ones((2, 2))))
