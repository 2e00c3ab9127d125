import numpy as np
import pytest

from conftest import random_pose
from models.camera import Intrinsics, Pose
from models.frames import DepthFrame
from processor.geometry import unproject
from processor.mesh_builder import build_mesh, stretch_flags, write_obj
from utils.errors import DimensionMismatchError, EmptyMeshError

K3 = Intrinsics(fx=3.0, fy=3.0, cx=1.5, cy=1.5, width=3, height=3)


def test_full_grid_triangulation():
    mesh = build_mesh(DepthFrame.from_array(np.full((3, 3), 2.0)), K3, Pose.identity())
    assert mesh.n_vertices == 9
    assert mesh.n_triangles == 8
    assert mesh.triangles[:2].tolist() == [[0, 1, 4], [0, 4, 3]]
    assert not mesh.stretched.any()


def test_vertices_are_unprojected_pixel_centers(rng):
    pose = random_pose(rng)
    depth = rng.uniform(1.0, 3.0, size=(3, 3))
    mesh = build_mesh(DepthFrame.from_array(depth), K3, pose)
    u, v = np.meshgrid(np.arange(3) + 0.5, np.arange(3) + 0.5)
    expected = pose.apply(unproject(u.ravel(), v.ravel(), depth.ravel(), K3))
    np.testing.assert_allclose(mesh.vertices, expected, atol=1e-12)


def test_stretched_triangles_are_flagged_not_removed():
    depth = np.full((3, 3), 1.0)
    depth[:, 2] = 5.0
    mesh = build_mesh(DepthFrame.from_array(depth), K3, Pose.identity(), stretch_threshold=0.1)
    assert mesh.n_triangles == 8
    # the right column of quads spans the 1 m -> 5 m step
    assert mesh.stretched.tolist() == [False, False, True, True, False, False, True, True]


def test_stretch_flags_threshold_is_relative_to_nearest_corner():
    corners = np.array([[1.0, 1.05, 1.0], [1.0, 1.100001, 1.0], [2.0, 2.0, 2.0]])
    assert stretch_flags(corners, 0.1).tolist() == [False, True, False]


def test_invalid_center_leaves_no_quad():
    valid = np.ones((3, 3), dtype=bool)
    valid[1, 1] = False
    with pytest.raises(EmptyMeshError):
        build_mesh(DepthFrame(np.ones((3, 3)), valid), K3, Pose.identity())


def test_invalid_corner_drops_one_quad():
    valid = np.ones((3, 3), dtype=bool)
    valid[0, 0] = False
    mesh = build_mesh(DepthFrame(np.ones((3, 3)), valid), K3, Pose.identity())
    assert mesh.n_vertices == 8
    assert mesh.n_triangles == 6


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        build_mesh(DepthFrame.from_array(np.ones((3, 4))), K3, Pose.identity())


def test_negative_threshold_rejected():
    with pytest.raises(ValueError):
        build_mesh(DepthFrame.from_array(np.ones((3, 3))), K3, Pose.identity(), stretch_threshold=-1.0)


def test_write_obj_groups_stretched_faces(tmp_path):
    depth = np.full((3, 3), 1.0)
    depth[:, 2] = 5.0
    mesh = build_mesh(DepthFrame.from_array(depth), K3, Pose.identity(), source_frame=4)
    path = tmp_path / "mesh.obj"
    write_obj(mesh, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# frame 4"
    assert sum(line.startswith("v ") for line in lines) == 9
    groups = [i for i, line in enumerate(lines) if line.startswith("g ")]
    assert [lines[i] for i in groups] == ["g observed", "g stretched"]
    assert groups[1] - groups[0] - 1 == 4
    assert lines[groups[0] + 1] == "f 1 2 5"
