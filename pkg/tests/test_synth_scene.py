import numpy as np
import pytest
from pydantic import ValidationError

from models.camera import Intrinsics, Pose
from models.scene import Primitive, SceneSpec
from processor.geometry import look_at, pixel_centers, unproject
from processor.synth_scene import (
    build_pairs,
    intersect_scene,
    random_scene,
    render_scene,
    render_view,
    sample_camera_rig,
    synth_intrinsics,
)
from utils.constants import FAR, SYNTH_HEIGHT, SYNTH_WIDTH

K_TINY = Intrinsics(fx=10.0, fy=10.0, cx=4.5, cy=3.5, width=9, height=7)


def _scene(*primitives, duration=3, **fields):
    return SceneSpec(primitives=list(primitives), duration=duration, **fields)


def _corner_ball():
    return Primitive(shape="sphere", size=(0.5, 0.5, 0.5), center=(6.0, 6.0, 1.0))


def _desk_scene(duration=3):
    return _scene(
        Primitive(shape="sphere", size=(0.6, 0.6, 0.6), center=(0.0, 0.0, 1.0), color=(200, 60, 60)),
        Primitive(shape="box", size=(0.3, 0.4, 0.5), center=(0.8, -0.9, 0.5), color=(60, 200, 60)),
        Primitive(shape="box", size=(0.25, 0.25, 0.25), center=(-0.6, 1.0, 0.25), color=(60, 60, 200)),
        duration=duration,
    )


def test_camera_above_ground_sees_constant_depth():
    down = Pose(np.diag([1.0, -1.0, -1.0]), [0.3, -0.2, 2.0])
    rgb, depth = render_view(_scene(_corner_ball()), 0, down, K_TINY)
    assert depth.valid.all()
    np.testing.assert_allclose(depth.values, 2.0, rtol=1e-12)
    assert rgb.shape == (7, 9, 3) and rgb.dtype == np.uint8


def test_sphere_on_the_optical_axis():
    spec = _scene(Primitive(shape="sphere", size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 1.5), color=(10, 20, 30)))
    t, colors = intersect_scene(spec, 0, [-5.0, 0.0, 1.5], [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [-1.0, 0.0, 0.0]])
    assert t[0] == pytest.approx(4.0, abs=1e-12)
    assert colors[0].tolist() == [10, 20, 30]
    assert t[1] == pytest.approx(spec.room_height - 1.5, abs=1e-12)
    assert t[2] == pytest.approx(spec.room_half_extent - 5.0, abs=1e-12)
    assert colors[1].tolist() == colors[2].tolist() == list(spec.wall_color)

    _, depth = render_view(spec, 0, look_at([-5.0, 0.0, 1.5], [0.0, 0.0, 1.5]), K_TINY)
    assert depth.values[3, 4] == pytest.approx(4.0, abs=1e-9)


def test_open_scene_shows_sky_where_rays_miss():
    spec = _scene(Primitive(shape="sphere", size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 1.5)), room_half_extent=None)
    t, colors = intersect_scene(spec, 0, [-5.0, 0.0, 1.5], [[0.0, 0.0, 1.0], [-1.0, 0.0, -0.1]])
    assert np.isinf(t[0])
    assert colors[0].tolist() == list(spec.sky_color)
    assert t[1] == pytest.approx(15.0, abs=1e-9)


def test_box_face_on_the_optical_axis():
    spec = _scene(Primitive(shape="box", size=(0.5, 0.5, 0.5), center=(0.0, 0.0, 1.5)))
    _, depth = render_view(spec, 0, look_at([-5.0, 0.0, 1.5], [0.0, 0.0, 1.5]), K_TINY)
    assert depth.values[3, 4] == pytest.approx(4.5, abs=1e-9)


def test_background_pixels_are_invalid():
    up = look_at([0.0, 0.0, 1.0], [5.0, 0.0, 20.0])
    _, depth = render_view(_scene(_corner_ball(), room_half_extent=None), 0, up, K_TINY)
    assert not depth.valid.any()


def test_room_closes_every_ray():
    up = look_at([0.0, 0.0, 1.0], [5.0, 0.0, 20.0])
    spec = _scene(_corner_ball())
    _, depth = render_view(spec, 0, up, K_TINY)
    assert depth.valid.all()
    axis = np.array([5.0, 0.0, 19.0]) / np.linalg.norm([5.0, 0.0, 19.0])
    assert depth.values[3, 4] == pytest.approx((spec.room_height - 1.0) / axis[2], rel=1e-12)

    for yaw in np.linspace(0.0, 2.0 * np.pi, 8, endpoint=False):
        pose = look_at([7.0, -7.0, 0.7], [7.0 + np.cos(yaw), -7.0 + np.sin(yaw), 0.2])
        _, depth = render_view(spec, 0, pose, synth_intrinsics(32, 24))
        assert depth.valid.all()
        assert depth.values.max() < FAR


def test_primitives_must_stay_inside_the_room():
    with pytest.raises(ValidationError):
        _scene(Primitive(shape="sphere", size=(0.5, 0.5, 0.5), center=(7.8, 0.0, 1.0)))
    drifting = Primitive(
        shape="box", size=(0.2, 0.2, 0.2), center=(0.0, 0.0, 1.0), motion="linear", velocity=(0.5, 0.0, 0.0)
    )
    with pytest.raises(ValidationError):
        _scene(drifting, duration=20)
    with pytest.raises(ValidationError):
        _scene(Primitive(shape="sphere", size=(0.5, 0.5, 0.5), center=(0.0, 0.0, 4.8)))
    assert _scene(drifting, duration=20, room_half_extent=None).room_half_extent is None

    spec = _scene(_corner_ball())
    lo, hi = spec.camera_bounds()
    assert lo == (-7.5, -7.5, 0.6) and hi == (7.5, 7.5, 4.5)
    assert _scene(_corner_ball(), room_half_extent=None).camera_bounds() is None


def test_primitives_follow_their_motion_paths():
    linear = Primitive(shape="sphere", size=(0.2, 0.2, 0.2), center=(0.0, 0.0, 1.0), motion="linear", velocity=(0.1, 0.0, 0.0))
    assert linear.position(10).tolist() == pytest.approx([1.0, 0.0, 1.0])
    wave = Primitive(
        shape="box", size=(0.2, 0.2, 0.2), center=(0.0, 0.0, 1.0), motion="sinusoidal", amplitude=(0.0, 0.0, 0.5), period=8.0
    )
    assert wave.position(2)[2] == pytest.approx(1.5)
    assert wave.lowest_point(9) == pytest.approx(0.3)


def test_primitives_must_stay_above_ground():
    with pytest.raises(ValidationError):
        _scene(Primitive(shape="sphere", size=(0.5, 0.5, 0.5), center=(0.0, 0.0, 0.3)))
    sinking = Primitive(
        shape="box", size=(0.2, 0.2, 0.2), center=(0.0, 0.0, 0.5), motion="linear", velocity=(0.0, 0.0, -0.1)
    )
    with pytest.raises(ValidationError):
        _scene(sinking, duration=10)
    with pytest.raises(ValidationError):
        SceneSpec(primitives=[])


def test_random_scene_is_deterministic():
    a, b = random_scene(5), random_scene(5)
    assert a.model_dump() == b.model_dump()
    assert a.model_dump() != random_scene(6).model_dump()
    assert 2 <= len(a.primitives) <= 5


def test_cameras_at_the_same_pose_render_identically():
    spec = _desk_scene()
    pose = look_at([-4.0, 0.3, 1.6], [0.0, 0.0, 1.0])
    sample = render_scene(spec, [[pose] * 3, [pose] * 3], synth_intrinsics(32, 24))
    for a, b in zip(sample.cameras[0].rgb, sample.cameras[1].rgb):
        assert np.array_equal(a, b)
    for a, b in zip(sample.cameras[0].depth, sample.cameras[1].depth):
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.valid, b.valid)


def test_render_scene_needs_two_cameras():
    with pytest.raises(ValueError):
        render_scene(_desk_scene(), [[Pose.identity()] * 3], K_TINY)


def test_render_scene_is_thread_independent():
    spec = _desk_scene()
    cams = [[look_at([-4.0, 0.0, 1.5], [0.0, 0.0, 1.0])] * 3, [look_at([-4.0, 0.5, 1.5], [0.0, 0.0, 1.0])] * 3]
    K = synth_intrinsics(24, 16)
    serial = render_scene(spec, cams, K, threads=1)
    pooled = render_scene(spec, cams, K, threads=4)
    for a, b in zip(serial.cameras, pooled.cameras):
        for x, y in zip(a.depth, b.depth):
            assert np.array_equal(x.values, y.values)


def test_eight_cameras_give_seven_pairs():
    spec = _desk_scene(duration=2)
    cams = [[look_at([-4.0, 0.1 * k, 1.5], [0.0, 0.0, 1.0])] * 2 for k in range(8)]
    sample = render_scene(spec, cams, synth_intrinsics(20, 16))
    pairs = build_pairs(sample)
    assert len(pairs) == 7
    assert [p.target for p in pairs] == list(range(1, 8))
    assert all(p.source == 0 and len(p.warped) == 2 for p in pairs)


def test_pair_onto_the_source_camera_reproduces_its_depth():
    spec = _desk_scene()
    pose = look_at([-4.0, 0.3, 1.6], [0.0, 0.0, 1.0])
    sample = render_scene(spec, [[pose] * 3, [pose] * 3], synth_intrinsics(48, 32))
    (pair,) = build_pairs(sample)
    for src, out in zip(sample.cameras[0].depth, pair.warped):
        observed = out.mask.as_bool()
        assert observed.sum() > 100
        rel = np.abs(out.depth.values[observed] - src.values[observed]) / src.values[observed]
        assert rel.max() < 1e-4


def test_warped_depth_matches_target_ground_truth():
    spec = _desk_scene()
    K = synth_intrinsics(64, 48)
    src = look_at([-4.0, 0.0, 1.5], [0.0, 0.0, 1.0])
    tgt = look_at([-3.8, 0.6, 1.7], [0.0, 0.0, 1.0])
    sample = render_scene(spec, [[src] * 3, [tgt] * 3], K)
    (pair,) = build_pairs(sample)
    errors = []
    for truth, out in zip(sample.cameras[1].depth, pair.warped):
        usable = out.mask.as_bool() & truth.valid
        assert usable.sum() > 0.25 * truth.n_valid
        errors.append(np.abs(out.depth.values[usable] - truth.values[usable]) / truth.values[usable])
    assert np.median(np.concatenate(errors)) < 0.01


def test_ground_truth_depth_is_consistent_across_views():
    spec = _desk_scene()
    K = synth_intrinsics(64, 48)
    a = look_at([-4.0, 0.0, 1.5], [0.0, 0.0, 1.0])
    b = look_at([-3.6, 0.8, 1.8], [0.0, 0.0, 1.0])
    _, depth_a = render_view(spec, 0, a, K)

    u, v = pixel_centers(K.width, K.height)
    world = a.apply(unproject(u[depth_a.valid], v[depth_a.valid], depth_a.values[depth_a.valid], K))
    cam_b = b.apply_inverse(world)
    z = cam_b[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ub = K.fx * cam_b[:, 0] / z + K.cx
        vb = K.fy * cam_b[:, 1] / z + K.cy
    inside = (z > 0) & (ub >= 0) & (ub < K.width) & (vb >= 0) & (vb < K.height)
    world, z = world[inside], z[inside]

    # B's ray toward each reprojected point, scaled to unit camera-z so t is B-depth
    t, _ = intersect_scene(spec, 0, b.center, (world - b.center) / z[:, None])
    rel = np.abs(t - z) / z
    assert inside.sum() > 500
    assert np.mean(t > z * (1.0 + 1e-6)) < 0.01
    assert np.median(rel) < 0.01
    assert np.mean(rel < 1e-6) > 0.5


def test_camera_rig_leads_with_a_static_source():
    spec = random_scene(3)
    trajectories, poses = sample_camera_rig(spec, 3, seed=4)
    assert len(trajectories) == len(poses) == 3
    assert trajectories[0].static
    assert all(len(p) == spec.duration for p in poses)
    assert all(p[0].center.tolist() == poses[0][0].center.tolist() for p in poses)
    assert np.allclose(trajectories[0].lookat, spec.lookat)

    moving, _ = sample_camera_rig(spec, 2, seed=4, source="random")
    assert not moving[0].static
    with pytest.raises(ValueError):
        sample_camera_rig(spec, 2, seed=4, source="orbit")


def test_camera_rig_stays_inside_the_room():
    spec = random_scene(7)
    lo, hi = spec.camera_bounds()
    trajectories, poses = sample_camera_rig(spec, 4, seed=2)
    centers = np.array([p.center for cam in poses for p in cam])
    assert np.all(centers >= lo) and np.all(centers <= hi)
    assert trajectories[1].ranges["bounds"] == [list(lo), list(hi)]


def test_warping_onto_its_own_rig_keeps_the_whole_view():
    spec = random_scene(3, duration=3)
    K = synth_intrinsics(SYNTH_WIDTH, SYNTH_HEIGHT)
    _, rig = sample_camera_rig(spec, 2, seed=1, source="random")
    for poses in rig:
        sample = render_scene(spec, [poses, poses], K)
        (pair,) = build_pairs(sample)
        for src, out in zip(sample.cameras[0].depth, pair.warped):
            assert src.valid.all()
            assert src.values.max() < FAR
            observed = out.mask.as_bool()
            assert observed[1:-1, 1:-1][src.valid[1:-1, 1:-1]].mean() > 0.99
            rel = np.abs(out.depth.values[observed] - src.values[observed]) / src.values[observed]
            assert rel.max() < 1e-4
