"""Procedural multi-camera scenes with exact depth.

A few moving spheres and boxes on a checkered floor inside a closed room,
rendered by analytic ray casting. Every ray from a camera inside the room hits
something within a few tens of meters. Rays are cast along the unnormalized
camera direction (x, y, 1), so the ray parameter of the nearest hit is the
camera-z depth.
"""

import logging
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from models.camera import Intrinsics, Pose
from models.frames import DepthFrame
from models.scene import CameraRecording, MultiCamSample, Primitive, SceneSpec, WarpPair
from models.trajectory import TrajectoryRanges, TrajectorySpec
from processor.geometry import pixel_centers
from processor.mesh_builder import build_mesh
from processor.rasterizer import render
from processor.trajectory import sample_trajectories
from utils.constants import FAR, NEAR, STRETCH_THRESHOLD, SYNTH_FRAMES
from utils.helper_functions import ordered_map

logger = logging.getLogger(__name__)

HIT_EPS = 1e-9


def synth_intrinsics(width: int, height: int) -> Intrinsics:
    """Centered pinhole with focal length equal to the image width (about 53 degrees horizontal)."""
    return Intrinsics(fx=float(width), fy=float(width), cx=width / 2.0, cy=height / 2.0, width=width, height=height)


def random_scene(seed: int, duration: int = SYNTH_FRAMES, n_primitives: Tuple[int, int] = (2, 5)) -> SceneSpec:
    rng = np.random.default_rng(seed)
    count = int(rng.integers(n_primitives[0], n_primitives[1] + 1))
    primitives = []
    for _ in range(count):
        shape = "sphere" if rng.random() < 0.5 else "box"
        if shape == "sphere":
            r = float(rng.uniform(0.2, 0.5))
            size = (r, r, r)
        else:
            size = tuple(float(v) for v in rng.uniform(0.15, 0.45, size=3))
        half = size[0] if shape == "sphere" else size[2]
        radius, angle = rng.uniform(0.0, 1.2), rng.uniform(0.0, 2.0 * np.pi)
        center = (float(radius * np.cos(angle)), float(radius * np.sin(angle)), float(half + rng.uniform(0.0, 0.8)))

        motion = str(rng.choice(["static", "linear", "sinusoidal"]))
        velocity, amplitude = (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)
        if motion == "linear":
            velocity = (float(rng.uniform(-0.02, 0.02)), float(rng.uniform(-0.02, 0.02)), 0.0)
        elif motion == "sinusoidal":
            lift = center[2] - half
            amplitude = (
                float(rng.uniform(0.0, 0.3)),
                float(rng.uniform(0.0, 0.3)),
                float(rng.uniform(0.0, min(0.3, lift))),
            )
        primitives.append(
            Primitive(
                shape=shape,
                size=size,
                center=center,
                motion=motion,
                velocity=velocity,
                amplitude=amplitude,
                period=float(rng.uniform(16.0, 64.0)),
                phase=float(rng.uniform(0.0, 2.0 * np.pi)),
                color=tuple(int(c) for c in rng.integers(30, 240, size=3)),
            )
        )
    return SceneSpec(primitives=primitives, duration=duration, seed=seed)


def camera_rays(K: Intrinsics, pose: Pose) -> Tuple[np.ndarray, np.ndarray]:
    """World-space origin (3,) and per-pixel directions (H*W, 3) whose camera-z component is 1."""
    u, v = pixel_centers(K.width, K.height)
    cam = np.stack([(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones_like(u)], axis=-1).reshape(-1, 3)
    return pose.center.copy(), cam @ pose.rotation.T


def _hit_plane(origin: np.ndarray, dirs: np.ndarray, height: float) -> np.ndarray:
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (height - origin[2]) / dz
    return np.where((dz != 0) & (t > HIT_EPS), t, np.inf)


def _hit_sphere(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    oc = origin - center
    a = np.sum(dirs * dirs, axis=1)
    b = 2.0 * (dirs @ oc)
    c = float(oc @ oc) - radius * radius
    disc = b * b - 4.0 * a * c
    root = np.sqrt(np.maximum(disc, 0.0))
    t0 = (-b - root) / (2.0 * a)
    t1 = (-b + root) / (2.0 * a)
    t = np.where(t0 > HIT_EPS, t0, np.where(t1 > HIT_EPS, t1, np.inf))
    return np.where(disc >= 0, t, np.inf)


def _hit_box(origin: np.ndarray, dirs: np.ndarray, center: np.ndarray, half: np.ndarray) -> np.ndarray:
    lo, hi = center - half, center + half
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        ta = (lo - origin) * inv
        tb = (hi - origin) * inv
    # axis-parallel rays: inside the slab spans everything, outside spans nothing
    parallel = dirs == 0
    inside = (origin >= lo) & (origin <= hi)
    t_near = np.where(parallel, np.where(inside, -np.inf, np.inf), np.minimum(ta, tb))
    t_far = np.where(parallel, np.where(inside, np.inf, -np.inf), np.maximum(ta, tb))
    enter, leave = t_near.max(axis=1), t_far.min(axis=1)
    hit = (enter <= leave) & (leave > HIT_EPS)
    return np.where(hit, np.where(enter > HIT_EPS, enter, leave), np.inf)


def _hit_room(origin: np.ndarray, dirs: np.ndarray, half_extent: float, ceiling: float) -> np.ndarray:
    """Distance to the nearest wall or the ceiling for rays starting inside the room."""
    with np.errstate(divide="ignore", invalid="ignore"):
        walls = (np.sign(dirs[:, :2]) * half_extent - origin[:2]) / dirs[:, :2]
        top = (ceiling - origin[2]) / dirs[:, 2]
    t = np.column_stack([np.where(dirs[:, :2] != 0, walls, np.inf), np.where(dirs[:, 2] > 0, top, np.inf)])
    t = t.min(axis=1)
    return np.where(t > HIT_EPS, t, np.inf)


def intersect_scene(
    spec: SceneSpec, frame: int, origin: Any, dirs: Any
) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest hit per ray: ray parameter (inf on a miss) and flat-shaded uint8 color."""
    origin = np.asarray(origin, dtype=np.float64)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)

    best = _hit_plane(origin, dirs, spec.ground_height)
    with np.errstate(invalid="ignore"):
        ground = origin + np.where(np.isfinite(best), best, 0.0)[:, None] * dirs
    parity = (np.floor(ground[:, 0] / spec.checker_period) + np.floor(ground[:, 1] / spec.checker_period)) % 2
    colors = np.where((parity == 0)[:, None], spec.ground_colors[0], spec.ground_colors[1]).astype(np.uint8)
    colors[~np.isfinite(best)] = spec.sky_color

    if spec.room_half_extent is not None:
        walls = _hit_room(origin, dirs, spec.room_half_extent, spec.ground_height + spec.room_height)
        closer = walls < best
        best = np.where(closer, walls, best)
        colors[closer] = spec.wall_color

    for prim in spec.primitives:
        center = prim.position(frame)
        if prim.shape == "sphere":
            t = _hit_sphere(origin, dirs, center, prim.size[0])
        else:
            t = _hit_box(origin, dirs, center, np.asarray(prim.size))
        closer = t < best
        best = np.where(closer, t, best)
        colors[closer] = prim.color
    return best, colors


def render_view(spec: SceneSpec, frame: int, pose: Pose, K: Intrinsics) -> Tuple[np.ndarray, DepthFrame]:
    origin, dirs = camera_rays(K, pose)
    t, colors = intersect_scene(spec, frame, origin, dirs)
    shape = (K.height, K.width)
    hit = np.isfinite(t).reshape(shape)
    depth = DepthFrame(np.where(hit, t.reshape(shape), 0.0), hit)
    return colors.reshape(shape + (3,)), depth


def render_scene(
    spec: SceneSpec,
    cams: Sequence[Sequence[Pose]],
    K: Intrinsics,
    source: int = 0,
    threads: int = 1,
) -> MultiCamSample:
    """Render every camera's trajectory against the same animated scene."""
    if len(cams) < 2:
        raise ValueError(f"need at least 2 cameras, got {len(cams)}")
    jobs = [(c, f) for c, poses in enumerate(cams) for f in range(len(poses))]
    views = ordered_map(lambda job: render_view(spec, job[1], cams[job[0]][job[1]], K), jobs, threads, desc="synth")

    recordings = [CameraRecording(list(poses)) for poses in cams]
    for (c, _), (rgb, depth) in zip(jobs, views):
        recordings[c].rgb.append(rgb)
        recordings[c].depth.append(depth)
    return MultiCamSample(spec, K, recordings, source)


def sample_camera_rig(
    spec: SceneSpec,
    n_cams: int,
    seed: int,
    source: str = "static",
    ranges: Optional[TrajectoryRanges] = None,
) -> Tuple[List[TrajectorySpec], List[List[Pose]]]:
    """`n_cams` trajectories around the scene's look-at point; camera 0 is the source.

    With source="static" camera 0 holds the shared start pose for every frame.
    Unless `ranges` already carries bounds, cameras are kept inside the room.
    """
    if source not in ("static", "random"):
        raise ValueError(f"source must be 'static' or 'random', got {source!r}")
    ranges = ranges or TrajectoryRanges()
    if ranges.bounds is None and spec.camera_bounds() is not None:
        ranges = TrajectoryRanges.model_validate({**ranges.model_dump(), "bounds": spec.camera_bounds()})
    rig = sample_trajectories(spec.lookat, spec.duration, seed, n_cams, ranges, include_static=source == "static")
    return [traj for traj, _ in rig], [poses for _, poses in rig]


def build_pairs(
    sample: MultiCamSample,
    stretch_threshold: float = STRETCH_THRESHOLD,
    near: float = NEAR,
    far: float = FAR,
    threads: int = 1,
) -> List[WarpPair]:
    """Warp the source camera's ground-truth depth into every other camera.

    The mesh of each source frame is built once and rendered into all targets.
    """
    src = sample.cameras[sample.source]
    targets = sample.targets

    def _frame(t: int):
        mesh = build_mesh(src.depth[t], sample.K, src.poses[t], stretch_threshold, source_frame=t)
        return [render(mesh, sample.K, sample.cameras[j].poses[t], near, far) for j in targets]

    per_frame = ordered_map(_frame, range(sample.n_frames), threads, desc="pairs")
    return [
        WarpPair(sample.source, j, [outputs[k] for outputs in per_frame]) for k, j in enumerate(targets)
    ]
