"""Random look-at camera trajectories and their per-frame interpolation.

A start position is drawn in front of the subject at a bounded distance and
pitch/yaw offset. From there the camera moves through 1-3 random waypoints along
a Catmull-Rom spline, re-timed by arc length with smoothstep easing. The path is
scaled about the start so its length hits the drawn target exactly, and every
frame looks at the same point. Orbit cameras instead swing the start position
about the vertical axis through the look-at point.
"""

import logging
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np

from models.camera import Pose
from models.trajectory import TrajectoryRanges, TrajectorySpec
from processor.geometry import WORLD_UP, look_at, rotation_angle, view_angles
from utils.constants import MAX_ORBIT_DEGREES, SUBJECT_HEIGHT
from utils.errors import SamplingError

logger = logging.getLogger(__name__)

ARC_SAMPLES = 64
SUBJECT_FACING = np.array([1.0, 0.0, 0.0])


def child_seed(seed: int, index: int) -> int:
    """Independent, reproducible seed for the index-th trajectory of a batch."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def smoothstep(t: np.ndarray) -> np.ndarray:
    return t * t * (3.0 - 2.0 * t)


class CatmullRomPath:
    """Uniform Catmull-Rom spline through control points, with mirrored phantom end points."""

    def __init__(self, points: Sequence[Any]):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        self.points = pts[keep]
        if len(self.points) >= 2:
            first = 2.0 * self.points[0] - self.points[1]
            last = 2.0 * self.points[-1] - self.points[-2]
            self._padded = np.vstack([first, self.points, last])

    @property
    def n_segments(self) -> int:
        return max(len(self.points) - 1, 0)

    def evaluate(self, g: np.ndarray) -> np.ndarray:
        """Positions at global parameters g in [0, n_segments]; integer g hits control points."""
        g = np.asarray(g, dtype=np.float64)
        if self.n_segments == 0:
            return np.broadcast_to(self.points[0], g.shape + (3,)).copy()
        k = np.minimum(np.floor(g).astype(np.int64), self.n_segments - 1)
        s = (g - k)[..., None]
        p0, p1, p2, p3 = (self._padded[k + i] for i in range(4))
        out = 0.5 * (
            2.0 * p1
            + (p2 - p0) * s
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * s**2
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * s**3
        )
        at_knot = (g == np.round(g))[..., None]
        knots = self.points[np.clip(np.round(g).astype(np.int64), 0, self.n_segments)]
        return np.where(at_knot, knots, out)

    def arc_table(self) -> Tuple[np.ndarray, np.ndarray]:
        g = np.linspace(0.0, float(self.n_segments), self.n_segments * ARC_SAMPLES + 1)
        pos = self.evaluate(g)
        steps = np.linalg.norm(np.diff(pos, axis=0), axis=1)
        return g, np.concatenate([[0.0], np.cumsum(steps)])

    def sample(self, n_frames: int) -> np.ndarray:
        if self.n_segments == 0:
            return np.repeat(self.points[:1], n_frames, axis=0)
        g, length = self.arc_table()
        eased = smoothstep(np.linspace(0.0, 1.0, n_frames))
        params = np.interp(eased * length[-1], length, g)
        params[0], params[-1] = 0.0, float(self.n_segments)
        return self.evaluate(params)


def interpolate(waypoints: Sequence[Any], n_frames: int) -> np.ndarray:
    """(n_frames, 3) positions through all control points; consecutive duplicates are skipped."""
    if len(waypoints) < 2:
        raise ValueError("interpolation needs at least 2 control points")
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    return CatmullRomPath(waypoints).sample(n_frames)


def path_length(positions: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(positions, axis=0), axis=1)))


def sample_start(
    lookat: Optional[Any] = None,
    subject_height: float = SUBJECT_HEIGHT,
    rng_seed: int = 0,
    ranges: Optional[TrajectoryRanges] = None,
    facing: Any = SUBJECT_FACING,
) -> Pose:
    """Start camera in front of the subject, looking at its chest.

    Without an explicit look-at point the subject stands at the origin with its
    chest at `subject_height`. Distance, pitch offset and yaw offset (relative to
    the subject's facing direction) are each drawn uniformly. With `ranges.bounds`
    set, draws that land outside the box are redrawn.
    """
    ranges = ranges or TrajectoryRanges()
    target = np.array([0.0, 0.0, subject_height]) if lookat is None else np.asarray(lookat, dtype=np.float64)
    rng = np.random.default_rng(rng_seed)
    for _ in range(ranges.retries):
        distance = rng.uniform(*ranges.distance)
        pitch = np.radians(rng.uniform(*ranges.pitch))
        yaw = np.radians(rng.uniform(*ranges.yaw))

        azimuth = np.arctan2(facing[1], facing[0]) + yaw
        direction = np.array([np.cos(pitch) * np.cos(azimuth), np.cos(pitch) * np.sin(azimuth), np.sin(pitch)])
        center = target + distance * direction
        if ranges.bounds is None or _inside(center, ranges.bounds):
            return look_at(center, target)
    raise SamplingError(
        f"no start position inside the camera bounds in {ranges.retries} draws (seed={rng_seed})",
        diagnostics={"rejections": {"bounds": ranges.retries}, "bounds": ranges.bounds},
    )


def _inside(points: np.ndarray, bounds: Any) -> np.ndarray:
    lo, hi = (np.asarray(b, dtype=np.float64) for b in bounds)
    return np.all((points >= lo) & (points <= hi), axis=-1)


def _local_axes(start: np.ndarray, lookat: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    forward = (lookat - start) / np.linalg.norm(lookat - start)
    right = np.cross(forward, WORLD_UP)
    right /= np.linalg.norm(right)
    return forward, right, WORLD_UP


def _propose(rng: np.random.Generator, start: np.ndarray, lookat: np.ndarray, count: int) -> List[np.ndarray]:
    forward, right, up = _local_axes(start, lookat)
    points, current = [], start
    for _ in range(count):
        step = rng.uniform(-1.0, 1.0) * forward + rng.uniform(-0.3, 0.3) * right + rng.uniform(-0.5, 0.5) * up
        current = current + rng.uniform(0.5, 1.0) * step
        points.append(current)
    return points


def _violations(poses: Sequence[Pose], positions: np.ndarray, lookat: np.ndarray, ranges: TrajectoryRanges) -> dict:
    angles = np.array([view_angles(p) for p in poses])
    pitch_span = float(np.degrees(np.ptp(angles[:, 0])))
    yaw_span = float(np.degrees(np.ptp(np.unwrap(angles[:, 1]))))
    steps = [rotation_angle(a, b) for a, b in zip(poses[:-1], poses[1:])]
    max_step = float(np.degrees(max(steps))) if steps else 0.0
    closest = float(np.min(np.linalg.norm(positions - lookat, axis=1)))
    failed = {}
    if pitch_span > ranges.max_pitch_span:
        failed["pitch_span"] = pitch_span
    if yaw_span > ranges.max_yaw_span:
        failed["yaw_span"] = yaw_span
    if max_step > ranges.max_step:
        failed["max_step"] = max_step
    if closest < ranges.min_lookat_distance:
        failed["closest"] = closest
    if ranges.bounds is not None:
        outside = int(np.count_nonzero(~_inside(positions, ranges.bounds)))
        if outside:
            failed["bounds"] = outside
    return failed


def sample_trajectory(
    start: Pose,
    lookat: Any,
    n_frames: int,
    rng_seed: int,
    ranges: Optional[TrajectoryRanges] = None,
    static: bool = False,
) -> Tuple[TrajectorySpec, List[Pose]]:
    """Per-frame look-at poses from `start` through 1-3 random waypoints."""
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    ranges = ranges or TrajectoryRanges()
    lookat = np.asarray(lookat, dtype=np.float64)
    origin = start.center.copy()
    ranges_record = ranges.model_dump(mode="json")

    if static:
        spec = TrajectorySpec(lookat, origin, [origin], n_frames, rng_seed, ranges_record, static=True)
        return spec, [start] * n_frames

    rng = np.random.default_rng(rng_seed)
    d0 = float(np.linalg.norm(origin - lookat))
    target_length = float(rng.uniform(*ranges.path_length)) * d0
    tally: dict = {}

    for attempt in range(1, ranges.retries + 1):
        count = int(rng.integers(ranges.waypoints[0], ranges.waypoints[1] + 1))
        waypoints = _propose(rng, origin, lookat, count)
        positions = interpolate([origin] + waypoints, n_frames)
        raw_length = path_length(positions)
        if raw_length <= 1e-9:
            tally["degenerate"] = tally.get("degenerate", 0) + 1
            continue

        alpha = target_length / raw_length
        positions = origin + alpha * (positions - origin)
        positions[0] = origin
        waypoints = [origin + alpha * (w - origin) for w in waypoints]
        try:
            poses = [start] + [look_at(p, lookat) for p in positions[1:]]
        except ValueError:
            tally["degenerate"] = tally.get("degenerate", 0) + 1
            continue

        failed = _violations(poses, positions, lookat, ranges)
        if not failed:
            spec = TrajectorySpec(
                lookat, origin, waypoints, n_frames, rng_seed, ranges_record,
                path_length=path_length(positions), attempts=attempt,
            )
            logger.debug(f"trajectory seed={rng_seed} accepted after {attempt} attempts")
            return spec, poses
        for key in failed:
            tally[key] = tally.get(key, 0) + 1

    raise SamplingError(
        f"no trajectory satisfied the limits in {ranges.retries} attempts (seed={rng_seed})",
        diagnostics={"rejections": tally, "target_length": target_length, "start_distance": d0},
    )


def orbit_trajectory(
    start: Pose,
    lookat: Any,
    degrees: float,
    n_frames: int,
    rng_seed: int = 0,
) -> Tuple[TrajectorySpec, List[Pose]]:
    """Swing the camera `degrees` about the vertical axis through `lookat`.

    Height and horizontal distance to the look-at point stay fixed; the swept
    angle eases in and out with smoothstep. Positive degrees turn counter-clockwise
    seen from above.
    """
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2")
    if abs(degrees) > MAX_ORBIT_DEGREES:
        raise ValueError(f"orbit of {degrees} degrees exceeds +/-{MAX_ORBIT_DEGREES}")
    lookat = np.asarray(lookat, dtype=np.float64)
    origin = start.center.copy()
    offset = origin - lookat

    angles = np.radians(degrees) * smoothstep(np.linspace(0.0, 1.0, n_frames))
    c, s = np.cos(angles), np.sin(angles)
    positions = np.column_stack(
        [lookat[0] + c * offset[0] - s * offset[1], lookat[1] + s * offset[0] + c * offset[1], np.full(n_frames, origin[2])]
    )
    positions[0] = origin
    poses = [start] + [look_at(p, lookat) for p in positions[1:]]
    spec = TrajectorySpec(
        lookat, origin, [positions[-1]], n_frames, rng_seed, {},
        path_length=path_length(positions), interpolation="orbit/smoothstep",
        extra={"orbit_degrees": float(degrees)},
    )
    return spec, poses


def sample_trajectories(
    lookat: Any,
    n_frames: int,
    seed: int,
    count: int,
    ranges: Optional[TrajectoryRanges] = None,
    include_static: bool = True,
    orbits: Sequence[float] = (),
) -> List[Tuple[TrajectorySpec, List[Pose]]]:
    """`count` cameras sharing one start; the first is static when `include_static`.

    One orbit camera per entry of `orbits` (degrees) follows the sampled ones.
    """
    ranges = ranges or TrajectoryRanges()
    start = sample_start(lookat, rng_seed=child_seed(seed, 0), ranges=ranges)
    out = []
    for k in range(count):
        static = include_static and k == 0
        out.append(sample_trajectory(start, lookat, n_frames, child_seed(seed, k + 1), ranges, static=static))
    for k, degrees in enumerate(orbits, start=count):
        out.append(orbit_trajectory(start, lookat, degrees, n_frames, child_seed(seed, k + 1)))
    return out
