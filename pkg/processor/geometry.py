"""Pinhole projection, unprojection and rigid frame changes shared by every stage."""

from typing import Any, Tuple

import numpy as np

from models.camera import Intrinsics, Pose
from models.frames import DepthFrame
from utils.constants import FIXED_FOCAL
from utils.errors import BehindCameraError, NonPositiveDepthError

WORLD_UP = np.array([0.0, 0.0, 1.0])


def project(point: Any, K: Intrinsics) -> Tuple[Any, Any, Any]:
    """Camera-frame point(s) (..., 3) to pixel coordinates and depth."""
    p = np.asarray(point, dtype=np.float64)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    if np.any(~(z > 0)):
        raise BehindCameraError("point is on or behind the camera plane (z <= 0)")
    return K.fx * x / z + K.cx, K.fy * y / z + K.cy, z


def unproject(u: Any, v: Any, depth: Any, K: Intrinsics) -> np.ndarray:
    """Pixel coordinates plus depth to camera-frame point(s) (..., 3)."""
    d = np.asarray(depth, dtype=np.float64)
    if np.any(~(d > 0)):
        raise NonPositiveDepthError("depth must be positive to unproject")
    u, v, d = np.broadcast_arrays(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64), d)
    return np.stack([(u - K.cx) / K.fx * d, (v - K.cy) / K.fy * d, d], axis=-1)


def transform_point(point: Any, src: Pose, dst: Pose) -> np.ndarray:
    """Re-express a point given in camera `src` in the frame of camera `dst`."""
    return dst.apply_inverse(src.apply(point))


def pixel_centers(width: int, height: int) -> Tuple[np.ndarray, np.ndarray]:
    """(H, W) grids of pixel-center u and v coordinates."""
    return np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)


def look_at(eye: Any, target: Any, up: Any = WORLD_UP) -> Pose:
    """Camera at `eye` with its optical axis through `target`, roll fixed against `up`."""
    eye = np.asarray(eye, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - eye
    norm = np.linalg.norm(forward)
    if norm == 0:
        raise ValueError("eye and target coincide")
    forward = forward / norm
    right = np.cross(forward, np.asarray(up, dtype=np.float64))
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-12:
        raise ValueError("viewing direction is parallel to the up vector")
    right = right / rnorm
    down = np.cross(forward, right)
    return Pose(np.stack([right, down, forward], axis=1), eye)


def view_angles(pose: Pose, up: Any = WORLD_UP) -> Tuple[float, float]:
    """Pitch and yaw (radians) of the optical axis relative to the horizontal plane."""
    forward = pose.rotation[:, 2]
    up = np.asarray(up, dtype=np.float64)
    pitch = float(np.arcsin(np.clip(forward @ up, -1.0, 1.0)))
    yaw = float(np.arctan2(forward[1], forward[0]))
    return pitch, yaw


def rotation_angle(a: Pose, b: Pose) -> float:
    """Angle (radians) of the relative rotation between two poses."""
    cos = (np.trace(b.rotation @ a.rotation.T) - 1.0) / 2.0
    return float(np.arccos(np.clip(cos, -1.0, 1.0)))


def intrinsics_from_focal(width: int, height: int, focal: float = FIXED_FOCAL) -> Intrinsics:
    """Centered pinhole camera with a fixed focal length, for depth maps that ship without intrinsics."""
    return Intrinsics(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0, width=width, height=height)


def disparity_to_depth(frame: DepthFrame) -> DepthFrame:
    """Read a relative map as inverse depth; non-positive disparities stay invalid."""
    with np.errstate(divide="ignore"):
        depth = np.where(frame.valid, 1.0 / np.where(frame.valid, frame.values, 1.0), 0.0)
    return DepthFrame(depth, frame.valid)
