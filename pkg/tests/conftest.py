import numpy as np
import pytest

from models.camera import Intrinsics, Pose
from models.frames import DepthFrame


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_pose(rng: np.random.Generator, spread: float = 1.0) -> Pose:
    return Pose(quaternion_to_matrix(rng.normal(size=4)), rng.normal(scale=spread, size=3))


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def plane_depth(K: Intrinsics, a: float = 0.0, b: float = 0.0, c: float = 0.5) -> DepthFrame:
    """Depth of a camera-space plane whose inverse depth is a*u + b*v + c at pixel centers."""
    u, v = np.meshgrid(np.arange(K.width) + 0.5, np.arange(K.height) + 0.5)
    return DepthFrame.from_array(1.0 / (a * u + b * v + c))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_K() -> Intrinsics:
    return Intrinsics(fx=40.0, fy=40.0, cx=16.0, cy=12.0, width=32, height=24)
