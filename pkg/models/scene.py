from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from models.camera import Intrinsics, Pose
from models.frames import DepthFrame, RenderOutput
from utils import constants

Color = Tuple[int, int, int]


class Primitive(BaseModel):
    """Sphere (radius = size[0]) or axis-aligned box (half extents = size) moving on a parametric path.

    linear:      center + velocity * frame
    sinusoidal:  center + amplitude * sin(2 pi frame / period + phase)
    """

    shape: Literal["sphere", "box"]
    size: Tuple[float, float, float]
    center: Tuple[float, float, float]
    motion: Literal["static", "linear", "sinusoidal"] = "static"
    velocity: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    amplitude: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    period: float = 32.0
    phase: float = 0.0
    color: Color = (200, 80, 60)

    @model_validator(mode="after")
    def _check(self) -> "Primitive":
        if min(self.size) <= 0:
            raise ValueError("primitive size must be positive")
        if self.period <= 0:
            raise ValueError("motion period must be positive")
        if any(not 0 <= c <= 255 for c in self.color):
            raise ValueError("color channels must be 8-bit")
        return self

    @property
    def half_height(self) -> float:
        return self.size[0] if self.shape == "sphere" else self.size[2]

    def position(self, frame: float) -> np.ndarray:
        base = np.asarray(self.center, dtype=np.float64)
        if self.motion == "linear":
            return base + frame * np.asarray(self.velocity)
        if self.motion == "sinusoidal":
            return base + np.asarray(self.amplitude) * np.sin(2.0 * np.pi * frame / self.period + self.phase)
        return base

    def extent(self, duration: int) -> Tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box swept by the primitive over frames [0, duration)."""
        if self.motion == "linear":
            ends = np.stack([self.position(0), self.position(duration - 1)])
            lo, hi = ends.min(axis=0), ends.max(axis=0)
        elif self.motion == "sinusoidal":
            swing = np.abs(np.asarray(self.amplitude))
            lo, hi = np.asarray(self.center) - swing, np.asarray(self.center) + swing
        else:
            lo = hi = np.asarray(self.center, dtype=np.float64)
        half = np.full(3, self.size[0]) if self.shape == "sphere" else np.asarray(self.size)
        return lo - half, hi + half

    def lowest_point(self, duration: int) -> float:
        return float(self.extent(duration)[0][2])


Bounds = Tuple[Tuple[float, float, float], Tuple[float, float, float]]


class SceneSpec(BaseModel):
    """Primitives standing on a checkered floor inside a closed room.

    The room spans [-room_half_extent, room_half_extent] on x and y and
    `room_height` above the floor. With room_half_extent=None the floor is an
    unbounded plane and rays that miss everything see the sky.
    """

    ground_height: float = 0.0
    checker_period: float = 0.5
    ground_colors: Tuple[Color, Color] = ((225, 225, 225), (70, 70, 70))
    sky_color: Color = (150, 180, 215)
    room_half_extent: Optional[float] = constants.ROOM_HALF_EXTENT
    room_height: float = constants.ROOM_HEIGHT
    wall_color: Color = (190, 180, 165)
    primitives: List[Primitive] = Field(min_length=1)
    duration: int = 33
    seed: int = 0
    lookat: Tuple[float, float, float] = (0.0, 0.0, 1.0)

    @model_validator(mode="after")
    def _check(self) -> "SceneSpec":
        if self.duration < 1:
            raise ValueError("scene duration must be >= 1 frame")
        if self.checker_period <= 0:
            raise ValueError("checker period must be positive")
        if self.room_half_extent is not None:
            if self.room_half_extent <= constants.CAMERA_CLEARANCE:
                raise ValueError(f"room half extent must exceed {constants.CAMERA_CLEARANCE} m")
            if self.room_height <= constants.CAMERA_MIN_HEIGHT + constants.CAMERA_CLEARANCE:
                raise ValueError("room is too low to hold a camera")
        for i, prim in enumerate(self.primitives):
            lo, hi = prim.extent(self.duration)
            if lo[2] < self.ground_height:
                raise ValueError(f"primitive {i} dips below the ground plane")
            if self.room_half_extent is None:
                continue
            if max(np.abs(lo[:2]).max(), np.abs(hi[:2]).max()) >= self.room_half_extent:
                raise ValueError(f"primitive {i} crosses a wall of the room")
            if hi[2] >= self.ground_height + self.room_height:
                raise ValueError(f"primitive {i} reaches the ceiling")
        return self

    def camera_bounds(self) -> Optional[Bounds]:
        """Box cameras must stay in: clear of walls and ceiling, CAMERA_MIN_HEIGHT above the floor."""
        if self.room_half_extent is None:
            return None
        r = self.room_half_extent - constants.CAMERA_CLEARANCE
        lo = (-r, -r, self.ground_height + constants.CAMERA_MIN_HEIGHT)
        hi = (r, r, self.ground_height + self.room_height - constants.CAMERA_CLEARANCE)
        return lo, hi


@dataclass
class CameraRecording:
    poses: List[Pose]
    rgb: List[np.ndarray] = field(default_factory=list)
    depth: List[DepthFrame] = field(default_factory=list)


@dataclass
class MultiCamSample:
    """Synchronized renders of one scene from several cameras sharing intrinsics."""

    spec: SceneSpec
    K: Intrinsics
    cameras: List[CameraRecording]
    source: int = 0

    def __post_init__(self) -> None:
        counts = {len(c.poses) for c in self.cameras}
        if len(counts) > 1:
            raise ValueError(f"cameras disagree on frame count: {sorted(counts)}")
        if not 0 <= self.source < len(self.cameras):
            raise ValueError(f"source camera {self.source} out of range")

    @property
    def n_frames(self) -> int:
        return len(self.cameras[0].poses) if self.cameras else 0

    @property
    def targets(self) -> List[int]:
        return [i for i in range(len(self.cameras)) if i != self.source]


@dataclass
class WarpPair:
    source: int
    target: int
    warped: List[RenderOutput]
