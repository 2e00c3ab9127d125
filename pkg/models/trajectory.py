from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, model_validator

from utils import constants

INTERPOLATION = "catmull_rom/arc_length/smoothstep"


class TrajectoryRanges(BaseModel):
    """Every sampling range used for camera trajectories (meters and degrees)."""

    distance: Tuple[float, float] = constants.START_DISTANCE_RANGE
    pitch: Tuple[float, float] = constants.START_PITCH_RANGE
    yaw: Tuple[float, float] = constants.START_YAW_RANGE
    front_arc: float = constants.FRONT_ARC
    path_length: Tuple[float, float] = constants.PATH_LENGTH_RANGE
    waypoints: Tuple[int, int] = constants.WAYPOINT_COUNT_RANGE
    max_pitch_span: float = constants.MAX_PITCH_SPAN
    max_yaw_span: float = constants.MAX_YAW_SPAN
    max_step: float = constants.MAX_STEP_ROTATION
    min_lookat_distance: float = constants.MIN_LOOKAT_DISTANCE
    retries: int = constants.TRAJECTORY_RETRIES
    # world-space box (lo, hi) every camera position must stay in; None leaves positions free
    bounds: Optional[Tuple[Tuple[float, float, float], Tuple[float, float, float]]] = None

    @model_validator(mode="after")
    def _check(self) -> "TrajectoryRanges":
        for name in ("distance", "pitch", "yaw", "path_length", "waypoints"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} range is not ordered: {lo} > {hi}")
        if self.distance[0] <= 0:
            raise ValueError("start distance must be positive")
        if max(abs(self.yaw[0]), abs(self.yaw[1])) > self.front_arc:
            raise ValueError(f"yaw range {self.yaw} leaves the front arc of +/-{self.front_arc} degrees")
        if not (1 <= self.waypoints[0] and self.waypoints[1] <= 3):
            raise ValueError("waypoint count must lie in [1, 3]")
        if self.retries < 1:
            raise ValueError("retries must be >= 1")
        if self.bounds is not None and any(lo >= hi for lo, hi in zip(*self.bounds)):
            raise ValueError(f"camera bounds are empty: {self.bounds}")
        return self


@dataclass
class TrajectorySpec:
    lookat: np.ndarray
    start: np.ndarray
    waypoints: List[np.ndarray]
    n_frames: int
    seed: int
    ranges: Dict[str, Any]
    static: bool = False
    path_length: float = 0.0
    interpolation: str = INTERPOLATION
    attempts: int = 1
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.n_frames < 2:
            raise ValueError("a trajectory needs at least 2 frames")
        if not 1 <= len(self.waypoints) <= 3:
            raise ValueError("a trajectory carries 1 to 3 waypoints")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lookat": [float(v) for v in self.lookat],
            "start": [float(v) for v in self.start],
            "waypoints": [[float(v) for v in w] for w in self.waypoints],
            "n_frames": int(self.n_frames),
            "seed": int(self.seed),
            "ranges": self.ranges,
            "static": bool(self.static),
            "path_length": float(self.path_length),
            "interpolation": self.interpolation,
            "attempts": int(self.attempts),
            **self.extra,
        }
