from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

ORTHONORMAL_TOL = 1e-9


def _frozen(array: Any, shape: tuple) -> np.ndarray:
    out = np.array(array, dtype=np.float64).reshape(shape)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels. Pixel (col, row) has its center at (col + 0.5, row + 0.5)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside {self.width}x{self.height} image"
            )

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "width": int(self.width),
            "height": int(self.height),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Intrinsics":
        return cls(
            fx=float(data["fx"]),
            fy=float(data["fy"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            width=int(data["width"]),
            height=int(data["height"]),
        )


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid camera-to-world transform; camera axes are x-right, y-down, z-forward."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = _frozen(self.rotation, (3, 3))
        translation = _frozen(self.translation, (3,))
        if not np.all(np.isfinite(rotation)) or not np.all(np.isfinite(translation)):
            raise ValueError("pose contains non-finite values")
        if np.max(np.abs(rotation.T @ rotation - np.eye(3))) > ORTHONORMAL_TOL:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise ValueError("rotation determinant is not +1")
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @property
    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    @property
    def center(self) -> np.ndarray:
        return self.translation

    def inverse(self) -> "Pose":
        rt = self.rotation.T
        return Pose(rt, -(rt @ self.translation))

    def compose(self, other: "Pose") -> "Pose":
        """self * other: apply `other` first, then `self`."""
        return Pose(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)

    def apply(self, points: Any) -> np.ndarray:
        """Camera-frame points to world frame. Written per component so batch and single calls agree bitwise."""
        p = np.asarray(points, dtype=np.float64)
        r, t = self.rotation, self.translation
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        return np.stack(
            [
                r[0, 0] * x + r[0, 1] * y + r[0, 2] * z + t[0],
                r[1, 0] * x + r[1, 1] * y + r[1, 2] * z + t[1],
                r[2, 0] * x + r[2, 1] * y + r[2, 2] * z + t[2],
            ],
            axis=-1,
        )

    def apply_inverse(self, points: Any) -> np.ndarray:
        """World-frame points to camera frame."""
        p = np.asarray(points, dtype=np.float64)
        r, t = self.rotation, self.translation
        x, y, z = p[..., 0] - t[0], p[..., 1] - t[1], p[..., 2] - t[2]
        return np.stack(
            [
                r[0, 0] * x + r[1, 0] * y + r[2, 0] * z,
                r[0, 1] * x + r[1, 1] * y + r[2, 1] * z,
                r[0, 2] * x + r[1, 2] * y + r[2, 2] * z,
            ],
            axis=-1,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rotation": [float(v) for v in self.rotation.reshape(-1)],
            "translation": [float(v) for v in self.translation],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Pose":
        return cls(np.asarray(data["rotation"], dtype=np.float64).reshape(3, 3), data["translation"])
