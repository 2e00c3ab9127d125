from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class WarpMesh:
    """World-space triangle mesh unprojected from one depth frame.

    vertices:   (V, 3) world positions, one per valid pixel in row-major order
    triangles:  (T, 3) vertex indices
    stretched:  (T,) True where a triangle spans a depth discontinuity
    """

    vertices: np.ndarray
    triangles: np.ndarray
    stretched: np.ndarray
    source_frame: int = 0

    def __post_init__(self) -> None:
        vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        stretched = np.asarray(self.stretched, dtype=bool).reshape(-1)
        if stretched.shape[0] != triangles.shape[0]:
            raise ValueError("one stretched flag per triangle is required")
        if triangles.size and (triangles.min() < 0 or triangles.max() >= vertices.shape[0]):
            raise ValueError("triangle index out of range")
        if triangles.size and np.any(
            (triangles[:, 0] == triangles[:, 1])
            | (triangles[:, 1] == triangles[:, 2])
            | (triangles[:, 0] == triangles[:, 2])
        ):
            raise ValueError("triangle with repeated vertex")
        for name, array in (("vertices", vertices), ("triangles", triangles), ("stretched", stretched)):
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @classmethod
    def empty(cls, source_frame: int = 0) -> "WarpMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=bool), source_frame)
