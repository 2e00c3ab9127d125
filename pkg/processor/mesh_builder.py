"""Depth frame to watertight world-space triangle mesh.

Every 2x2 quad of valid pixels becomes two triangles split along the
top-left -> bottom-right diagonal: (tl, tr, br) then (tl, br, bl). Triangles
whose corner depths differ by more than `stretch_threshold` (relative to the
nearest corner) are flagged as stretched; they stay in the mesh so they still
occlude, and the rasterizer keeps them out of the observed mask.
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from models.camera import Intrinsics, Pose
from models.frames import DepthFrame
from models.mesh import WarpMesh
from processor.geometry import pixel_centers, unproject
from utils.constants import STRETCH_THRESHOLD
from utils.errors import DimensionMismatchError, EmptyMeshError

logger = logging.getLogger(__name__)


def stretch_flags(corner_depths: np.ndarray, stretch_threshold: float) -> np.ndarray:
    """(T, 3) corner depths -> True where max |d_i - d_j| / min(d_i, d_j) exceeds the threshold."""
    dmax = corner_depths.max(axis=1)
    dmin = corner_depths.min(axis=1)
    return (dmax - dmin) / dmin > stretch_threshold


def build_mesh(
    depth: DepthFrame,
    K: Intrinsics,
    pose: Pose,
    stretch_threshold: float = STRETCH_THRESHOLD,
    source_frame: int = 0,
) -> WarpMesh:
    if (depth.width, depth.height) != (K.width, K.height):
        raise DimensionMismatchError(
            f"depth is {depth.width}x{depth.height} but intrinsics are {K.width}x{K.height}"
        )
    if stretch_threshold < 0:
        raise ValueError("stretch_threshold must be >= 0")

    valid = depth.valid
    index = np.full(depth.shape, -1, dtype=np.int64)
    index[valid] = np.arange(depth.n_valid, dtype=np.int64)

    tl, tr = index[:-1, :-1], index[:-1, 1:]
    bl, br = index[1:, :-1], index[1:, 1:]
    full = (tl >= 0) & (tr >= 0) & (bl >= 0) & (br >= 0)
    if not np.any(full):
        raise EmptyMeshError(f"frame {source_frame} has no 2x2 block of valid pixels")

    tl, tr, bl, br = tl[full], tr[full], bl[full], br[full]
    triangles = np.stack(
        [np.stack([tl, tr, br], axis=1), np.stack([tl, br, bl], axis=1)], axis=1
    ).reshape(-1, 3)

    u, v = pixel_centers(depth.width, depth.height)
    d = depth.values[valid]
    vertices = pose.apply(unproject(u[valid], v[valid], d, K))
    stretched = stretch_flags(d[triangles], stretch_threshold)

    logger.debug(
        f"mesh frame={source_frame} vertices={vertices.shape[0]} triangles={triangles.shape[0]} "
        f"stretched={int(np.count_nonzero(stretched))}"
    )
    return WarpMesh(vertices, triangles, stretched, source_frame)


def write_obj(mesh: WarpMesh, path: Union[str, Path]) -> None:
    """Debug dump; stretched triangles go to their own group."""
    lines = [f"# frame {mesh.source_frame}"]
    lines += [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in mesh.vertices]
    for name, select in (("observed", ~mesh.stretched), ("stretched", mesh.stretched)):
        lines.append(f"g {name}")
        lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.triangles[select]]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
