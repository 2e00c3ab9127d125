"""Deterministic z-buffer rasterizer for warp meshes.

Coverage is tested at pixel centers with edge functions, depth is interpolated
perspective-correctly (linear in 1/z), and triangles crossing the near plane are
clipped rather than dropped. Fragments are generated in bounded chunks and
resolved with order-independent reductions, so the output never depends on
chunking or thread count.
"""

import logging
from typing import List, Sequence, Tuple

import numpy as np

from models.camera import Intrinsics, Pose
from models.frames import DepthFrame, MaskFrame, RenderOutput
from models.mesh import WarpMesh
from processor.mesh_builder import build_mesh
from utils.constants import FAR, NEAR, STRETCH_THRESHOLD
from utils.errors import LengthMismatchError
from utils.helper_functions import ordered_map

logger = logging.getLogger(__name__)

FRAGMENT_BUDGET = 1 << 20
BARY_EPS = 1e-7
BBOX_SLACK = 1e-7
TIE_TOL = 1e-9


def _cut(inner: np.ndarray, outer: np.ndarray, near: float) -> np.ndarray:
    """Point where segment inner -> outer crosses z = near."""
    t = (near - inner[:, 2]) / (outer[:, 2] - inner[:, 2])
    point = inner + t[:, None] * (outer - inner)
    point[:, 2] = near
    return point


def _clip_near(
    tris: np.ndarray, ids: np.ndarray, flags: np.ndarray, near: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Clip (T, 3, 3) camera-space triangles that straddle the near plane."""
    inside = tris[:, :, 2] > near
    count = inside.sum(axis=1)
    out_tris: List[np.ndarray] = [tris[count == 3]]
    out_ids: List[np.ndarray] = [ids[count == 3]]
    out_flags: List[np.ndarray] = [flags[count == 3]]

    one = count == 1
    if np.any(one):
        q, rows = tris[one], np.arange(int(np.count_nonzero(one)))
        i = np.argmax(inside[one], axis=1)
        pi, pj, pk = q[rows, i], q[rows, (i + 1) % 3], q[rows, (i + 2) % 3]
        out_tris.append(np.stack([pi, _cut(pi, pj, near), _cut(pi, pk, near)], axis=1))
        out_ids.append(ids[one])
        out_flags.append(flags[one])

    two = count == 2
    if np.any(two):
        q, rows = tris[two], np.arange(int(np.count_nonzero(two)))
        o = np.argmin(inside[two], axis=1)
        po, p1, p2 = q[rows, o], q[rows, (o + 1) % 3], q[rows, (o + 2) % 3]
        c1, c2 = _cut(p1, po, near), _cut(p2, po, near)
        out_tris += [np.stack([c1, p1, p2], axis=1), np.stack([c1, p2, c2], axis=1)]
        out_ids += [ids[two], ids[two]]
        out_flags += [flags[two], flags[two]]

    return np.concatenate(out_tris), np.concatenate(out_ids), np.concatenate(out_flags)


def _edge(au, av, bu, bv, pu, pv):
    return (bu - au) * (pv - av) - (bv - av) * (pu - au)


def _fragments(
    u: np.ndarray,
    v: np.ndarray,
    z: np.ndarray,
    area: np.ndarray,
    box: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray],
    width: int,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Covered pixels of a batch of projected triangles: (local triangle, pixel index, depth)."""
    c0, c1, r0, r1 = box
    bw = c1 - c0 + 1
    counts = bw * (r1 - r0 + 1)
    total = int(counts.sum())
    local = np.repeat(np.arange(counts.shape[0]), counts)
    offset = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    col = c0[local] + offset % bw[local]
    row = r0[local] + offset // bw[local]
    pu, pv = col + 0.5, row + 0.5

    tu, tv, tz, ta = u[local], v[local], z[local], area[local]
    l0 = _edge(tu[:, 1], tv[:, 1], tu[:, 2], tv[:, 2], pu, pv) / ta
    l1 = _edge(tu[:, 2], tv[:, 2], tu[:, 0], tv[:, 0], pu, pv) / ta
    l2 = _edge(tu[:, 0], tv[:, 0], tu[:, 1], tv[:, 1], pu, pv) / ta
    hit = (l0 >= -BARY_EPS) & (l1 >= -BARY_EPS) & (l2 >= -BARY_EPS)

    inv_z = l0[hit] / tz[hit, 0] + l1[hit] / tz[hit, 1] + l2[hit] / tz[hit, 2]
    return local[hit], row[hit] * width + col[hit], 1.0 / inv_z


def _empty_output(K: Intrinsics) -> RenderOutput:
    shape = (K.height, K.width)
    return RenderOutput(
        DepthFrame(np.zeros(shape), np.zeros(shape, dtype=bool)),
        MaskFrame(np.zeros(shape, dtype=np.uint8)),
        np.full(shape, -1, dtype=np.int64),
    )


def render(
    mesh: WarpMesh,
    K: Intrinsics,
    target_pose: Pose,
    near: float = NEAR,
    far: float = FAR,
) -> RenderOutput:
    """Rasterize `mesh` into the target camera: z-buffer depth, occlusion mask and winning triangle."""
    if not near > 0 or not far > near:
        raise ValueError(f"need 0 < near < far, got near={near} far={far}")
    if mesh.n_triangles == 0:
        return _empty_output(K)

    cam = target_pose.apply_inverse(mesh.vertices)
    tris, ids, flags = _clip_near(
        cam[mesh.triangles], np.arange(mesh.n_triangles, dtype=np.int64), mesh.stretched, near
    )
    if tris.shape[0] == 0:
        return _empty_output(K)

    z = tris[:, :, 2]
    u = K.fx * tris[:, :, 0] / z + K.cx
    v = K.fy * tris[:, :, 1] / z + K.cy
    area = _edge(u[:, 0], v[:, 0], u[:, 1], v[:, 1], u[:, 2], v[:, 2])

    W, H = K.width, K.height
    with np.errstate(invalid="ignore"):
        c0 = np.maximum(np.ceil(u.min(axis=1) - 0.5 - BBOX_SLACK), 0)
        c1 = np.minimum(np.floor(u.max(axis=1) - 0.5 + BBOX_SLACK), W - 1)
        r0 = np.maximum(np.ceil(v.min(axis=1) - 0.5 - BBOX_SLACK), 0)
        r1 = np.minimum(np.floor(v.max(axis=1) - 0.5 + BBOX_SLACK), H - 1)
    keep = (area != 0) & np.isfinite(area) & (c1 >= c0) & (r1 >= r0)
    if not np.any(keep):
        return _empty_output(K)

    u, v, z, area, ids, flags = u[keep], v[keep], z[keep], area[keep], ids[keep], flags[keep]
    box = tuple(b[keep].astype(np.int64) for b in (c0, c1, r0, r1))
    counts = (box[1] - box[0] + 1) * (box[3] - box[2] + 1)
    ends = np.cumsum(counts)

    zbuf = np.full(W * H, np.inf)
    chunks = []
    start = 0
    while start < ids.shape[0]:
        base = ends[start - 1] if start else 0
        stop = max(int(np.searchsorted(ends, base + FRAGMENT_BUDGET, side="right")), start + 1)
        sl = slice(start, stop)
        local, pix, depth = _fragments(u[sl], v[sl], z[sl], area[sl], tuple(b[sl] for b in box), W)
        np.minimum.at(zbuf, pix, depth)
        chunks.append((pix, depth, ids[sl][local], flags[sl][local]))
        start = stop

    winner = np.full(W * H, np.iinfo(np.int64).max, dtype=np.int64)
    observed = np.zeros(W * H, dtype=bool)
    for pix, depth, tri, stretched in chunks:
        tied = depth <= zbuf[pix] * (1.0 + TIE_TOL)
        np.minimum.at(winner, pix[tied], tri[tied])
        observed[pix[tied & ~stretched]] = True

    covered = np.isfinite(zbuf)
    in_range = covered & (zbuf >= near) & (zbuf <= far)
    depth_out = np.where(covered, zbuf, 0.0).reshape(H, W)
    mask_out = (observed & in_range).reshape(H, W)
    winner = np.where(covered, winner, -1).reshape(H, W)
    return RenderOutput(DepthFrame(depth_out, covered.reshape(H, W)), MaskFrame(mask_out), winner)


def warp_depth_sequence(
    depth_video: Sequence[DepthFrame],
    K: Intrinsics,
    source_poses: Sequence[Pose],
    target_poses: Sequence[Pose],
    stretch_threshold: float = STRETCH_THRESHOLD,
    near: float = NEAR,
    far: float = FAR,
    threads: int = 1,
) -> List[RenderOutput]:
    """Frame t: mesh from source depth/pose t, rendered under target pose t."""
    n = len(depth_video)
    if len(source_poses) != n or len(target_poses) != n:
        raise LengthMismatchError(
            f"depth={n} source_poses={len(source_poses)} target_poses={len(target_poses)}"
        )

    def _warp(t: int) -> RenderOutput:
        mesh = build_mesh(depth_video[t], K, source_poses[t], stretch_threshold, source_frame=t)
        return render(mesh, K, target_poses[t], near, far)

    return ordered_map(_warp, range(n), threads, desc="warp")
