"""Camera accuracy between a ground-truth and an estimated pose sequence.

All three metrics are sums over frames: rotation angle (radians), translation
distance, and the Frobenius norm of the 3x4 [R|T] difference. Estimated
trajectories from monocular pipelines can optionally be similarity-aligned
(rotation, translation, uniform scale) onto the ground truth first.
"""

import logging
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

from models.camera import Pose
from models.results import CameraAccuracyReport
from utils.errors import DegenerateFitError, LengthMismatchError
from utils.helper_functions import KahanSum

logger = logging.getLogger(__name__)

ALIGN_MODES = {"none": "none", "sim7": "similarity"}
UNIT_SCALE = {"m": 1.0, "cm": 100.0}


def _check_lengths(gt: Sequence[Pose], est: Sequence[Pose]) -> None:
    if len(gt) != len(est):
        raise LengthMismatchError(f"ground truth has {len(gt)} poses, estimate has {len(est)}")


def rotation_errors(gt: Sequence[Pose], est: Sequence[Pose]) -> List[float]:
    _check_lengths(gt, est)
    out = []
    for g, e in zip(gt, est):
        cos = 0.5 * (float(np.trace(e.rotation @ g.rotation.T)) - 1.0)
        out.append(math.acos(min(1.0, max(-1.0, cos))))
    return out


def translation_errors(gt: Sequence[Pose], est: Sequence[Pose], scale: float = 1.0) -> List[float]:
    _check_lengths(gt, est)
    return [float(np.linalg.norm(scale * (e.translation - g.translation))) for g, e in zip(gt, est)]


def cam_mc_terms(gt: Sequence[Pose], est: Sequence[Pose], scale: float = 1.0) -> List[float]:
    _check_lengths(gt, est)
    out = []
    for g, e in zip(gt, est):
        diff = np.hstack([e.rotation - g.rotation, scale * (e.translation - g.translation)[:, None]])
        out.append(float(np.linalg.norm(diff, "fro")))
    return out


def _total(values: Sequence[float]) -> float:
    acc = KahanSum()
    for v in values:
        acc.add(v)
    return acc.total


def rot_err(gt: Sequence[Pose], est: Sequence[Pose]) -> float:
    """Accumulated rotation error in radians."""
    return _total(rotation_errors(gt, est))


def trans_err(gt: Sequence[Pose], est: Sequence[Pose]) -> float:
    return _total(translation_errors(gt, est))


def cam_mc(gt: Sequence[Pose], est: Sequence[Pose]) -> float:
    return _total(cam_mc_terms(gt, est))


def umeyama(source: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray, np.ndarray, int]:
    """Least-squares similarity (s, R, t) with s * R @ source_i + t ~ target_i.

    Returns the rank of the cross-covariance alongside; below 2 the rotation is
    not unique and the SVD's orthogonal fit is used as is.
    """
    mu_s, mu_t = source.mean(axis=0), target.mean(axis=0)
    xs, xt = source - mu_s, target - mu_t
    var_s = float(np.mean(np.sum(xs**2, axis=1)))
    if var_s == 0.0:
        raise DegenerateFitError("estimated camera centers all coincide; scale is undefined")

    cov = xt.T @ xs / source.shape[0]
    U, D, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    s = float(np.trace(np.diag(D) @ S)) / var_s
    t = mu_t - s * R @ mu_s
    rank = int(np.sum(D > 1e-12 * max(float(D[0]), 1e-300)))
    return s, R, t, rank


def similarity_align(gt: Sequence[Pose], est: Sequence[Pose]) -> Tuple[List[Pose], Dict[str, object]]:
    """Map the estimated trajectory onto the ground truth's frame and scale."""
    _check_lengths(gt, est)
    if len(gt) < 3:
        raise ValueError(f"similarity alignment needs at least 3 frames, got {len(gt)}")
    source = np.stack([e.translation for e in est])
    target = np.stack([g.translation for g in gt])
    s, R, t, rank = umeyama(source, target)
    if rank < 2:
        logger.warning(f"similarity alignment is rank {rank} (collinear camera centers); rotation is not unique")

    aligned = [Pose(R @ e.rotation, s * (R @ e.translation) + t) for e in est]
    info = {"scale": s, "rotation": [float(v) for v in R.reshape(-1)], "translation": [float(v) for v in t], "rank": rank}
    return aligned, info


def evaluate(
    gt: Sequence[Pose],
    est: Sequence[Pose],
    align: str = "none",
    units: str = "m",
) -> CameraAccuracyReport:
    if align not in ALIGN_MODES:
        raise ValueError(f"align must be one of {sorted(ALIGN_MODES)}, got {align!r}")
    if units not in UNIT_SCALE:
        raise ValueError(f"units must be one of {sorted(UNIT_SCALE)}, got {units!r}")
    _check_lengths(gt, est)

    similarity = None
    if align == "sim7":
        est, similarity = similarity_align(gt, est)

    scale = UNIT_SCALE[units]
    rot = rotation_errors(gt, est)
    trans = translation_errors(gt, est, scale)
    mc = cam_mc_terms(gt, est, scale)
    return CameraAccuracyReport(
        rot_err=_total(rot),
        trans_err=_total(trans),
        cam_mc=_total(mc),
        n_frames=len(gt),
        alignment_mode=ALIGN_MODES[align],
        units=units,
        per_frame={"rot_err": rot, "trans_err": trans, "cam_mc": mc},
        similarity=similarity,
    )
