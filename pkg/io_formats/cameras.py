"""Per-frame camera files: JSON list of {frame, rotation, translation, intrinsics, convention}.

Rotation is the camera-to-world matrix flattened row-major (9 floats).
"""

import json
import logging
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from models.camera import ORTHONORMAL_TOL, Intrinsics, Pose
from utils.constants import CAMERA_CONVENTION
from utils.errors import LengthMismatchError, ManifestError

logger = logging.getLogger(__name__)


def nearest_rotation(matrix: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(matrix)
    S = np.eye(3)
    S[2, 2] = np.sign(np.linalg.det(U @ Vt))
    return U @ S @ Vt


def _pose(entry: dict, path: Union[str, Path]) -> Pose:
    rotation = np.asarray(entry["rotation"], dtype=np.float64).reshape(3, 3)
    drift = np.max(np.abs(rotation.T @ rotation - np.eye(3)))
    if drift > ORTHONORMAL_TOL or abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
        if drift > 1e-3:
            raise ManifestError(f"frame {entry.get('frame')} rotation is far from orthonormal", str(path))
        rotation = nearest_rotation(rotation)
    return Pose(rotation, entry["translation"])


def write_cameras(path: Union[str, Path], poses: Sequence[Pose], K: Intrinsics) -> None:
    entries = [
        {"frame": i, **pose.to_dict(), "intrinsics": K.to_dict(), "convention": CAMERA_CONVENTION}
        for i, pose in enumerate(poses)
    ]
    Path(path).write_text(json.dumps(entries, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def read_cameras(path: Union[str, Path]) -> Tuple[List[Pose], Intrinsics]:
    """Poses in frame order plus the shared intrinsics; rotations are re-orthonormalized when they drifted."""
    try:
        entries = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ManifestError(f"unreadable camera file ({e})", str(path)) from e
    if not isinstance(entries, list) or not entries:
        raise ManifestError("camera file must hold a non-empty list", str(path))

    entries = sorted(entries, key=lambda e: int(e["frame"]))
    if [int(e["frame"]) for e in entries] != list(range(len(entries))):
        raise ManifestError("camera frames are not contiguous from 0", str(path))
    for entry in entries:
        convention = entry.get("convention", CAMERA_CONVENTION)
        if convention != CAMERA_CONVENTION:
            raise ManifestError(f"unsupported camera convention {convention!r}", str(path))

    K = Intrinsics.from_dict(entries[0]["intrinsics"])
    if any(Intrinsics.from_dict(e["intrinsics"]) != K for e in entries[1:]):
        logger.warning(f"{path}: intrinsics vary per frame; using frame 0")
    return [_pose(e, path) for e in entries], K


def check_camera_count(poses: Sequence[Pose], n_frames: int, path: Union[str, Path]) -> None:
    if len(poses) != n_frames:
        raise LengthMismatchError(f"{path}: {len(poses)} cameras for {n_frames} frames")
