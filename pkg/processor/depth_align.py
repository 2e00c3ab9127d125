"""Global scale/shift alignment of relative depth to metric depth in inverse-depth space.

Solves  min_{s,b}  sum_t sum_px ( 1/X - (s/D + b) )^2  in closed form. Per-frame
partial sums are reduced with numpy's pairwise summation and merged across frames
in frame order with compensated summation, so the result does not depend on how
frames are scheduled.
"""

import logging
import math
from typing import List, Sequence, Tuple

import numpy as np

from models.frames import DepthFrame
from models.results import AlignmentResult
from utils.constants import ALIGN_MAX_DEPTH, ALIGN_MIN_DEPTH
from utils.errors import DegenerateFitError, LengthMismatchError, NoDataError
from utils.helper_functions import KahanSum, ordered_map

logger = logging.getLogger(__name__)


def _usable(frame: DepthFrame) -> np.ndarray:
    return frame.valid & (frame.values > ALIGN_MIN_DEPTH) & (frame.values < ALIGN_MAX_DEPTH)


def _inverse_pairs(relative: DepthFrame, metric: DepthFrame) -> Tuple[np.ndarray, np.ndarray, int]:
    if relative.shape != metric.shape:
        raise LengthMismatchError(f"frame shapes differ: {relative.shape} vs {metric.shape}")
    both_valid = relative.valid & metric.valid
    used = _usable(relative) & _usable(metric)
    x = 1.0 / relative.values[used]
    y = 1.0 / metric.values[used]
    return x, y, int(np.count_nonzero(both_valid & ~used))


def _merge(partials: Sequence[Sequence[float]]) -> List[float]:
    sums = [KahanSum() for _ in partials[0]]
    for row in partials:
        for acc, value in zip(sums, row):
            acc.add(value)
    return [acc.total for acc in sums]


def fit_scale_shift(
    relative: Sequence[DepthFrame],
    metric: Sequence[DepthFrame],
    threads: int = 1,
) -> AlignmentResult:
    """Fit one (s, b) pair for the whole sequence."""
    if len(relative) != len(metric):
        raise LengthMismatchError(f"sequence lengths differ: {len(relative)} vs {len(metric)}")
    if not relative:
        raise NoDataError("empty sequence")

    pairs = ordered_map(lambda t: _inverse_pairs(relative[t], metric[t]), range(len(relative)), threads)
    n_excluded = sum(p[2] for p in pairs)

    first = _merge([(float(x.size), float(np.sum(x)), float(np.sum(y))) for x, y, _ in pairs])
    n, sum_x, sum_y = first
    if n == 0:
        raise NoDataError("no pixel is valid in both relative and metric depth")

    lows = [float(x.min()) for x, _, _ in pairs if x.size]
    highs = [float(x.max()) for x, _, _ in pairs if x.size]
    if min(lows) == max(highs):
        raise DegenerateFitError("relative depth has fewer than 2 distinct inverse-depth values")

    mean_x, mean_y = sum_x / n, sum_y / n
    sxx, sxy = _merge(
        [
            (float(np.sum((x - mean_x) ** 2)), float(np.sum((x - mean_x) * (y - mean_y))))
            for x, y, _ in pairs
        ]
    )
    if sxx <= 0:
        raise DegenerateFitError("inverse relative depth has zero variance")

    s = sxy / sxx
    b = mean_y - s * mean_x
    (sse,) = _merge([(float(np.sum((y - (s * x + b)) ** 2)),) for x, y, _ in pairs])
    residual = math.sqrt(max(sse, 0.0) / n)

    if n_excluded:
        logger.info(f"alignment excluded {n_excluded} pixels outside the usable depth window")
    return AlignmentResult(s=s, b=b, residual=residual, n_pixels=int(n), n_excluded=n_excluded)


def apply_alignment(frame: DepthFrame, result: AlignmentResult) -> DepthFrame:
    """Map relative depth through 1 / (s/d + b); pixels with non-positive inverse depth become invalid."""
    safe = np.where(frame.valid, frame.values, 1.0)
    inverse = result.s / safe + result.b
    valid = frame.valid & (inverse > 0)
    with np.errstate(divide="ignore"):
        depth = np.where(valid, 1.0 / np.where(valid, inverse, 1.0), 0.0)
    return DepthFrame(depth, valid)


def align_sequence(frames: Sequence[DepthFrame], result: AlignmentResult) -> List[DepthFrame]:
    return [apply_alignment(frame, result) for frame in frames]
