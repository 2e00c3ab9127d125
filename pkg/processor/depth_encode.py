"""Depth video to RGB: near/far clip, log-space normalization over the whole
sequence, colormap lookup, plus the random scale/shift augmentation applied
before encoding during dataset construction."""

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from colormaps.spectral_r import SPECTRAL_R, SPECTRAL_R_NAME
from models.frames import DepthFrame
from utils.constants import AUGMENT_RETRIES, AUGMENT_SCALE_RANGE, AUGMENT_SHIFT_RANGE, FAR, NEAR
from utils.errors import AugmentationError, NoDataError

logger = logging.getLogger(__name__)

# Normalized value given to pixels no triangle covered
UNCOVERED_VALUE = 1.0


@dataclass(frozen=True, eq=False)
class ColormapLUT:
    """256 8-bit RGB entries sampled at t = i / 255; lookups interpolate linearly between entries."""

    entries: np.ndarray
    name: str = "custom"

    def __post_init__(self) -> None:
        entries = np.asarray(self.entries, dtype=np.uint8).reshape(-1, 3)
        if entries.shape[0] != 256:
            raise ValueError(f"colormap needs 256 entries, got {entries.shape[0]}")
        if np.array_equal(entries[0], entries[-1]):
            raise ValueError("colormap endpoints must differ")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def spectral_r(cls) -> "ColormapLUT":
        return cls(np.array(SPECTRAL_R), SPECTRAL_R_NAME)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "ColormapLUT":
        """JSON list of 256 [r, g, b] triples."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(np.array(data), Path(path).stem)

    @property
    def unit(self) -> np.ndarray:
        return self.entries.astype(np.float64) / 255.0


@dataclass
class EncodedDepthVideo:
    frames: List[np.ndarray]
    norm_min: float
    norm_max: float
    augment: Optional[Tuple[float, float]] = None
    counters: Counter = field(default_factory=Counter)

    def sidecar(self) -> dict:
        return {
            "norm_min": self.norm_min,
            "norm_max": self.norm_max,
            "augment": None if self.augment is None else {"scale": self.augment[0], "shift": self.augment[1]},
            "clamped_pixels": int(self.counters.get("clamped", 0)),
        }


def sequence_range(depth_video: Sequence[DepthFrame], near: float = NEAR, far: float = FAR) -> Tuple[float, float]:
    """Min and max clipped depth over every valid pixel of the sequence."""
    lows, highs = [], []
    for frame in depth_video:
        if frame.n_valid:
            clipped = np.clip(frame.values[frame.valid], near, far)
            lows.append(float(clipped.min()))
            highs.append(float(clipped.max()))
    if not lows:
        raise NoDataError("depth video has no valid pixel")
    return min(lows), max(highs)


def normalize_log(
    depth_video: Sequence[DepthFrame],
    near: float = NEAR,
    far: float = FAR,
) -> List[np.ndarray]:
    """Clip to [near, far], then map log depth linearly so the sequence min -> 0 and max -> 1.

    A constant-depth sequence maps to 0.5. Invalid pixels map to the far end.
    """
    if not near > 0:
        raise ValueError("near must be positive")
    if not depth_video:
        raise NoDataError("empty depth video")
    d_min, d_max = sequence_range(depth_video, near, far)
    log_min, log_max = np.log(d_min), np.log(d_max)
    span = log_max - log_min

    out = []
    for frame in depth_video:
        clipped = np.clip(np.where(frame.valid, frame.values, d_max), near, far)
        if span > 0:
            value = (np.log(clipped) - log_min) / span
        else:
            value = np.full(frame.shape, 0.5)
        out.append(np.where(frame.valid, np.clip(value, 0.0, 1.0), UNCOVERED_VALUE))
    return out


def colorize(normalized: np.ndarray, lut: ColormapLUT, counters: Optional[Counter] = None) -> np.ndarray:
    """Piecewise-linear LUT lookup; returns float RGB in [0, 1] with shape (..., 3)."""
    values = np.asarray(normalized, dtype=np.float64)
    outside = ~((values >= 0.0) & (values <= 1.0))
    if np.any(outside):
        n = int(np.count_nonzero(outside))
        if counters is not None:
            counters["clamped"] += n
        logger.warning(f"colorize clamped {n} values outside [0, 1]")
        values = np.clip(np.nan_to_num(values, nan=0.0), 0.0, 1.0)

    position = values * 255.0
    low = np.minimum(np.floor(position).astype(np.int64), 254)
    frac = (position - low)[..., None]
    table = lut.unit
    return table[low] * (1.0 - frac) + table[low + 1] * frac


def to_uint8(rgb: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)


def decode(rgb: np.ndarray, lut: ColormapLUT) -> np.ndarray:
    """Invert `colorize`: nearest LUT entry, refined by projecting onto its two adjacent segments.

    Accepts float RGB in [0, 1] or uint8 RGB.
    """
    rgb = np.asarray(rgb)
    colors = rgb.astype(np.float64) / 255.0 if rgb.dtype == np.uint8 else rgb.astype(np.float64)
    flat = colors.reshape(-1, 3)
    blocks = [_decode_block(flat[i : i + 4096], lut.unit) for i in range(0, flat.shape[0], 4096)]
    out = np.concatenate(blocks) if blocks else np.zeros(0)
    return out.reshape(rgb.shape[:-1])


def _decode_block(flat: np.ndarray, table: np.ndarray) -> np.ndarray:
    nearest = np.argmin(((flat[:, None, :] - table[None, :, :]) ** 2).sum(axis=2), axis=1)
    best_t = nearest.astype(np.float64)
    best_d = ((flat - table[nearest]) ** 2).sum(axis=1)
    for start in (nearest - 1, nearest):
        a = np.clip(start, 0, 254)
        seg = table[a + 1] - table[a]
        length2 = (seg**2).sum(axis=1)
        f = np.clip(((flat - table[a]) * seg).sum(axis=1) / np.where(length2 > 0, length2, 1.0), 0.0, 1.0)
        dist = ((flat - (table[a] + f[:, None] * seg)) ** 2).sum(axis=1)
        better = dist < best_d
        best_t = np.where(better, a + f, best_t)
        best_d = np.where(better, dist, best_d)
    return best_t / 255.0


def augment_scale_shift(
    depth_video: Sequence[DepthFrame],
    rng_seed: int,
    scale_range: Tuple[float, float] = AUGMENT_SCALE_RANGE,
    shift_range: Tuple[float, float] = AUGMENT_SHIFT_RANGE,
    retries: int = AUGMENT_RETRIES,
) -> Tuple[List[DepthFrame], Tuple[float, float]]:
    """d' = a*d + c with (a, c) drawn once per sequence; draws that make any depth non-positive are resampled."""
    if scale_range[0] > scale_range[1] or shift_range[0] > shift_range[1]:
        raise ValueError("ranges must be ordered [lo, hi]")
    valid_mins = [float(f.values[f.valid].min()) for f in depth_video if f.n_valid]
    d_min = min(valid_mins) if valid_mins else 1.0

    rng = np.random.default_rng(rng_seed)
    for attempt in range(retries):
        a = float(rng.uniform(scale_range[0], scale_range[1]))
        c = float(rng.uniform(shift_range[0], shift_range[1]))
        if a * d_min + c > 0:
            break
        logger.debug(f"augment draw {attempt} rejected: a={a:.4f} c={c:.4f} d_min={d_min:.4f}")
    else:
        raise AugmentationError(
            f"no positive-depth draw in {retries} tries (scale={scale_range}, shift={shift_range}, d_min={d_min})"
        )

    out = [DepthFrame(np.where(f.valid, a * f.values + c, f.values), f.valid) for f in depth_video]
    return out, (a, c)


def encode_depth_video(
    depth_video: Sequence[DepthFrame],
    lut: Optional[ColormapLUT] = None,
    near: float = NEAR,
    far: float = FAR,
    augment_seed: Optional[int] = None,
    scale_range: Tuple[float, float] = AUGMENT_SCALE_RANGE,
    shift_range: Tuple[float, float] = AUGMENT_SHIFT_RANGE,
) -> EncodedDepthVideo:
    """Full encoder: optional augmentation, log normalization, colormap, 8-bit quantization."""
    lut = lut or ColormapLUT.spectral_r()
    augment = None
    if augment_seed is not None:
        depth_video, augment = augment_scale_shift(depth_video, augment_seed, scale_range, shift_range)

    d_min, d_max = sequence_range(depth_video, near, far)
    counters: Counter = Counter()
    frames = [to_uint8(colorize(v, lut, counters)) for v in normalize_log(depth_video, near, far)]
    return EncodedDepthVideo(frames, d_min, d_max, augment, counters)
