from dataclasses import dataclass
from typing import Any, Optional

import numpy as np


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class DepthFrame:
    """Row-major metric depth grid (meters along camera z) with a validity mask.

    `values` keeps whatever was stored, including invalid samples; only pixels
    with `valid` set take part in any computation.
    """

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        valid = np.array(self.valid, dtype=bool)
        if values.ndim != 2 or values.shape != valid.shape:
            raise ValueError(f"depth {values.shape} and mask {valid.shape} must be matching 2-D grids")
        with np.errstate(invalid="ignore"):
            valid &= np.isfinite(values) & (values > 0)
        object.__setattr__(self, "values", _readonly(values))
        object.__setattr__(self, "valid", _readonly(valid))

    @classmethod
    def from_array(cls, values: Any, valid: Optional[Any] = None) -> "DepthFrame":
        values = np.asarray(values, dtype=np.float64)
        if valid is None:
            valid = np.ones(values.shape, dtype=bool)
        return cls(values, valid)

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def shape(self) -> tuple:
        return self.values.shape

    @property
    def n_valid(self) -> int:
        return int(np.count_nonzero(self.valid))


@dataclass(frozen=True, eq=False)
class MaskFrame:
    """Per-pixel {0, 1} occlusion mask; 1 means reliably observed."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values)
        if values.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {values.shape}")
        object.__setattr__(self, "values", _readonly((values != 0).astype(np.uint8)))

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def as_bool(self) -> np.ndarray:
        return self.values.astype(bool)


@dataclass(frozen=True, eq=False)
class RenderOutput:
    """Rasterized depth buffer and occlusion mask for one target view.

    `winner` holds the z-buffer winning triangle index per pixel (-1 where uncovered).
    """

    depth: DepthFrame
    mask: MaskFrame
    winner: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.depth.shape != self.mask.shape:
            raise ValueError("depth and mask dimensions differ")
        if np.any(self.mask.as_bool() & ~self.depth.valid):
            raise ValueError("mask marks pixels without valid depth")
