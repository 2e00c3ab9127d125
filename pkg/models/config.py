from typing import Literal, Optional, Tuple

from pydantic import BaseModel, model_validator

from utils import constants
from utils.helper_functions import config_hash


class PipelineConfig(BaseModel):
    """Every setting that can change pipeline output. Thread count is not one of them."""

    near: float = constants.NEAR
    far: float = constants.FAR
    stretch_threshold: float = constants.STRETCH_THRESHOLD
    frames: int = constants.FRAMES
    resolution: Tuple[int, int] = (constants.HEIGHT, constants.WIDTH)
    seed: int = 0
    augment: bool = False
    augment_scale: Tuple[float, float] = constants.AUGMENT_SCALE_RANGE
    augment_shift: Tuple[float, float] = constants.AUGMENT_SHIFT_RANGE
    align: Literal["none", "sim7"] = "none"
    relative_is_disparity: bool = False
    focal: Optional[float] = None

    @model_validator(mode="after")
    def _check(self) -> "PipelineConfig":
        if not self.near > 0:
            raise ValueError("near must be positive")
        if not self.far > self.near:
            raise ValueError("far must exceed near")
        if self.stretch_threshold < 0:
            raise ValueError("stretch_threshold must be >= 0")
        if self.frames < 1 or min(self.resolution) < 1:
            raise ValueError("frames and resolution must be positive")
        for name in ("augment_scale", "augment_shift"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is not ordered: {lo} > {hi}")
        if self.focal is not None and self.focal <= 0:
            raise ValueError("focal must be positive")
        return self

    @property
    def augment_seed(self) -> Optional[int]:
        return self.seed if self.augment else None

    def config_hash(self) -> str:
        return config_hash(self.model_dump(mode="json"))
