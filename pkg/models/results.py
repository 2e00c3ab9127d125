from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional


@dataclass(frozen=True)
class AlignmentResult:
    """Global inverse-depth fit 1/X ~ s/D + b over a whole sequence."""

    s: float
    b: float
    residual: float
    n_pixels: int
    n_excluded: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "AlignmentResult":
        return cls(
            s=float(data["s"]),
            b=float(data["b"]),
            residual=float(data.get("residual", 0.0)),
            n_pixels=int(data.get("n_pixels", 0)),
            n_excluded=int(data.get("n_excluded", 0)),
        )


# Filled by external tools (face identity, pixel matching, CLIP, VBench); never computed here.
NEURAL_METRIC_FIELDS = ("rs", "ifs", "mat_pix", "clip_v", "vbench")


@dataclass
class CameraAccuracyReport:
    rot_err: float
    trans_err: float
    cam_mc: float
    n_frames: int
    alignment_mode: str = "none"
    units: str = "m"
    per_frame: Dict[str, List[float]] = field(default_factory=dict)
    similarity: Optional[Dict[str, Any]] = None
    neural: Dict[str, Optional[float]] = field(
        default_factory=lambda: {name: None for name in NEURAL_METRIC_FIELDS}
    )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
