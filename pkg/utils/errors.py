"""Exception types raised across the pipeline."""

from typing import Any, Dict, Optional


class DepthWarpError(Exception):
    """Base class for every error raised by this project."""


class BehindCameraError(DepthWarpError, ValueError):
    pass


class NonPositiveDepthError(DepthWarpError, ValueError):
    pass


class DegenerateFitError(DepthWarpError, ValueError):
    pass


class NoDataError(DepthWarpError, ValueError):
    pass


class EmptyMeshError(DepthWarpError, ValueError):
    pass


class LengthMismatchError(DepthWarpError, ValueError):
    pass


class DimensionMismatchError(DepthWarpError, ValueError):
    pass


class AugmentationError(DepthWarpError, RuntimeError):
    pass


class SamplingError(DepthWarpError, RuntimeError):
    """Retry budget exhausted while sampling; `diagnostics` says which checks failed."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class PFMFormatError(DepthWarpError, ValueError):
    pass


class BitDepthError(DepthWarpError, ValueError):
    pass


class ManifestError(DepthWarpError, ValueError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(f"{message}: {path}" if path else message)
        self.path = path


def trim_exception(e: BaseException) -> str:
    return str(e).strip().split("\n")[-1]
