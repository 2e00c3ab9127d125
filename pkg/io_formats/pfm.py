"""Single-channel PFM ("Pf") depth files.

Rows are stored bottom-to-top. A negative scale field means little-endian
float32, positive means big-endian. Files are always written little-endian.
"""

from pathlib import Path
from typing import Tuple, Union

import numpy as np

from models.frames import DepthFrame
from utils.errors import PFMFormatError

MAX_SIDE = 1 << 16


def _read_line(handle) -> str:
    line = handle.readline()
    if not line.endswith(b"\n"):
        raise PFMFormatError("truncated PFM header")
    try:
        return line.decode("ascii").strip()
    except UnicodeDecodeError as e:
        raise PFMFormatError(f"PFM header is not ASCII: {e}") from e


def read_pfm_header(handle) -> Tuple[int, int, str]:
    """Parse the header; returns (width, height, numpy dtype string)."""
    tag = _read_line(handle)
    if tag == "PF":
        raise PFMFormatError("color PFM ('PF') is not supported; depth files must be 'Pf'")
    if tag != "Pf":
        raise PFMFormatError(f"not a PFM file (tag {tag!r})")
    dims = _read_line(handle).split()
    if len(dims) != 2:
        raise PFMFormatError(f"bad PFM dimension line: {' '.join(dims)!r}")
    try:
        width, height = int(dims[0]), int(dims[1])
        scale = float(_read_line(handle))
    except ValueError as e:
        raise PFMFormatError(f"bad PFM header field: {e}") from e
    if not (0 < width <= MAX_SIDE and 0 < height <= MAX_SIDE):
        raise PFMFormatError(f"PFM dimensions {width}x{height} out of range")
    if scale == 0 or not np.isfinite(scale):
        raise PFMFormatError(f"bad PFM scale {scale}")
    return width, height, "<f4" if scale < 0 else ">f4"


def read_depth_pfm(path: Union[str, Path]) -> DepthFrame:
    with open(path, "rb") as handle:
        width, height, dtype = read_pfm_header(handle)
        payload = handle.read(width * height * 4)
    if len(payload) != width * height * 4:
        raise PFMFormatError(f"{path}: expected {width * height * 4} payload bytes, got {len(payload)}")
    values = np.flipud(np.frombuffer(payload, dtype=dtype).reshape(height, width))
    values = values.astype(np.float64)
    with np.errstate(invalid="ignore"):
        valid = np.isfinite(values) & (values > 0)
    return DepthFrame(values, valid)


def write_depth_pfm(frame: DepthFrame, path: Union[str, Path]) -> None:
    """Invalid pixels keep their raw value when it already reads back as invalid, else become 0."""
    values = frame.values.astype(np.float32)
    with np.errstate(invalid="ignore"):
        reads_invalid = ~np.isfinite(values) | (values <= 0)
    values = np.where(frame.valid | reads_invalid, values, np.float32(0.0)).astype("<f4")
    header = f"Pf\n{frame.width} {frame.height}\n-1.0\n".encode("ascii")
    Path(path).write_bytes(header + np.flipud(values).tobytes())


def pfm_size(path: Union[str, Path]) -> Tuple[int, int]:
    """(height, width) from the header alone."""
    with open(path, "rb") as handle:
        width, height, _ = read_pfm_header(handle)
    return height, width
