"""8-bit PNG masks and RGB frames, 16-bit depth import, contact sheets (Pillow)."""

import struct
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
from PIL import Image

from models.frames import DepthFrame, MaskFrame
from utils.errors import BitDepthError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
# fixed encoder settings so identical arrays give identical bytes
SAVE_OPTIONS = {"format": "PNG", "compress_level": 6, "optimize": False}


def png_header(path: Union[str, Path]) -> Tuple[int, int, int, int]:
    """(height, width, bit depth, color type) straight from the IHDR chunk."""
    with open(path, "rb") as handle:
        head = handle.read(29)
    if len(head) < 29 or head[:8] != PNG_SIGNATURE or head[12:16] != b"IHDR":
        raise BitDepthError(f"{path}: not a PNG file")
    width, height, bit_depth, color_type = struct.unpack(">IIBB", head[16:26])
    return height, width, bit_depth, color_type


def _require_8bit(path: Union[str, Path]) -> None:
    _, _, bit_depth, _ = png_header(path)
    if bit_depth != 8:
        raise BitDepthError(f"{path}: expected an 8-bit PNG, got {bit_depth}-bit")


def write_mask_png(mask: MaskFrame, path: Union[str, Path]) -> None:
    Image.fromarray((mask.values * 255).astype(np.uint8)).save(path, **SAVE_OPTIONS)


def read_mask_png(path: Union[str, Path]) -> MaskFrame:
    _require_8bit(path)
    with Image.open(path) as img:
        values = np.asarray(img.convert("L"))
    return MaskFrame(values >= 128)


def write_rgb_png(rgb: np.ndarray, path: Union[str, Path]) -> None:
    rgb = np.asarray(rgb)
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise BitDepthError(f"RGB frames must be (H, W, 3) uint8, got {rgb.dtype} {rgb.shape}")
    Image.fromarray(np.ascontiguousarray(rgb)).save(path, **SAVE_OPTIONS)


def read_rgb_png(path: Union[str, Path]) -> np.ndarray:
    _require_8bit(path)
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB")).copy()


def read_depth_png16(path: Union[str, Path], scale: float = 1000.0) -> DepthFrame:
    """16-bit single-channel depth as written by common estimators: depth = value / scale, 0 = invalid."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    _, _, bit_depth, color_type = png_header(path)
    if bit_depth != 16 or color_type != 0:
        raise BitDepthError(f"{path}: expected a 16-bit grayscale PNG, got {bit_depth}-bit type {color_type}")
    with Image.open(path) as img:
        raw = np.asarray(img).astype(np.float64)
    return DepthFrame(raw / scale, raw > 0)


def write_contact_sheet(frames: Sequence[np.ndarray], path: Union[str, Path], every: int = 8) -> int:
    """Every `every`-th frame side by side in one strip; returns the number of tiles."""
    if every < 1:
        raise ValueError("every must be >= 1")
    tiles = list(frames)[::every]
    if not tiles:
        raise ValueError("no frames for a contact sheet")
    write_rgb_png(np.concatenate(tiles, axis=1), path)
    return len(tiles)


def image_size(path: Union[str, Path]) -> Tuple[int, int]:
    height, width, _, _ = png_header(path)
    return height, width
