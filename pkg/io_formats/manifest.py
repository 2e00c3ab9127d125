"""JSON manifests that tie every stage's outputs together.

Paths inside a manifest are relative to the manifest's own directory. Stages
only ever find their inputs through a manifest; `manifest_from_folders` writes
one for callers that start from plain folders of frames.
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, field_validator

from io_formats.cameras import read_cameras
from io_formats.pfm import pfm_size
from io_formats.png import image_size
from utils.constants import FORMAT_VERSION
from utils.errors import DepthWarpError, ManifestError

logger = logging.getLogger(__name__)

SUPPORTED_VERSIONS = {FORMAT_VERSION}
MANIFEST_KINDS = {"depth", "aligned", "warp", "encoded", "sequence", "synth", "pairs", "pipeline"}


class Manifest(BaseModel):
    version: str = FORMAT_VERSION
    kind: str
    frame_count: int = Field(ge=0)
    resolution: Tuple[int, int]  # (height, width)
    streams: Dict[str, List[str]] = Field(default_factory=dict)
    cameras: Dict[str, str] = Field(default_factory=dict)
    provenance: Dict[str, Any] = Field(default_factory=dict)
    records: List[Dict[str, Any]] = Field(default_factory=list)

    @field_validator("version")
    @classmethod
    def _known_version(cls, value: str) -> str:
        if value not in SUPPORTED_VERSIONS:
            raise ValueError(f"unknown manifest version {value!r}")
        return value

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, value: str) -> str:
        if value not in MANIFEST_KINDS:
            raise ValueError(f"unknown manifest kind {value!r}")
        return value

    @field_validator("resolution")
    @classmethod
    def _positive(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        if min(value) <= 0:
            raise ValueError("resolution must be positive")
        return value


def manifest_dumps(manifest: Manifest) -> str:
    return json.dumps(manifest.model_dump(mode="json"), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def save_manifest(manifest: Manifest, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest_dumps(manifest), encoding="utf-8")
    return path


def load_manifest(path: Union[str, Path]) -> Manifest:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ManifestError(f"unreadable manifest ({e})", str(path)) from e
    try:
        return Manifest.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ()))
        raise ManifestError(f"invalid manifest field '{where}': {first.get('msg')}", str(path)) from e


def resolve(manifest_path: Union[str, Path], relative: str) -> Path:
    return Path(manifest_path).parent / relative


def _file_resolution(path: Path) -> Optional[Tuple[int, int]]:
    suffix = path.suffix.lower()
    if suffix == ".png":
        return image_size(path)
    if suffix == ".pfm":
        return pfm_size(path)
    return None


def _check_stream(name: str, files: List[str], root: Path, count: int, resolution: Tuple[int, int]) -> None:
    if len(files) != count:
        raise ManifestError(f"stream '{name}' lists {len(files)} files for {count} frames", str(root))
    for rel in files:
        path = root / rel
        if not path.is_file():
            raise ManifestError(f"stream '{name}' is missing a file", str(path))
        try:
            size = _file_resolution(path)
        except DepthWarpError as e:
            raise ManifestError(f"stream '{name}' has an unreadable file ({e})", str(path)) from e
        if size is not None and tuple(size) != tuple(resolution):
            raise ManifestError(
                f"stream '{name}' resolution {size[0]}x{size[1]} != manifest {resolution[0]}x{resolution[1]}",
                str(path),
            )


def _check_cameras(name: str, rel: str, root: Path, count: int) -> None:
    path = root / rel
    if not path.is_file():
        raise ManifestError(f"camera file '{name}' is missing", str(path))
    poses, _ = read_cameras(path)
    if len(poses) != count:
        raise ManifestError(f"camera file '{name}' has {len(poses)} poses for {count} frames", str(path))


def validate_manifest(manifest: Manifest, manifest_path: Union[str, Path]) -> Manifest:
    """Every referenced file exists, every stream has frame_count entries, every image has the declared size."""
    root = Path(manifest_path).parent
    count, resolution = manifest.frame_count, manifest.resolution
    for name, files in sorted(manifest.streams.items()):
        _check_stream(name, files, root, count, resolution)
    for name, rel in sorted(manifest.cameras.items()):
        _check_cameras(name, rel, root, count)
    for i, record in enumerate(manifest.records):
        for name, value in sorted(record.get("streams", {}).items()):
            _check_stream(f"records[{i}].{name}", value, root, count, resolution)
        for name, rel in sorted(record.get("cameras", {}).items()):
            _check_cameras(f"records[{i}].{name}", rel, root, count)
    logger.debug(f"manifest {manifest_path} validated: kind={manifest.kind} frames={count}")
    return manifest


def load_validated(path: Union[str, Path]) -> Manifest:
    return validate_manifest(load_manifest(path), path)


FRAME_SUFFIXES = {".pfm", ".png"}


def _frame_files(folder: Path) -> List[Path]:
    if not folder.is_dir():
        raise ManifestError("frame folder is missing", str(folder))
    files = sorted(p for p in folder.iterdir() if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES)
    if not files:
        raise ManifestError("frame folder holds no .pfm or .png files", str(folder))
    return files


def manifest_from_folders(
    kind: str,
    streams: Dict[str, Union[str, Path]],
    out_path: Union[str, Path],
    cameras: Optional[Dict[str, Union[str, Path]]] = None,
) -> Path:
    """Write and validate a manifest listing every frame file of each folder in name order."""
    out_path = Path(out_path)
    base = out_path.parent
    base.mkdir(parents=True, exist_ok=True)
    listed = {name: _frame_files(Path(folder)) for name, folder in streams.items()}
    first = next(iter(listed.values()))
    manifest = Manifest(
        kind=kind,
        frame_count=len(first),
        resolution=_file_resolution(first[0]),
        streams={
            name: [Path(os.path.relpath(p, base)).as_posix() for p in files] for name, files in listed.items()
        },
        cameras={name: Path(os.path.relpath(p, base)).as_posix() for name, p in (cameras or {}).items()},
    )
    save_manifest(manifest, out_path)
    validate_manifest(manifest, out_path)
    return out_path
