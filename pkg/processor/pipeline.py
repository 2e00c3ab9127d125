"""Stage wiring: every stage reads a manifest, writes frames plus a new manifest.

align -> warp -> encode -> (metrics) for sequences, and synth -> pairs for
procedural scenes. Stage runners return result dicts; a failing stage leaves
its outputs in place next to a `.partial` marker.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from io_formats.cameras import read_cameras, write_cameras
from io_formats.manifest import Manifest, load_manifest, load_validated, resolve, save_manifest
from io_formats.pfm import read_depth_pfm, write_depth_pfm
from io_formats.png import read_mask_png, write_contact_sheet, write_mask_png, write_rgb_png
from models.camera import Intrinsics
from models.config import PipelineConfig
from models.scene import CameraRecording, MultiCamSample, SceneSpec
from processor.depth_align import align_sequence, fit_scale_shift
from processor.depth_encode import encode_depth_video
from processor.geometry import disparity_to_depth, intrinsics_from_focal
from processor.metrics import evaluate
from processor.rasterizer import warp_depth_sequence
from processor.synth_scene import build_pairs, random_scene, render_scene, sample_camera_rig, synth_intrinsics
from processor.trajectory import child_seed, sample_trajectories
from utils.errors import ManifestError, trim_exception
from utils.helper_functions import canonical_json, log_stage, ordered_map, timed

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
PARTIAL_MARKER = ".partial"
MANIFEST_NAME = "manifest.json"
ALIGNMENT_NAME = "alignment.json"
ENCODING_NAME = "encoding.json"


def frame_file(index: int, ext: str) -> str:
    return f"{index:05d}.{ext}"


def write_frames(frames: Sequence[Any], root: Path, subdir: str, ext: str, writer: Callable) -> List[str]:
    """Write frames as `<subdir>/%05d.<ext>` under root; returns the relative paths."""
    (root / subdir).mkdir(parents=True, exist_ok=True)
    names = []
    for i, frame in enumerate(frames):
        rel = f"{subdir}/{frame_file(i, ext)}"
        writer(frame, root / rel)
        names.append(rel)
    return names


def read_stream(manifest_path: PathLike, manifest: Manifest, name: str, reader: Callable, threads: int = 1) -> List[Any]:
    if name not in manifest.streams:
        raise ManifestError(f"manifest has no '{name}' stream", str(manifest_path))
    paths = [resolve(manifest_path, rel) for rel in manifest.streams[name]]
    return ordered_map(reader, paths, threads)


def _relative(path: Path, start: Path) -> str:
    return Path(os.path.relpath(path, start)).as_posix()


def _sha256(path: PathLike) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _camera_paths(
    manifest_path: PathLike, manifest: Manifest, overrides: Optional[Dict[str, PathLike]] = None
) -> Dict[str, Path]:
    """Camera files of a manifest by name; `overrides` replace or add entries."""
    paths = {name: resolve(manifest_path, rel) for name, rel in manifest.cameras.items()}
    paths.update({name: Path(p) for name, p in (overrides or {}).items() if p is not None})
    return paths


def _copy_cameras(paths: Dict[str, Path], root: Path) -> Dict[str, str]:
    """Re-write camera files inside this stage's output tree."""
    (root / "cameras").mkdir(parents=True, exist_ok=True)
    out = {}
    for name, path in sorted(paths.items()):
        poses, K = read_cameras(path)
        out[name] = f"cameras/{name}.json"
        write_cameras(root / out[name], poses, K)
    return out


def _require_cameras(manifest_path: PathLike, paths: Dict[str, Path], *names: str) -> None:
    for name in names:
        if name not in paths:
            raise ManifestError(f"manifest has no '{name}' camera file", str(manifest_path))


def _provenance(config: PipelineConfig, manifest_path: PathLike, stage: str, **extra: Any) -> Dict[str, Any]:
    return {
        "stage": stage,
        "config": config.model_dump(mode="json"),
        "config_hash": config.config_hash(),
        "input_sha256": _sha256(manifest_path),
        **extra,
    }


def align_stage(manifest_path: PathLike, out_dir: PathLike, config: PipelineConfig, threads: int = 1) -> Dict[str, Any]:
    """Metric depth from the input: scale/shift fit, disparity inversion, or pass-through."""
    manifest = load_validated(manifest_path)
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    streams = manifest.streams

    if "relative" in streams and "metric" in streams:
        relative = read_stream(manifest_path, manifest, "relative", read_depth_pfm, threads)
        metric = read_stream(manifest_path, manifest, "metric", read_depth_pfm, threads)
        result = fit_scale_shift(relative, metric, threads)
        depth = align_sequence(relative, result)
        alignment = {"mode": "scale_shift", **result.to_dict()}
    elif "relative" in streams and config.relative_is_disparity:
        relative = read_stream(manifest_path, manifest, "relative", read_depth_pfm, threads)
        depth = [disparity_to_depth(frame) for frame in relative]
        alignment = {"mode": "disparity"}
    elif "depth" in streams:
        depth = read_stream(manifest_path, manifest, "depth", read_depth_pfm, threads)
        alignment = {"mode": "metric"}
    else:
        raise ManifestError("nothing to align: need relative+metric, relative as disparity, or depth", str(manifest_path))

    files = write_frames(depth, root, "depth", "pfm", write_depth_pfm)
    out = Manifest(
        kind="aligned",
        frame_count=manifest.frame_count,
        resolution=manifest.resolution,
        streams={"depth": files},
        cameras=_copy_cameras(_camera_paths(manifest_path, manifest), root),
        provenance=_provenance(config, manifest_path, "align", alignment=alignment, parent=manifest.provenance),
    )
    path = save_manifest(out, root / MANIFEST_NAME)
    (root / ALIGNMENT_NAME).write_text(_json(alignment), encoding="utf-8")
    log_stage("align", frames=len(files), mode=alignment["mode"])
    return {"manifest": str(path), "alignment": alignment}


def _first_stream(manifest_path: PathLike, manifest: Manifest, *names: str) -> str:
    for name in names:
        if name in manifest.streams:
            return name
    raise ManifestError(f"manifest has none of the streams {list(names)}", str(manifest_path))


def fit_stage(
    relative_path: PathLike, metric_path: PathLike, out_path: PathLike, threads: int = 1
) -> Dict[str, Any]:
    """Scale/shift fit between the depth streams of two manifests, written as one JSON file."""
    relative_manifest, metric_manifest = load_validated(relative_path), load_validated(metric_path)
    relative = read_stream(
        relative_path, relative_manifest, _first_stream(relative_path, relative_manifest, "relative", "depth"),
        read_depth_pfm, threads,
    )
    metric = read_stream(
        metric_path, metric_manifest, _first_stream(metric_path, metric_manifest, "metric", "depth"),
        read_depth_pfm, threads,
    )
    alignment = fit_scale_shift(relative, metric, threads).to_dict()
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(_json(alignment), encoding="utf-8")
    log_stage("fit", s=alignment["s"], b=alignment["b"], residual=alignment["residual"])
    return {"alignment": alignment, "path": str(out)}


def warp_stage(
    manifest_path: PathLike,
    out_dir: PathLike,
    config: PipelineConfig,
    threads: int = 1,
    cameras: Optional[Dict[str, PathLike]] = None,
) -> Dict[str, Any]:
    """Render each source depth frame under the matching target camera.

    `cameras` may name 'source'/'target' camera files that take precedence over the manifest's.
    """
    manifest = load_validated(manifest_path)
    paths = _camera_paths(manifest_path, manifest, cameras)
    _require_cameras(manifest_path, paths, "source", "target")
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    depth = read_stream(manifest_path, manifest, "depth", read_depth_pfm, threads)
    source, K = read_cameras(paths["source"])
    target, _ = read_cameras(paths["target"])
    if config.focal is not None:
        height, width = manifest.resolution
        K = intrinsics_from_focal(width, height, config.focal)

    outputs = warp_depth_sequence(
        depth, K, source, target, config.stretch_threshold, config.near, config.far, threads
    )
    warped = write_frames([o.depth for o in outputs], root, "warped_depth", "pfm", write_depth_pfm)
    masks = write_frames([o.mask for o in outputs], root, "mask", "png", write_mask_png)
    coverage = float(np.mean([o.mask.values.mean() for o in outputs])) if outputs else 0.0

    out = Manifest(
        kind="warp",
        frame_count=manifest.frame_count,
        resolution=manifest.resolution,
        streams={"warped_depth": warped, "mask": masks},
        cameras=_copy_cameras(paths, root),
        provenance=_provenance(
            config, manifest_path, "warp", intrinsics=K.to_dict(), mask_coverage=coverage, parent=manifest.provenance
        ),
    )
    path = save_manifest(out, root / MANIFEST_NAME)
    log_stage("warp", frames=len(outputs), mask_coverage=coverage)
    return {"manifest": str(path), "mask_coverage": coverage}


def encode_stage(
    manifest_path: PathLike,
    out_dir: PathLike,
    config: PipelineConfig,
    threads: int = 1,
    contact_sheet: bool = False,
) -> Dict[str, Any]:
    """Log-normalize and colorize the warped depth video; masks are carried along."""
    manifest = load_validated(manifest_path)
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    warped = read_stream(manifest_path, manifest, "warped_depth", read_depth_pfm, threads)
    encoded = encode_depth_video(
        warped,
        near=config.near,
        far=config.far,
        augment_seed=config.augment_seed,
        scale_range=config.augment_scale,
        shift_range=config.augment_shift,
    )
    streams = {"encoded": write_frames(encoded.frames, root, "encoded", "png", write_rgb_png)}
    if "mask" in manifest.streams:
        masks = read_stream(manifest_path, manifest, "mask", read_mask_png, threads)
        streams["mask"] = write_frames(masks, root, "mask", "png", write_mask_png)
    if contact_sheet:
        write_contact_sheet(encoded.frames, root / "contact_sheet.png")

    out = Manifest(
        kind="encoded",
        frame_count=manifest.frame_count,
        resolution=manifest.resolution,
        streams=streams,
        cameras=_copy_cameras(_camera_paths(manifest_path, manifest), root),
        provenance=_provenance(config, manifest_path, "encode", encoding=encoded.sidecar(), parent=manifest.provenance),
    )
    path = save_manifest(out, root / MANIFEST_NAME)
    (root / ENCODING_NAME).write_text(_json(encoded.sidecar()), encoding="utf-8")
    log_stage("encode", frames=len(encoded.frames), clamped=encoded.counters.get("clamped", 0))
    return {"manifest": str(path), "encoding": encoded.sidecar()}


def metrics_stage(
    gt_path: PathLike,
    est_path: PathLike,
    align: str = "none",
    units: str = "m",
    out_path: Optional[PathLike] = None,
) -> Dict[str, Any]:
    gt, _ = read_cameras(gt_path)
    est, _ = read_cameras(est_path)
    report = evaluate(gt, est, align=align, units=units).to_dict()
    if out_path is not None:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        Path(out_path).write_text(_json(report), encoding="utf-8")
    log_stage("metrics", rot_err=report["rot_err"], trans_err=report["trans_err"], cam_mc=report["cam_mc"])
    return {"report": report}


def _json(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def trajectory_stage(
    out_path: PathLike,
    K: Intrinsics,
    lookat: Any,
    frames: int,
    count: int,
    seed: int,
    include_static: bool = True,
    orbits: Sequence[float] = (),
) -> Dict[str, Any]:
    """Sample a camera rig and write one camera file per trajectory plus an index.

    A `.json` destination is the index itself, with camera files `<stem>_XX.json`
    beside it. Any other destination is a folder holding `traj_XX.json` files and
    `trajectories.json`.
    """
    out = Path(out_path)
    if out.suffix.lower() == ".json":
        root, index, stem = out.parent, out, out.stem
    else:
        root, index, stem = out, out / "trajectories.json", "traj"
    root.mkdir(parents=True, exist_ok=True)

    rig = sample_trajectories(lookat, frames, seed, count, include_static=include_static, orbits=orbits)
    entries = []
    for k, (spec, poses) in enumerate(rig):
        name = f"{stem}_{k:02d}.json"
        write_cameras(root / name, poses, K)
        entries.append({"camera_file": name, **spec.to_dict()})
    index.write_text(canonical_json(entries) + "\n", encoding="utf-8")
    log_stage("sample-traj", trajectories=len(rig), frames=frames)
    return {"trajectories": len(rig), "index": str(index)}


def synth_scene_stage(
    scene_dir: PathLike,
    scene_seed: int,
    n_cams: int,
    frames: int,
    resolution: Tuple[int, int],
    source_mode: str = "static",
    threads: int = 1,
) -> Dict[str, Any]:
    """Render one procedural scene from `n_cams` cameras and write its scene manifest."""
    root = Path(scene_dir)
    height, width = resolution
    spec = random_scene(scene_seed, duration=frames)
    K = synth_intrinsics(width, height)
    trajectories, rig = sample_camera_rig(spec, n_cams, child_seed(scene_seed, 1), source=source_mode)
    sample = render_scene(spec, rig, K, source=0, threads=threads)

    records = []
    for k, cam in enumerate(sample.cameras):
        cam_dir = f"cam_{k:02d}"
        rgb = write_frames(cam.rgb, root, f"{cam_dir}/rgb", "png", write_rgb_png)
        depth = write_frames(cam.depth, root, f"{cam_dir}/depth", "pfm", write_depth_pfm)
        write_cameras(root / cam_dir / "cams.json", cam.poses, K)
        records.append({"camera": k, "streams": {"rgb": rgb, "depth": depth}, "cameras": {"poses": f"{cam_dir}/cams.json"}})

    manifest = Manifest(
        kind="synth",
        frame_count=frames,
        resolution=(height, width),
        records=records,
        provenance={
            "scene": spec.model_dump(mode="json"),
            "seed": scene_seed,
            "source": sample.source,
            "source_mode": source_mode,
            "trajectories": [t.to_dict() for t in trajectories],
        },
    )
    path = save_manifest(manifest, root / "scene.json")
    log_stage("synth", seed=scene_seed, cameras=n_cams, frames=frames)
    return {"manifest": str(path)}


def pairs_stage(manifest_path: PathLike, out_dir: PathLike, config: PipelineConfig, threads: int = 1) -> Dict[str, Any]:
    """Warp the source camera's exact depth into every other camera of a synth scene."""
    manifest = load_validated(manifest_path)
    if manifest.kind != "synth":
        raise ManifestError(f"pairs need a synth manifest, got '{manifest.kind}'", str(manifest_path))
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    scene_root = Path(manifest_path).parent
    source = int(manifest.provenance.get("source", 0))

    records = sorted(manifest.records, key=lambda r: int(r["camera"]))
    cameras, K = [], None
    for record in records:
        poses, K = read_cameras(resolve(manifest_path, record["cameras"]["poses"]))
        depth = []
        if int(record["camera"]) == source:
            depth = ordered_map(read_depth_pfm, [scene_root / rel for rel in record["streams"]["depth"]], threads)
        cameras.append(CameraRecording(poses, depth=depth))
    sample = MultiCamSample(SceneSpec.model_validate(manifest.provenance["scene"]), K, cameras, source)

    def _rel(rel: str) -> str:
        return _relative(scene_root / rel, root)

    out_records = []
    for pair in build_pairs(sample, config.stretch_threshold, config.near, config.far, threads):
        pair_dir = f"pair_{pair.source:02d}_{pair.target:02d}"
        warped_frames = [o.depth for o in pair.warped]
        encoded = encode_depth_video(
            warped_frames,
            near=config.near,
            far=config.far,
            augment_seed=None if not config.augment else child_seed(config.seed, pair.target),
            scale_range=config.augment_scale,
            shift_range=config.augment_shift,
        )
        src_rec, tgt_rec = records[pair.source], records[pair.target]
        out_records.append(
            {
                "source": pair.source,
                "target": pair.target,
                "streams": {
                    "source_rgb": [_rel(r) for r in src_rec["streams"]["rgb"]],
                    "target_rgb": [_rel(r) for r in tgt_rec["streams"]["rgb"]],
                    "warped_depth": write_frames(warped_frames, root, f"{pair_dir}/warped_depth", "pfm", write_depth_pfm),
                    "mask": write_frames([o.mask for o in pair.warped], root, f"{pair_dir}/mask", "png", write_mask_png),
                    "encoded": write_frames(encoded.frames, root, f"{pair_dir}/encoded", "png", write_rgb_png),
                },
                "cameras": {
                    "source": _rel(src_rec["cameras"]["poses"]),
                    "target": _rel(tgt_rec["cameras"]["poses"]),
                },
                "encoding": encoded.sidecar(),
            }
        )

    out = Manifest(
        kind="pairs",
        frame_count=manifest.frame_count,
        resolution=manifest.resolution,
        records=out_records,
        provenance=_provenance(config, manifest_path, "pairs", scene_seed=manifest.provenance.get("seed")),
    )
    path = save_manifest(out, root / "pairs.json")
    log_stage("pairs", source=source, pairs=len(out_records))
    return {"manifest": str(path), "pairs": len(out_records)}


def _prefix_record(record: Dict[str, Any], prefix: str) -> Dict[str, Any]:
    out = dict(record)
    out["streams"] = {k: [f"{prefix}/{p}" for p in v] for k, v in record["streams"].items()}
    out["cameras"] = {k: f"{prefix}/{p}" for k, p in record["cameras"].items()}
    return out


def synth_dataset(
    out_dir: PathLike,
    n_scenes: int,
    n_cams: int,
    frames: int,
    resolution: Tuple[int, int],
    seed: int,
    config: PipelineConfig,
    source_mode: str = "static",
    threads: int = 1,
) -> Dict[str, Any]:
    """`scene_XXXX/` folders with per-camera renders and pairs, plus a top-level pairs.json."""
    root = Path(out_dir)
    records = []
    for i in range(n_scenes):
        scene = f"scene_{i:04d}"
        synth = synth_scene_stage(root / scene, child_seed(seed, i), n_cams, frames, resolution, source_mode, threads)
        pairs = pairs_stage(synth["manifest"], root / scene, config, threads)
        records += [_prefix_record(r, scene) for r in load_manifest(pairs["manifest"]).records]

    manifest = Manifest(
        kind="pairs",
        frame_count=frames,
        resolution=resolution,
        records=records,
        provenance={"seed": seed, "scenes": n_scenes, "cameras": n_cams, "source_mode": source_mode,
                    "config_hash": config.config_hash()},
    )
    path = save_manifest(manifest, root / "pairs.json")
    return {"manifest": str(path), "scenes": n_scenes, "pairs": len(records)}


def run_stage(name: str, fn: Callable[[], Dict[str, Any]], stage_dir: PathLike) -> Dict[str, Any]:
    """Run one stage; on failure write `<stage_dir>/.partial` and return an error dict instead of raising."""
    marker = Path(stage_dir) / PARTIAL_MARKER
    try:
        with timed(name):
            result = fn()
        if marker.exists():
            marker.unlink()
        return {"ok": True, "stage": name, **result}
    except Exception as e:
        logger.error(f"stage={name} failed: {trim_exception(e)}")
        marker.parent.mkdir(parents=True, exist_ok=True)
        marker.write_text(f"{type(e).__name__}: {trim_exception(e)}\n", encoding="utf-8")
        return {"ok": False, "stage": name, "error": trim_exception(e), "error_type": type(e).__name__}


def run_pipeline(
    config: PipelineConfig,
    manifest_path: PathLike,
    out_dir: PathLike,
    threads: int = 1,
    contact_sheet: bool = False,
) -> Dict[str, Any]:
    """align -> warp -> encode (-> metrics when an 'estimated' camera file is present), or pairs for a synth scene."""
    out = Path(out_dir)
    results: List[Dict[str, Any]] = []

    def step(name: str, fn: Callable[[], Dict[str, Any]], stage_dir: Path) -> bool:
        results.append(run_stage(name, fn, stage_dir))
        return results[-1]["ok"]

    if not step("load", lambda: {"kind": load_manifest(manifest_path).kind}, out):
        return {"ok": False, "stages": results, "manifest": None}
    manifest = load_manifest(manifest_path)

    if manifest.kind == "synth":
        ok = step("pairs", lambda: pairs_stage(manifest_path, out, config, threads), out)
        final = results[-1].get("manifest") if ok else None
        return {"ok": ok, "stages": results, "manifest": final, "config_hash": config.config_hash()}

    ok = step("align", lambda: align_stage(manifest_path, out / "align", config, threads), out / "align")
    ok = ok and step("warp", lambda: warp_stage(out / "align" / MANIFEST_NAME, out / "warp", config, threads), out / "warp")
    ok = ok and step(
        "encode",
        lambda: encode_stage(out / "warp" / MANIFEST_NAME, out / "encode", config, threads, contact_sheet),
        out / "encode",
    )
    if ok and "estimated" in manifest.cameras:
        _require_cameras(manifest_path, _camera_paths(manifest_path, manifest), "target")
        ok = step(
            "metrics",
            lambda: metrics_stage(
                resolve(manifest_path, manifest.cameras["target"]),
                resolve(manifest_path, manifest.cameras["estimated"]),
                config.align,
                out_path=out / "metrics" / "report.json",
            ),
            out / "metrics",
        )
    if not ok:
        return {"ok": False, "stages": results, "manifest": None, "config_hash": config.config_hash()}

    warp = load_manifest(out / "warp" / MANIFEST_NAME)
    encode = load_manifest(out / "encode" / MANIFEST_NAME)
    final = Manifest(
        kind="pipeline",
        frame_count=encode.frame_count,
        resolution=encode.resolution,
        streams={
            "warped_depth": [f"warp/{p}" for p in warp.streams["warped_depth"]],
            "mask": [f"warp/{p}" for p in warp.streams["mask"]],
            "encoded": [f"encode/{p}" for p in encode.streams["encoded"]],
        },
        cameras={k: f"warp/{p}" for k, p in warp.cameras.items()},
        provenance={
            "config": config.model_dump(mode="json"),
            "config_hash": config.config_hash(),
            "input_sha256": _sha256(manifest_path),
            "stages": [r["stage"] for r in results],
            "encoding": encode.provenance.get("encoding"),
            "alignment": load_manifest(out / "align" / MANIFEST_NAME).provenance.get("alignment"),
        },
    )
    path = save_manifest(final, out / MANIFEST_NAME)
    return {"ok": True, "stages": results, "manifest": str(path), "config_hash": config.config_hash()}
