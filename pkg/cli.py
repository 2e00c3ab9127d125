"""Command-line entry point: python cli.py <command> --help"""

import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import click

from io_formats.manifest import manifest_from_folders
from models.config import PipelineConfig
from processor.pipeline import (
    align_stage,
    encode_stage,
    fit_stage,
    metrics_stage,
    run_pipeline,
    run_stage,
    synth_dataset,
    trajectory_stage,
    warp_stage,
)
from processor.geometry import intrinsics_from_focal
from processor.synth_scene import synth_intrinsics
from utils import constants

INPUT_MANIFEST = "inputs.json"

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


def _parse_resolution(ctx, param, value: str) -> Tuple[int, int]:
    """'HEIGHTxWIDTH' -> (height, width)."""
    try:
        height, width = (int(v) for v in value.lower().split("x"))
    except ValueError:
        raise click.BadParameter(f"expected HEIGHTxWIDTH, got {value!r}")
    if height < 1 or width < 1:
        raise click.BadParameter("resolution must be positive")
    return height, width


def _parse_point(ctx, param, value: Optional[str]) -> Optional[Tuple[float, float, float]]:
    if value is None:
        return None
    try:
        x, y, z = (float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected x,y,z, got {value!r}")
    return x, y, z


def _parse_range(ctx, param, value: Optional[str]) -> Optional[Tuple[float, float]]:
    if value is None:
        return None
    try:
        lo, hi = (float(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected lo,hi, got {value!r}")
    return lo, hi


def _finish(ctx: click.Context, result: Dict[str, Any]) -> None:
    """Write the --report summary and map failure to exit code 1."""
    report = ctx.obj.get("report")
    if report:
        Path(report).parent.mkdir(parents=True, exist_ok=True)
        Path(report).write_text(json.dumps(result, sort_keys=True, indent=2, default=str) + "\n", encoding="utf-8")
    if not result.get("ok", False):
        failed = [s for s in result.get("stages", [result]) if not s.get("ok", False)]
        for stage in failed:
            click.echo(f"stage '{stage.get('stage')}' failed: {stage.get('error')}", err=True)
        ctx.exit(1)


def _single(ctx: click.Context, name: str, fn, stage_dir) -> None:
    result = run_stage(name, fn, stage_dir)
    _finish(ctx, {"ok": result["ok"], "stages": [result]})


def _config(**overrides: Any) -> PipelineConfig:
    try:
        return PipelineConfig(**{k: v for k, v in overrides.items() if v is not None})
    except ValueError as e:
        raise click.BadParameter(str(e))


near_option = click.option("--near", type=float, default=constants.NEAR, show_default=True, help="Near clip in meters.")
far_option = click.option("--far", type=float, default=constants.FAR, show_default=True, help="Far clip in meters.")
threshold_option = click.option(
    "--stretch-threshold", type=float, default=constants.STRETCH_THRESHOLD, show_default=True,
    help="Relative depth jump that marks a triangle as stretched.",
)
seed_option = click.option("--seed", type=int, default=0, show_default=True, help="Random seed.")
augment_scale_option = click.option(
    "--augment-scale", default=None, callback=_parse_range,
    help="lo,hi range of the depth multiplier drawn by --augment (default %s,%s)." % constants.AUGMENT_SCALE_RANGE,
)
augment_shift_option = click.option(
    "--augment-shift", default=None, callback=_parse_range,
    help="lo,hi range of the depth shift in meters drawn by --augment (default %s,%s)." % constants.AUGMENT_SHIFT_RANGE,
)


@click.group()
@click.option("--threads", type=int, default=constants.THREADS, show_default=True,
              help="Worker threads (env DEPTHWARP_THREADS). Output never depends on it.")
@click.option("--report", type=click.Path(dir_okay=False), default=None, help="Write a JSON summary here.")
@click.option("--verbose", is_flag=True, help="Debug logging.")
@click.option("--quiet", is_flag=True, help="Warnings and errors only.")
@click.pass_context
def cli(ctx: click.Context, threads: int, report: Optional[str], verbose: bool, quiet: bool) -> None:
    """Depth warping, encoding and evaluation for camera-controlled video generation."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(stream=sys.stderr, level=level, format=LOG_FORMAT, force=True)
    ctx.ensure_object(dict)
    ctx.obj.update(threads=max(1, threads), report=report)


@cli.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Sequence manifest; the metric depth video is written too.")
@click.option("--relative", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Manifest of the relative depth video (stream 'relative' or 'depth').")
@click.option("--metric", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Manifest of the metric depth video (stream 'metric' or 'depth').")
@click.option("--out", required=True, type=click.Path(),
              help="Output directory with --manifest, alignment JSON file with --relative/--metric.")
@click.option("--relative-is-disparity", is_flag=True, help="Read the relative stream as inverse depth (fixed focal).")
@click.pass_context
def align(ctx: click.Context, manifest: Optional[str], relative: Optional[str], metric: Optional[str], out: str,
          relative_is_disparity: bool) -> None:
    """Fit 1/X = s/D + b over the whole sequence.

    Writes {s, b, residual, n_pixels, n_excluded} as JSON: to --out for
    --relative/--metric, or as alignment.json next to the aligned depth for --manifest.
    """
    if manifest is not None and (relative or metric):
        raise click.UsageError("--manifest cannot be combined with --relative/--metric")
    if manifest is None:
        if not (relative and metric):
            raise click.UsageError("give --manifest, or both --relative and --metric")
        _single(ctx, "align", lambda: fit_stage(relative, metric, out, ctx.obj["threads"]), Path(out).parent)
        return
    config = _config(relative_is_disparity=relative_is_disparity)
    _single(ctx, "align", lambda: align_stage(manifest, out, config, ctx.obj["threads"]), out)


@cli.command()
@click.option("--depth", "--manifest", "manifest", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Manifest with a metric 'depth' stream, such as the align output.")
@click.option("--cams-src", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Source camera file; replaces the manifest's 'source'.")
@click.option("--cams-tgt", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Target camera file; replaces the manifest's 'target'.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
@threshold_option
@near_option
@far_option
@click.option("--focal", type=float, default=None, help="Ignore file intrinsics; centered pinhole with this focal.")
@click.pass_context
def warp(ctx: click.Context, manifest: str, cams_src: Optional[str], cams_tgt: Optional[str], out: str,
         stretch_threshold: float, near: float, far: float, focal: Optional[float]) -> None:
    """Mesh each depth frame and render it under the target camera."""
    config = _config(stretch_threshold=stretch_threshold, near=near, far=far, focal=focal)
    cameras = {"source": cams_src, "target": cams_tgt}
    _single(ctx, "warp", lambda: warp_stage(manifest, out, config, ctx.obj["threads"], cameras), out)


@cli.command()
@click.option("--manifest", type=click.Path(exists=True, dir_okay=False), default=None, help="Warp manifest.")
@click.option("--depth", "depth_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Folder of warped depth PFM frames, taken in name order.")
@click.option("--mask", "mask_dir", type=click.Path(exists=True, file_okay=False), default=None,
              help="Folder of mask PNG frames to carry along with --depth.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
@near_option
@far_option
@click.option("--augment", is_flag=True, help="Random scale/shift of depth before encoding.")
@augment_scale_option
@augment_shift_option
@seed_option
@click.option("--contact-sheet", is_flag=True, help="Also write a frame-strip PNG.")
@click.pass_context
def encode(ctx: click.Context, manifest: Optional[str], depth_dir: Optional[str], mask_dir: Optional[str], out: str,
           near: float, far: float, augment: bool, augment_scale, augment_shift, seed: int, contact_sheet: bool) -> None:
    """Log-normalize warped depth over the sequence and colorize it.

    Writes PNG frames, a manifest and encoding.json (norm_min, norm_max, augment).
    """
    if (manifest is None) == (depth_dir is None):
        raise click.UsageError("give either --manifest or --depth")
    if mask_dir is not None and depth_dir is None:
        raise click.UsageError("--mask goes together with --depth")
    config = _config(near=near, far=far, augment=augment, augment_scale=augment_scale, augment_shift=augment_shift,
                     seed=seed)

    def _run() -> Dict[str, Any]:
        source = manifest
        if source is None:
            streams = {"warped_depth": depth_dir}
            if mask_dir is not None:
                streams["mask"] = mask_dir
            source = manifest_from_folders("warp", streams, Path(out) / INPUT_MANIFEST)
        return encode_stage(source, out, config, ctx.obj["threads"], contact_sheet)

    _single(ctx, "encode", _run, out)


@cli.command("sample-traj")
@click.option("--out", required=True, type=click.Path(),
              help="Index file ending in .json (camera files go beside it) or an output directory.")
@click.option("--count", type=int, default=constants.SYNTH_CAMERAS, show_default=True, help="Trajectories to sample.")
@click.option("--frames", type=int, default=constants.FRAMES, show_default=True, help="Frames per trajectory.")
@click.option("--res", "resolution", default=f"{constants.HEIGHT}x{constants.WIDTH}", show_default=True,
              callback=_parse_resolution, help="HEIGHTxWIDTH for the camera files.")
@click.option("--lookat", default=None, callback=_parse_point, help="x,y,z look-at point; default is the subject's chest.")
@click.option("--focal", type=float, default=None, help="Focal length in pixels; default equals the image width.")
@click.option("--static-first/--no-static-first", default=True, show_default=True, help="Camera 0 stays at the start pose.")
@click.option("--orbit", "orbits", type=float, multiple=True,
              help="Also add a camera orbiting this many degrees around the subject; repeatable (--orbit 30 --orbit -30).")
@seed_option
@click.pass_context
def sample_traj(ctx, out, count, frames, resolution, lookat, focal, static_first, orbits, seed) -> None:
    """Sample look-at camera trajectories and write one camera file per trajectory."""
    if any(abs(d) > constants.MAX_ORBIT_DEGREES for d in orbits):
        raise click.BadParameter(f"orbits are limited to +/-{constants.MAX_ORBIT_DEGREES} degrees", param_hint="--orbit")
    height, width = resolution
    K = synth_intrinsics(width, height) if focal is None else intrinsics_from_focal(width, height, focal)
    target = lookat or (0.0, 0.0, constants.SUBJECT_HEIGHT)
    stage_dir = Path(out).parent if Path(out).suffix.lower() == ".json" else Path(out)
    _single(
        ctx,
        "sample-traj",
        lambda: trajectory_stage(out, K, target, frames, count, seed, static_first, orbits),
        stage_dir,
    )


@cli.command()
@click.option("--gt", required=True, type=click.Path(exists=True, dir_okay=False), help="Ground-truth camera file.")
@click.option("--est", required=True, type=click.Path(exists=True, dir_okay=False), help="Estimated camera file.")
@click.option("--align", "align_mode", type=click.Choice(["none", "sim7"]), default="none", show_default=True,
              help="Similarity-align the estimate first (raw numbers by default).")
@click.option("--units", type=click.Choice(["m", "cm"]), default="m", show_default=True, help="Translation units.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Report JSON path.")
@click.pass_context
def metrics(ctx, gt, est, align_mode, units, out) -> None:
    """RotErr, TransErr and CamMC between two camera files."""
    result = run_stage("metrics", lambda: metrics_stage(gt, est, align_mode, units, out), Path(out).parent if out else ".")
    if result["ok"]:
        report = result["report"]
        click.echo(f"rot_err={report['rot_err']:.6f} trans_err={report['trans_err']:.6f} cam_mc={report['cam_mc']:.6f}")
    _finish(ctx, {"ok": result["ok"], "stages": [result]})


@cli.command()
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Dataset directory.")
@click.option("--scenes", type=int, default=1, show_default=True, help="Number of procedural scenes.")
@click.option("--cams", type=int, default=constants.SYNTH_CAMERAS, show_default=True, help="Cameras per scene.")
@click.option("--frames", type=int, default=constants.SYNTH_FRAMES, show_default=True, help="Frames per camera.")
@click.option("--res", "resolution", default=f"{constants.SYNTH_HEIGHT}x{constants.SYNTH_WIDTH}", show_default=True,
              callback=_parse_resolution, help="HEIGHTxWIDTH.")
@click.option("--source", "source_mode", type=click.Choice(["static", "random"]), default="static", show_default=True,
              help="Source camera: fixed at the start pose, or a random trajectory.")
@threshold_option
@seed_option
@click.pass_context
def synth(ctx, out, scenes, cams, frames, resolution, source_mode, stretch_threshold, seed) -> None:
    """Render procedural multi-camera scenes and build warped-depth training pairs."""
    if cams < 2:
        raise click.BadParameter("need at least 2 cameras", param_hint="--cams")
    config = _config(stretch_threshold=stretch_threshold, frames=frames, resolution=resolution, seed=seed)
    _single(
        ctx,
        "synth",
        lambda: synth_dataset(out, scenes, cams, frames, resolution, seed, config, source_mode, ctx.obj["threads"]),
        out,
    )


@cli.command()
@click.option("--manifest", required=True, type=click.Path(dir_okay=False), help="Sequence or synth scene manifest.")
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
@near_option
@far_option
@threshold_option
@click.option("--relative-is-disparity", is_flag=True, help="Read the relative stream as inverse depth.")
@click.option("--focal", type=float, default=None, help="Override intrinsics with a centered pinhole of this focal.")
@click.option("--augment", is_flag=True, help="Random scale/shift before encoding.")
@augment_scale_option
@augment_shift_option
@click.option("--align", "align_mode", type=click.Choice(["none", "sim7"]), default="none", show_default=True,
              help="Trajectory alignment for the optional metrics stage.")
@click.option("--contact-sheet", is_flag=True, help="Frame-strip PNG of the encoded video.")
@seed_option
@click.pass_context
def pipeline(ctx, manifest, out, near, far, stretch_threshold, relative_is_disparity, focal, augment, augment_scale,
             augment_shift, align_mode, contact_sheet, seed) -> None:
    """align -> warp -> encode (-> metrics) on a manifest; synth scenes produce pairs."""
    config = _config(
        near=near,
        far=far,
        stretch_threshold=stretch_threshold,
        relative_is_disparity=relative_is_disparity,
        focal=focal,
        augment=augment,
        augment_scale=augment_scale,
        augment_shift=augment_shift,
        align=align_mode,
        seed=seed,
    )
    result = run_pipeline(config, manifest, out, ctx.obj["threads"], contact_sheet)
    if result["ok"]:
        click.echo(result["manifest"])
    _finish(ctx, result)


if __name__ == "__main__":
    cli(obj={})
