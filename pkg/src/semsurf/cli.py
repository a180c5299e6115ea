"""Command-line pipeline: calibrate, fundamental, reconstruct, track, analyze.

Each subcommand runs one stage against explicit file paths; ``pipeline``
composes all stages from a JSON config into an output bundle plus a
machine-readable run report. Exit codes: 0 success, 2 input or format
error, 3 numerical degeneracy, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, calib, epipolar, flow, formats, imagio, sfm
from .errors import DegeneracyError, InputError


@dataclass(frozen=True)
class ProfileSpec:
    name: str
    anchor_x_um: float
    anchor_y_um: float
    angle_deg: float
    corridor_um: float


@dataclass
class PipelineConfig:
    lines: Path
    correspondences: Path
    manifest: Path
    out_dir: Path
    seed: int = 0
    um_per_px: float | None = None
    view_a_image: Path | None = None
    view_b_image: Path | None = None
    flow_params: flow.FlowParams = field(default_factory=flow.FlowParams)
    bin_width: float = 0.1
    exclude_suspect: bool = False
    stability_sizes: tuple[int, ...] = ()
    stability_trials: int = 200
    profiles: tuple[ProfileSpec, ...] = ()

    @classmethod
    def from_file(cls, path: Path, out_dir: Path | None = None, seed: int | None = None):
        path = Path(path)
        if not path.exists():
            raise InputError(f"missing config file: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
        base = path.parent

        def resolve(key: str, required: bool = True) -> Path | None:
            if key not in doc:
                if required:
                    raise InputError(f"{path}: missing key {key!r}")
                return None
            p = Path(doc[key])
            return p if p.is_absolute() else base / p

        fp = doc.get("flow", {})
        ap = doc.get("analysis", {})
        stab = doc.get("stability", {})
        profiles = tuple(
            ProfileSpec(
                name=str(p["name"]),
                anchor_x_um=float(p["anchor_x_um"]),
                anchor_y_um=float(p["anchor_y_um"]),
                angle_deg=float(p["angle_deg"]),
                corridor_um=float(p["corridor_um"]),
            )
            for p in doc.get("profiles", [])
        )
        cfg = cls(
            lines=resolve("lines"),
            correspondences=resolve("correspondences"),
            manifest=resolve("manifest"),
            out_dir=out_dir or resolve("out_dir"),
            seed=seed if seed is not None else int(doc.get("seed", 0)),
            um_per_px=float(doc["um_per_px"]) if "um_per_px" in doc else None,
            view_a_image=resolve("view_a_image", required=False),
            view_b_image=resolve("view_b_image", required=False),
            flow_params=flow.FlowParams(
                window=int(fp.get("window", 21)),
                levels=int(fp.get("levels", 3)),
                max_iter=int(fp.get("max_iter", 30)),
                eps=float(fp.get("eps", 0.01)),
                min_eig_threshold=float(fp.get("min_eig_threshold", 1e-4)),
                fb_threshold=float(fp.get("fb_threshold", 1.0)),
            ),
            bin_width=float(ap.get("bin_width", 0.1)),
            exclude_suspect=bool(ap.get("exclude_suspect", False)),
            stability_sizes=tuple(int(s) for s in stab.get("sizes", [])),
            stability_trials=int(stab.get("trials", 200)),
            profiles=profiles,
        )
        for p in (cfg.lines, cfg.correspondences, cfg.manifest):
            if not p.exists():
                raise InputError(f"missing input file: {p}")
        for p in (cfg.view_a_image, cfg.view_b_image):
            if p is not None and not p.exists():
                raise InputError(f"missing input file: {p}")
        return cfg


# ------------------------------------------------------------------ stages


def _principal_point_warnings(K: calib.Intrinsics, image) -> list[str]:
    warnings = []
    if image is not None:
        if not (0 <= K.cx < image.width and 0 <= K.cy < image.height):
            warnings.append(
                f"principal point ({K.cx:.1f}, {K.cy:.1f}) lies outside the "
                f"{image.width}x{image.height} image"
            )
    elif K.cx < 0 or K.cy < 0:
        warnings.append(
            f"principal point ({K.cx:.1f}, {K.cy:.1f}) lies outside any plausible image"
        )
    return warnings


def stage_calibrate(
    segments: list[calib.LineSegment],
    out_intrinsics: Path,
    out_rotation: Path,
    view_a_image=None,
):
    """Vanishing points per view, intrinsics and rotations, joint refinement.

    Intrinsics come from view A (the reconstruction reference). The
    rotation written is the relative rotation A -> B when both views are
    annotated, otherwise view A's own rotation.
    """
    by_view: dict[str, list[calib.LineSegment]] = {}
    for s in segments:
        by_view.setdefault(s.view_id, []).append(s)
    if "A" not in by_view:
        raise InputError("lines.csv has no view-A segments")

    results: dict[str, tuple[calib.Intrinsics, calib.RotationEstimate]] = {}
    for view, segs in sorted(by_view.items()):
        vps = []
        for pid in (0, 1, 2):
            group = [s for s in segs if s.plane_id == pid]
            if len(group) < 2:
                raise InputError(
                    f"view {view}: need >= 2 segments for direction {pid}, got {len(group)}"
                )
            vps.append(calib.vanishing_point(group))
        K0 = calib.intrinsics_from_orthogonal_vps(*vps)
        R0 = calib.rotation_from_vps(K0, *vps)
        results[view] = calib.refine_calibration(segs, K0, R0)

    K, Ra = results["A"]
    warnings = _principal_point_warnings(K, view_a_image)
    if "B" in results:
        rotation = calib.relative_rotation(Ra, results["B"][1])
    else:
        rotation = Ra
        warnings.append("no view-B segments: rotation.json holds view A's rotation")
    formats.write_intrinsics_json(out_intrinsics, K, warnings)
    formats.write_rotation_json(out_rotation, rotation)
    return K, rotation, warnings


def stage_fundamental(
    corrs: list[epipolar.Correspondence],
    out_f: Path,
    out_epipoles: Path,
    stability_sizes: tuple[int, ...] = (),
    trials: int = 200,
    seed: int = 0,
    out_stability: Path | None = None,
):
    F = epipolar.eight_point(corrs)
    residuals = epipolar.epipolar_residuals(F, corrs)
    eps = epipolar.epipoles(F)
    formats.write_fundamental_json(out_f, F, residuals)
    formats.write_epipoles_json(out_epipoles, eps)
    reports = []
    if stability_sizes:
        reports = epipolar.epipole_stability(corrs, list(stability_sizes), trials, seed)
        if out_stability is not None:
            formats.write_stability_csv(out_stability, reports)
    return F, eps, reports


def stage_reconstruct(
    corrs: list[epipolar.Correspondence],
    um_per_px: float,
    out_cloud: Path,
    relative_rotation: np.ndarray | None = None,
    profiles: tuple[ProfileSpec, ...] = (),
    out_dir: Path | None = None,
):
    tracks = {c.id: [(c.xa, c.ya), (c.xb, c.yb)] for c in corrs}
    W = sfm.build_measurement_matrix(tracks)
    structure = sfm.factorize(W)
    upgraded = sfm.metric_upgrade(structure, relative_rotation=relative_rotation)
    cloud = sfm.scale_and_depth(upgraded, um_per_px)
    formats.write_cloud_csv(out_cloud, cloud)
    profile_paths = []
    for spec in profiles:
        profile = sfm.crack_profile(
            cloud,
            (spec.anchor_x_um, spec.anchor_y_um),
            spec.angle_deg,
            spec.corridor_um,
        )
        p = (out_dir or out_cloud.parent) / f"profile_{spec.name}.csv"
        formats.write_profile_csv(p, profile)
        profile_paths.append(p)
    return cloud, profile_paths


def stage_track(
    seq: imagio.FrameSequence,
    seeds: list[tuple[str, float, float]],
    params: flow.FlowParams,
    out_tracks: Path,
):
    tracks = flow.reverse_propagate(seq, seeds, params)
    formats.write_tracks_csv(out_tracks, tracks)
    return tracks


def stage_analyze(
    tracks: flow.TrackSet,
    um_per_px: float,
    out_dir: Path,
    cloud: sfm.SurfacePointCloud | None = None,
    bin_width: float = 0.1,
    exclude_suspect: bool = False,
):
    records, skipped = analysis.net_displacements(tracks, um_per_px)
    used = records if not exclude_suspect else [r for r in records if not r.suspect]
    stats = analysis.displacement_stats(records, bin_width, include_suspect=not exclude_suspect)
    formats.write_stats_json(out_dir / "stats.json", stats)
    formats.write_histogram_csv(out_dir / "histogram_dx.csv", stats.hist_dx)
    formats.write_histogram_csv(out_dir / "histogram_dy.csv", stats.hist_dy)
    formats.write_histogram_csv(out_dir / "histogram_dist.csv", stats.hist_dist)
    split = analysis.two_means_split([r.dist_um for r in used])
    formats.write_split_json(out_dir / "split.json", split)
    warnings = []
    if skipped:
        warnings.append(f"{skipped} single-position tracks excluded from statistics")
    if cloud is not None:
        corr = analysis.correlate_depth_lateral(cloud, used)
        formats.write_correlation_json(out_dir / "correlation.json", corr)
    return stats, warnings


# ---------------------------------------------------------------- pipeline


def _cloud_from_csv(path: Path) -> sfm.SurfacePointCloud:
    points = formats.read_cloud_csv(path)
    ids = tuple(points.keys())
    x = np.array([points[i][0] for i in ids])
    y = np.array([points[i][1] for i in ids])
    z = np.array([points[i][2] for i in ids])
    # re-center depths defensively; a valid cloud.csv already has mean 0
    z = z - z.mean()
    return sfm.SurfacePointCloud(
        ids=ids, x_um=x, y_um=y, z_um=z, plane_normal=np.array([0.0, 0.0, 1.0]),
        plane_offset=0.0,
    )


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute all stages and write the artifact bundle plus report.json.

    Data artifacts are byte-deterministic for fixed inputs and seed; the
    report itself carries wall-clock timings and is the one file excluded
    from byte-level comparisons.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {
        "tool": "semsurf",
        "version": __version__,
        "seed": config.seed,
        "parameters": {
            "um_per_px": config.um_per_px,
            "flow": {
                "window": config.flow_params.window,
                "levels": config.flow_params.levels,
                "max_iter": config.flow_params.max_iter,
                "eps": config.flow_params.eps,
                "min_eig_threshold": config.flow_params.min_eig_threshold,
                "fb_threshold": config.flow_params.fb_threshold,
            },
            "bin_width": config.bin_width,
            "exclude_suspect": config.exclude_suspect,
            "stability_sizes": list(config.stability_sizes),
            "stability_trials": config.stability_trials,
        },
        "stages": [],
        "status": "ok",
    }

    def run_stage(name: str, fn):
        entry = {"stage": name, "status": "ok", "outputs": [], "warnings": []}
        t0 = time.perf_counter()
        try:
            outputs, warnings = fn(entry)
            entry["outputs"] = [str(p) for p in outputs]
            entry["warnings"] = warnings
        except Exception as exc:
            entry["status"] = "FAILED"
            entry["error"] = f"{type(exc).__name__}: {exc}"
            entry["elapsed_s"] = time.perf_counter() - t0
            report["stages"].append(entry)
            report["status"] = "FAILED"
            report["failed_stage"] = name
            formats.write_json(out / "report.json", report)
            raise
        entry["elapsed_s"] = time.perf_counter() - t0
        report["stages"].append(entry)

    inputs: dict = {}

    def do_load_inputs(entry):
        inputs["view_a"] = (
            imagio.load_image(config.view_a_image) if config.view_a_image else None
        )
        inputs["segments"] = formats.read_lines_csv(config.lines)
        inputs["corrs"] = formats.read_correspondences_csv(config.correspondences)
        seq = imagio.load_manifest(config.manifest)
        inputs["seq"] = seq
        if config.um_per_px is not None and config.um_per_px != seq.um_per_px:
            raise InputError(
                f"um_per_px mismatch: config says {config.um_per_px}, "
                f"manifest says {seq.um_per_px}"
            )
        inputs["um"] = config.um_per_px if config.um_per_px is not None else seq.um_per_px
        return [], []

    run_stage("load-inputs", do_load_inputs)
    view_a = inputs["view_a"]
    segments = inputs["segments"]
    corrs = inputs["corrs"]
    seq = inputs["seq"]
    um = inputs["um"]

    rotation_holder: dict = {}

    def do_calibrate(entry):
        K, rotation, warnings = stage_calibrate(
            segments, out / "intrinsics.json", out / "rotation.json", view_a
        )
        rotation_holder["R"] = rotation.R
        return [out / "intrinsics.json", out / "rotation.json"], warnings

    def do_fundamental(entry):
        out_stab = out / "stability.csv" if config.stability_sizes else None
        stage_fundamental(
            corrs,
            out / "fundamental.json",
            out / "epipoles.json",
            config.stability_sizes,
            config.stability_trials,
            config.seed,
            out_stab,
        )
        outputs = [out / "fundamental.json", out / "epipoles.json"]
        if out_stab:
            outputs.append(out_stab)
        return outputs, []

    cloud_holder: dict = {}

    def do_reconstruct(entry):
        cloud, profile_paths = stage_reconstruct(
            corrs,
            um,
            out / "cloud.csv",
            relative_rotation=rotation_holder.get("R"),
            profiles=config.profiles,
            out_dir=out,
        )
        cloud_holder["cloud"] = cloud
        return [out / "cloud.csv", *profile_paths], []

    tracks_holder: dict = {}

    def do_track(entry):
        seeds = [(c.id, c.xa, c.ya) for c in corrs]
        tracks = stage_track(seq, seeds, config.flow_params, out / "tracks.csv")
        tracks_holder["tracks"] = tracks
        n_lost = sum(
            1 for steps in tracks.tracks.values() if steps[-1].status == flow.LOST
        )
        warnings = [f"{n_lost} tracks lost before the first frame"] if n_lost else []
        return [out / "tracks.csv"], warnings

    def do_analyze(entry):
        stats, warnings = stage_analyze(
            tracks_holder["tracks"],
            um,
            out,
            cloud=cloud_holder.get("cloud"),
            bin_width=config.bin_width,
            exclude_suspect=config.exclude_suspect,
        )
        outputs = [
            out / "stats.json",
            out / "split.json",
            out / "histogram_dx.csv",
            out / "histogram_dy.csv",
            out / "histogram_dist.csv",
        ]
        if cloud_holder.get("cloud") is not None:
            outputs.append(out / "correlation.json")
        if stats.n_suspect:
            warnings.append(f"{stats.n_suspect} suspect points included in statistics")
        return outputs, warnings

    run_stage("calibrate", do_calibrate)
    run_stage("fundamental", do_fundamental)
    run_stage("reconstruct", do_reconstruct)
    run_stage("track", do_track)
    run_stage("analyze", do_analyze)

    formats.write_json(out / "report.json", report)
    return report


# --------------------------------------------------------------- interface


def _flow_params_from_args(args) -> flow.FlowParams:
    return flow.FlowParams(
        window=args.window,
        levels=args.levels,
        max_iter=args.max_iter,
        eps=args.eps,
        min_eig_threshold=args.min_eig,
        fb_threshold=args.fb_threshold,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semsurf",
        description="Surface depth and lateral motion from SEM image sequences",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="intrinsics and rotation from annotated lines")
    p.add_argument("--lines", required=True, help="lines.csv with parallel-line annotations")
    p.add_argument("--out", required=True, help="output intrinsics.json path")
    p.add_argument("--out-rotation", default=None, help="output rotation.json path (default: sibling rotation.json)")
    p.add_argument("--image", default=None, help="view-A image, used to check the principal point")

    p = sub.add_parser("fundamental", help="eight-point fundamental matrix and epipoles")
    p.add_argument("--correspondences", required=True)
    p.add_argument("--out", default=None, help="output fundamental.json (default: sibling of input)")
    p.add_argument("--out-epipoles", default=None)
    p.add_argument("--stability", default=None, help="comma-separated subset sizes, e.g. 10,20,30")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-stability", default=None)

    p = sub.add_parser("reconstruct", help="factorize correspondences into a depth cloud")
    p.add_argument("--correspondences", required=True)
    p.add_argument("--um-per-px", type=float, required=True)
    p.add_argument("--rotation", default=None, help="rotation.json from calibrate (required for two views)")
    p.add_argument("--out", required=True, help="output cloud.csv path")
    p.add_argument(
        "--profile",
        action="append",
        default=[],
        metavar="NAME=x,y,angle_deg,corridor",
        help="crack profile along a line (microns); repeatable",
    )

    p = sub.add_parser("track", help="propagate seed points backward through the frames")
    p.add_argument("--manifest", required=True, help="frames.json manifest")
    p.add_argument("--seeds", required=True, help="corners.csv, correspondences.csv or cloud.csv")
    p.add_argument("--out", required=True, help="output tracks.csv path")
    p.add_argument("--reverse", action="store_true", default=True,
                   help="traverse frames last-to-first (default)")
    p.add_argument("--window", type=int, default=21)
    p.add_argument("--levels", type=int, default=3)
    p.add_argument("--max-iter", type=int, default=30)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--min-eig", type=float, default=1e-4)
    p.add_argument("--fb-threshold", type=float, default=1.0)

    p = sub.add_parser("detect", help="Shi-Tomasi corners on one frame")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help="output corners.csv path")
    p.add_argument("--quality", type=float, default=0.35)
    p.add_argument("--min-distance", type=float, default=7.0)
    p.add_argument("--block-size", type=int, default=7)
    p.add_argument("--max-corners", type=int, default=None)

    p = sub.add_parser("analyze", help="displacement statistics and depth correlations")
    p.add_argument("--tracks", required=True)
    p.add_argument("--um-per-px", type=float, required=True)
    p.add_argument("--cloud", default=None)
    p.add_argument("--bin-width", type=float, default=0.1)
    p.add_argument("--exclude-suspect", action="store_true")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("pipeline", help="run every stage from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None, help="override the config's out_dir")
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")

    return parser


def _parse_profile_flag(raw: str) -> ProfileSpec:
    try:
        name, rest = raw.split("=", 1)
        x, y, angle, corridor = (float(v) for v in rest.split(","))
    except ValueError as exc:
        raise InputError(
            f"bad --profile value {raw!r}, expected NAME=x,y,angle_deg,corridor"
        ) from exc
    return ProfileSpec(name=name, anchor_x_um=x, anchor_y_um=y, angle_deg=angle, corridor_um=corridor)


def _run(args) -> None:
    if args.command == "calibrate":
        out = Path(args.out)
        out_rot = Path(args.out_rotation) if args.out_rotation else out.parent / "rotation.json"
        image = imagio.load_image(args.image) if args.image else None
        _, _, warnings = stage_calibrate(
            formats.read_lines_csv(args.lines), out, out_rot, image
        )
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)

    elif args.command == "fundamental":
        src = Path(args.correspondences)
        out_f = Path(args.out) if args.out else src.parent / "fundamental.json"
        out_e = Path(args.out_epipoles) if args.out_epipoles else out_f.parent / "epipoles.json"
        sizes: tuple[int, ...] = ()
        out_stab = None
        if args.stability:
            sizes = tuple(int(s) for s in args.stability.split(","))
            out_stab = Path(args.out_stability) if args.out_stability else out_f.parent / "stability.csv"
        stage_fundamental(
            formats.read_correspondences_csv(src),
            out_f, out_e, sizes, args.trials, args.seed, out_stab,
        )

    elif args.command == "reconstruct":
        rotation = formats.read_rotation_json(args.rotation) if args.rotation else None
        out_cloud = Path(args.out)
        stage_reconstruct(
            formats.read_correspondences_csv(args.correspondences),
            args.um_per_px,
            out_cloud,
            relative_rotation=rotation,
            profiles=tuple(_parse_profile_flag(s) for s in args.profile),
            out_dir=out_cloud.parent,
        )

    elif args.command == "track":
        seq = imagio.load_manifest(args.manifest)
        seeds = formats.read_seed_points(args.seeds)
        header = Path(args.seeds).read_text(encoding="utf-8").splitlines()[0]
        if header == formats.CLOUD_HEADER:
            seeds = [(pid, x / seq.um_per_px, y / seq.um_per_px) for pid, x, y in seeds]
        stage_track(seq, seeds, _flow_params_from_args(args), Path(args.out))

    elif args.command == "detect":
        img = imagio.load_image(args.image)
        corners = flow.shi_tomasi(
            img, args.quality, args.min_distance, args.block_size, args.max_corners
        )
        formats.write_corners_csv(Path(args.out), corners)

    elif args.command == "analyze":
        tracks = formats.read_tracks_csv(args.tracks)
        cloud = _cloud_from_csv(Path(args.cloud)) if args.cloud else None
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _, warnings = stage_analyze(
            tracks, args.um_per_px, out_dir, cloud, args.bin_width, args.exclude_suspect
        )
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)

    elif args.command == "pipeline":
        config = PipelineConfig.from_file(
            Path(args.config),
            out_dir=Path(args.out_dir) if args.out_dir else None,
            seed=args.seed,
        )
        report = run_pipeline(config)
        for stage in report["stages"]:
            for w in stage["warnings"]:
                print(f"warning [{stage['stage']}]: {w}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DegeneracyError as exc:
        print(f"degeneracy error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
