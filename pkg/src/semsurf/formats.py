"""Readers and writers for every file the pipeline consumes or emits.

All text is UTF-8 with LF line endings, exactly one CSV header row,
dot-decimal floats in shortest round-trip form. Identical inputs
therefore serialize to byte-identical outputs, which the golden and
determinism tests rely on.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .analysis import (
    BimodalSplit,
    DepthLateralCorrelation,
    DisplacementStats,
    Histogram,
)
from .calib import Intrinsics, LineSegment, RotationEstimate
from .epipolar import Correspondence, Epipoles, FundamentalMatrix, StabilityReport
from .errors import InputError
from .flow import Corner, TrackSet, TrackStep
from .sfm import CrackProfile, SurfacePointCloud


def fmt(x) -> str:
    """Shortest round-trip decimal for floats, plain digits for ints."""
    if isinstance(x, (bool, np.bool_)):
        raise TypeError("no boolean columns in any schema")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def write_json(path: Path, obj) -> None:
    _write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _read_rows(path: Path, expected_header: str) -> list[tuple[int, list[str]]]:
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing file: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise InputError(f"{path}:1: empty file, expected header {expected_header!r}")
    if lines[0] != expected_header:
        raise InputError(
            f"{path}:1: bad header {lines[0]!r}, expected {expected_header!r}"
        )
    rows = []
    ncols = len(expected_header.split(","))
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != ncols:
            raise InputError(
                f"{path}:{lineno}: expected {ncols} fields, got {len(fields)}"
            )
        rows.append((lineno, fields))
    return rows


def _parse_float(path: Path, lineno: int, col: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise InputError(f"{path}:{lineno}: column {col!r}: invalid number {raw!r}") from exc


def _parse_int(path: Path, lineno: int, col: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise InputError(f"{path}:{lineno}: column {col!r}: invalid integer {raw!r}") from exc


# ---------------------------------------------------------------- lines.csv

LINES_HEADER = "plane_id,view,x0,y0,x1,y1"


def read_lines_csv(path) -> list[LineSegment]:
    segments = []
    for lineno, f in _read_rows(Path(path), LINES_HEADER):
        if f[1] not in ("A", "B"):
            raise InputError(f"{path}:{lineno}: column 'view': must be A or B, got {f[1]!r}")
        segments.append(
            LineSegment(
                plane_id=_parse_int(path, lineno, "plane_id", f[0]),
                view_id=f[1],
                x0=_parse_float(path, lineno, "x0", f[2]),
                y0=_parse_float(path, lineno, "y0", f[3]),
                x1=_parse_float(path, lineno, "x1", f[4]),
                y1=_parse_float(path, lineno, "y1", f[5]),
            )
        )
    if not segments:
        raise InputError(f"{path}: no line segments")
    return segments


def write_lines_csv(path, segments: list[LineSegment]) -> None:
    rows = [LINES_HEADER]
    for s in segments:
        rows.append(
            f"{s.plane_id},{s.view_id},{fmt(s.x0)},{fmt(s.y0)},{fmt(s.x1)},{fmt(s.y1)}"
        )
    _write_text(Path(path), "\n".join(rows) + "\n")


# ------------------------------------------------------- correspondences.csv

CORRESPONDENCES_HEADER = "id,x_a,y_a,x_b,y_b"


def read_correspondences_csv(path) -> list[Correspondence]:
    corrs = []
    seen = set()
    for lineno, f in _read_rows(Path(path), CORRESPONDENCES_HEADER):
        if f[0] in seen:
            raise InputError(f"{path}:{lineno}: column 'id': duplicate id {f[0]!r}")
        seen.add(f[0])
        corrs.append(
            Correspondence(
                id=f[0],
                xa=_parse_float(path, lineno, "x_a", f[1]),
                ya=_parse_float(path, lineno, "y_a", f[2]),
                xb=_parse_float(path, lineno, "x_b", f[3]),
                yb=_parse_float(path, lineno, "y_b", f[4]),
            )
        )
    if not corrs:
        raise InputError(f"{path}: no correspondences")
    return corrs


def write_correspondences_csv(path, corrs: list[Correspondence]) -> None:
    rows = [CORRESPONDENCES_HEADER]
    for c in corrs:
        rows.append(f"{c.id},{fmt(c.xa)},{fmt(c.ya)},{fmt(c.xb)},{fmt(c.yb)}")
    _write_text(Path(path), "\n".join(rows) + "\n")


# ---------------------------------------------------------------- cloud.csv

CLOUD_HEADER = "id,x_um,y_um,z_um"


def write_cloud_csv(path, cloud: SurfacePointCloud) -> None:
    rows = [CLOUD_HEADER]
    for i, pid in enumerate(cloud.ids):
        rows.append(
            f"{pid},{fmt(cloud.x_um[i])},{fmt(cloud.y_um[i])},{fmt(cloud.z_um[i])}"
        )
    _write_text(Path(path), "\n".join(rows) + "\n")


def read_cloud_csv(path) -> dict[str, tuple[float, float, float]]:
    points: dict[str, tuple[float, float, float]] = {}
    for lineno, f in _read_rows(Path(path), CLOUD_HEADER):
        if f[0] in points:
            raise InputError(f"{path}:{lineno}: column 'id': duplicate id {f[0]!r}")
        points[f[0]] = (
            _parse_float(path, lineno, "x_um", f[1]),
            _parse_float(path, lineno, "y_um", f[2]),
            _parse_float(path, lineno, "z_um", f[3]),
        )
    if not points:
        raise InputError(f"{path}: no cloud points")
    return points


# --------------------------------------------------------------- tracks.csv

TRACKS_HEADER = "id,frame_index,x_px,y_px,status"
_STATUSES = ("tracked", "lost", "suspect")


def write_tracks_csv(path, tracks: TrackSet) -> None:
    rows = [TRACKS_HEADER]
    for pid, steps in tracks.tracks.items():
        for s in steps:
            rows.append(f"{pid},{s.frame_index},{fmt(s.x)},{fmt(s.y)},{s.status}")
    _write_text(Path(path), "\n".join(rows) + "\n")


def read_tracks_csv(path) -> TrackSet:
    steps: dict[str, list[TrackStep]] = {}
    for lineno, f in _read_rows(Path(path), TRACKS_HEADER):
        if f[4] not in _STATUSES:
            raise InputError(f"{path}:{lineno}: column 'status': unknown status {f[4]!r}")
        steps.setdefault(f[0], []).append(
            TrackStep(
                frame_index=_parse_int(path, lineno, "frame_index", f[1]),
                x=_parse_float(path, lineno, "x_px", f[2]),
                y=_parse_float(path, lineno, "y_px", f[3]),
                status=f[4],
            )
        )
    if not steps:
        raise InputError(f"{path}: no tracks")
    return TrackSet(tracks={k: tuple(v) for k, v in steps.items()}, direction="reverse")


# -------------------------------------------------------------- corners.csv

CORNERS_HEADER = "id,x_px,y_px,response"


def write_corners_csv(path, corners: list[Corner]) -> None:
    rows = [CORNERS_HEADER]
    for i, c in enumerate(corners):
        rows.append(f"c{i + 1:03d},{fmt(c.x)},{fmt(c.y)},{fmt(c.response)}")
    _write_text(Path(path), "\n".join(rows) + "\n")


def read_seed_points(path) -> list[tuple[str, float, float]]:
    """Seed points for tracking, sniffed from the file header.

    Accepts corners.csv (uses x_px/y_px), correspondences.csv (uses the
    view-A coordinates) or cloud.csv (coordinates in microns; the caller
    must divide by um_per_px).
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing file: {path}")
    header = path.read_text(encoding="utf-8").splitlines()[0:1]
    header = header[0] if header else ""
    if header == CORNERS_HEADER:
        return [
            (f[0], _parse_float(path, ln, "x_px", f[1]), _parse_float(path, ln, "y_px", f[2]))
            for ln, f in _read_rows(path, CORNERS_HEADER)
        ]
    if header == CORRESPONDENCES_HEADER:
        return [(c.id, c.xa, c.ya) for c in read_correspondences_csv(path)]
    if header == CLOUD_HEADER:
        return [(pid, x, y) for pid, (x, y, _) in read_cloud_csv(path).items()]
    raise InputError(f"{path}:1: unrecognized seed file header {header!r}")


# ------------------------------------------------------------ stability.csv

STABILITY_HEADER = "subset_size,trials,epipole_spread_deg"


def write_stability_csv(path, reports: list[StabilityReport]) -> None:
    rows = [STABILITY_HEADER]
    for r in reports:
        rows.append(f"{r.subset_size},{r.trials},{fmt(r.epipole_spread_deg)}")
    _write_text(Path(path), "\n".join(rows) + "\n")


# ------------------------------------------------------------- profile CSVs

PROFILE_HEADER = "id,s_um,z_um"


def write_profile_csv(path, profile: CrackProfile) -> None:
    rows = [PROFILE_HEADER]
    for pid, s, z in zip(profile.ids, profile.s_um, profile.z_um):
        rows.append(f"{pid},{fmt(s)},{fmt(z)}")
    _write_text(Path(path), "\n".join(rows) + "\n")


# ----------------------------------------------------------- histogram CSVs

HISTOGRAM_HEADER = "bin_start,bin_end,count"


def write_histogram_csv(path, hist: Histogram) -> None:
    rows = [HISTOGRAM_HEADER]
    for i, count in enumerate(hist.counts):
        rows.append(f"{fmt(hist.edges[i])},{fmt(hist.edges[i + 1])},{count}")
    _write_text(Path(path), "\n".join(rows) + "\n")


# ------------------------------------------------------------- JSON outputs


def write_intrinsics_json(path, K: Intrinsics, warnings: list[str] | None = None) -> None:
    obj = {"f_px": float(K.f), "cx_px": float(K.cx), "cy_px": float(K.cy)}
    if warnings:
        obj["warnings"] = list(warnings)
    write_json(Path(path), obj)


def read_intrinsics_json(path) -> Intrinsics:
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing file: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    return Intrinsics(f=float(doc["f_px"]), cx=float(doc["cx_px"]), cy=float(doc["cy_px"]))


def write_rotation_json(path, R: RotationEstimate) -> None:
    write_json(
        Path(path),
        {
            "R": [float(v) for v in R.R.ravel()],
            "euler_zyx_deg": [
                float(R.euler_z_deg),
                float(R.euler_y_deg),
                float(R.euler_x_deg),
            ],
        },
    )


def read_rotation_json(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing file: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    R = np.array([float(v) for v in doc["R"]], dtype=np.float64)
    if R.size != 9:
        raise InputError(f"{path}: key 'R' must hold 9 row-major entries")
    return R.reshape(3, 3)


def write_fundamental_json(path, F: FundamentalMatrix, residuals: np.ndarray) -> None:
    write_json(
        Path(path),
        {
            "F": [float(v) for v in F.F.ravel()],
            "max_sampson_px": float(np.max(residuals)),
            "mean_sampson_px": float(np.mean(residuals)),
        },
    )


def write_epipoles_json(path, e: Epipoles) -> None:
    write_json(
        Path(path),
        {
            "e_a": [float(v) for v in e.e_a],
            "e_b": [float(v) for v in e.e_b],
        },
    )


def _hist_obj(hist: Histogram) -> dict:
    return {
        "bin_width": hist.bin_width,
        "edges": [float(e) for e in hist.edges],
        "counts": [int(c) for c in hist.counts],
    }


def write_stats_json(path, stats: DisplacementStats) -> None:
    write_json(
        Path(path),
        {
            "mean_dx_um": stats.mean_dx_um,
            "mean_dy_um": stats.mean_dy_um,
            "mean_dist_um": stats.mean_dist_um,
            "n_points": stats.n_points,
            "n_suspect": stats.n_suspect,
            "histograms": {
                "dx": _hist_obj(stats.hist_dx),
                "dy": _hist_obj(stats.hist_dy),
                "dist": _hist_obj(stats.hist_dist),
            },
        },
    )


def write_split_json(path, split: BimodalSplit) -> None:
    write_json(
        Path(path),
        {
            "threshold_um": split.threshold_um,
            "lower_mean_um": split.lower_mean_um,
            "upper_mean_um": split.upper_mean_um,
            "lower_count": split.lower_count,
            "upper_count": split.upper_count,
        },
    )


def write_correlation_json(path, corr: DepthLateralCorrelation) -> None:
    def pairs(a: np.ndarray) -> list[list[float]]:
        return [[float(u), float(v)] for u, v in a]

    write_json(
        Path(path),
        {
            "r_z_vs_dist": corr.r_z_dist,
            "r_abs_z_vs_dist": corr.r_abs_z_dist,
            "r_z_vs_dx": corr.r_z_dx,
            "r_z_vs_dy": corr.r_z_dy,
            "pairs": {
                "z_vs_dist": pairs(corr.pairs_z_dist),
                "abs_z_vs_dist": pairs(corr.pairs_abs_z_dist),
                "z_vs_dx": pairs(corr.pairs_z_dx),
                "z_vs_dy": pairs(corr.pairs_z_dy),
            },
        },
    )
