"""Aggregate statistics over tracked displacements and surface depths.

Displacement signs follow image axes: +x right, +y down. That matches the
way motion reads directly off the frames but is the reverse of lab-frame
y, so downward material motion is reported as positive dy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .flow import SUSPECT, TrackSet
from .sfm import SurfacePointCloud


@dataclass(frozen=True)
class DisplacementRecord:
    """Net in-plane displacement of one point from the earliest tracked
    frame to the final frame, in microns."""

    id: str
    dx_um: float
    dy_um: float
    dist_um: float
    suspect: bool


@dataclass(frozen=True)
class Histogram:
    """Fixed-width bins anchored at zero; edge values fall in the upper bin."""

    bin_width: float
    edges: tuple[float, ...]
    counts: tuple[int, ...]


@dataclass(frozen=True)
class DisplacementStats:
    mean_dx_um: float
    mean_dy_um: float
    mean_dist_um: float
    n_points: int
    n_suspect: int
    hist_dx: Histogram
    hist_dy: Histogram
    hist_dist: Histogram


@dataclass(frozen=True)
class BimodalSplit:
    """Deterministic 1D two-means clustering of displacement magnitudes."""

    threshold_um: float
    lower_mean_um: float
    upper_mean_um: float
    lower_count: int
    upper_count: int

    def __post_init__(self):
        if not (self.lower_mean_um <= self.threshold_um <= self.upper_mean_um):
            raise InputError("split threshold must lie between the cluster means")


@dataclass(frozen=True)
class DepthLateralCorrelation:
    """Pearson correlations between depth and lateral motion components.

    Scatter pairs are kept alongside each coefficient: (dist, z),
    (dist, |z|), (dx, z) and (dy, z).
    """

    r_z_dist: float
    r_abs_z_dist: float
    r_z_dx: float
    r_z_dy: float
    pairs_z_dist: np.ndarray
    pairs_abs_z_dist: np.ndarray
    pairs_z_dx: np.ndarray
    pairs_z_dy: np.ndarray


def net_displacements(
    tracks: TrackSet, um_per_px: float
) -> tuple[list[DisplacementRecord], int]:
    """Start-to-finish displacement per track, in microns.

    Tracks traverse end state to start state, so the physical start to
    finish displacement is (final-frame position) - (earliest tracked
    position). Tracks with a single position cannot give a displacement
    and are skipped; the second return value counts them.
    """
    if um_per_px <= 0:
        raise InputError("um_per_px must be > 0")
    records = []
    skipped = 0
    for pid, steps in tracks.tracks.items():
        if len(steps) < 2:
            skipped += 1
            continue
        final, earliest = steps[0], steps[-1]
        dx = (final.x - earliest.x) * um_per_px
        dy = (final.y - earliest.y) * um_per_px
        records.append(
            DisplacementRecord(
                id=pid,
                dx_um=dx,
                dy_um=dy,
                dist_um=math.hypot(dx, dy),
                suspect=any(s.status == SUSPECT for s in steps),
            )
        )
    return records, skipped


def histogram(values, bin_width: float) -> Histogram:
    """Counts over fixed-width bins with edges at integer multiples of
    ``bin_width``. A value exactly on an edge counts in the upper bin."""
    if bin_width <= 0:
        raise InputError("bin_width must be > 0")
    vals = np.asarray(values, dtype=np.float64)
    if vals.size == 0:
        raise InputError("no values to bin")
    k = np.floor(vals / bin_width).astype(np.int64)
    kmin, kmax = int(k.min()), int(k.max())
    counts = np.bincount(k - kmin, minlength=kmax - kmin + 1)
    edges = tuple(float(i * bin_width) for i in range(kmin, kmax + 2))
    return Histogram(bin_width=float(bin_width), edges=edges, counts=tuple(int(c) for c in counts))


def two_means_split(values) -> BimodalSplit:
    """Two-means clustering of a 1D sample, initialized at min and max.

    Iterates assignment and means to a fixed point; fully deterministic.
    """
    vals = np.asarray(values, dtype=np.float64)
    if vals.size < 2 or np.all(vals == vals[0]):
        raise InputError("degenerate: identical values")
    lo, hi = float(vals.min()), float(vals.max())
    upper = vals >= (lo + hi) / 2.0
    for _ in range(1000):
        m_lo = float(vals[~upper].mean())
        m_hi = float(vals[upper].mean())
        new_upper = vals >= (m_lo + m_hi) / 2.0
        if np.array_equal(new_upper, upper):
            break
        upper = new_upper
    m_lo = float(vals[~upper].mean())
    m_hi = float(vals[upper].mean())
    return BimodalSplit(
        threshold_um=(m_lo + m_hi) / 2.0,
        lower_mean_um=m_lo,
        upper_mean_um=m_hi,
        lower_count=int((~upper).sum()),
        upper_count=int(upper.sum()),
    )


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    da, db = a - a.mean(), b - b.mean()
    va, vb = float(da @ da), float(db @ db)
    if va == 0.0 or vb == 0.0:
        raise InputError("zero variance: correlation undefined")
    return float((da @ db) / math.sqrt(va * vb))


def correlate_depth_lateral(
    cloud: SurfacePointCloud, records: list[DisplacementRecord]
) -> DepthLateralCorrelation:
    """Join depths and displacements by id and correlate the four panels."""
    by_id = {r.id: r for r in records}
    joined = [(i, by_id[pid]) for i, pid in enumerate(cloud.ids) if pid in by_id]
    if len(joined) == 0:
        raise InputError("no joined points")
    if len(joined) < 3:
        raise InputError(f"fewer than 3 joined points (got {len(joined)})")
    z = np.array([cloud.z_um[i] for i, _ in joined])
    dx = np.array([r.dx_um for _, r in joined])
    dy = np.array([r.dy_um for _, r in joined])
    dist = np.array([r.dist_um for _, r in joined])
    return DepthLateralCorrelation(
        r_z_dist=_pearson(z, dist),
        r_abs_z_dist=_pearson(np.abs(z), dist),
        r_z_dx=_pearson(z, dx),
        r_z_dy=_pearson(z, dy),
        pairs_z_dist=np.column_stack([dist, z]),
        pairs_abs_z_dist=np.column_stack([dist, np.abs(z)]),
        pairs_z_dx=np.column_stack([dx, z]),
        pairs_z_dy=np.column_stack([dy, z]),
    )


def displacement_stats(
    records: list[DisplacementRecord],
    bin_width: float = 0.1,
    include_suspect: bool = True,
) -> DisplacementStats:
    """Means and histograms of the displacement components.

    Suspect-flagged records are included by default (with their count
    reported) and can be excluded wholesale.
    """
    used = records if include_suspect else [r for r in records if not r.suspect]
    if not used:
        raise InputError("no displacement records")
    dx = np.array([r.dx_um for r in used])
    dy = np.array([r.dy_um for r in used])
    dist = np.array([r.dist_um for r in used])
    return DisplacementStats(
        mean_dx_um=float(dx.mean()),
        mean_dy_um=float(dy.mean()),
        mean_dist_um=float(dist.mean()),
        n_points=len(used),
        n_suspect=sum(1 for r in used if r.suspect),
        hist_dx=histogram(dx, bin_width),
        hist_dy=histogram(dy, bin_width),
        hist_dist=histogram(dist, bin_width),
    )
