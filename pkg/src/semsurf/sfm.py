"""Affine factorization of multi-view tracks into metric surface structure.

The registered measurement matrix of V orthographic views of P points has
rank 3; its truncated SVD splits into motion and shape, and the per-view
row-orthonormality constraints upgrade the affine gauge to a metric one.
Depth is reported relative to the least-squares plane of the recovered
cloud, in microns, anchored by the known lateral pixel scale.

The orthographic mirror ambiguity (structure and its z-reflection explain
the same measurements) is inherent and left to the caller; depths are
signed consistently with a plane normal of positive z-component.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import DegeneracyError, InputError


@dataclass(frozen=True)
class MeasurementMatrix:
    """Registered 2V x P track matrix: x-rows of all views, then y-rows."""

    W: np.ndarray
    centroids: np.ndarray  # (V, 2) per-view centroid removed on registration
    point_ids: tuple[str, ...]

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        centroids = np.asarray(self.centroids, dtype=np.float64)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "point_ids", tuple(self.point_ids))
        if W.ndim != 2 or W.shape[0] % 2 != 0:
            raise InputError("W must be a 2V x P matrix")
        if W.shape[0] < 4:
            raise InputError("need V >= 2 views")
        if W.shape[1] < 3:
            raise InputError("need P >= 3 points")
        if len(self.point_ids) != W.shape[1]:
            raise InputError("one id per point column required")
        scale = max(1.0, float(np.max(np.abs(W))))
        if np.max(np.abs(W.sum(axis=1))) > 1e-9 * scale * W.shape[1]:
            raise InputError("W rows must sum to zero (unregistered matrix)")

    @property
    def n_views(self) -> int:
        return self.W.shape[0] // 2

    @property
    def n_points(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class AffineStructure:
    """Motion (2V x 3) and shape (3 x P) factors of a measurement matrix."""

    M: np.ndarray
    S: np.ndarray
    centroids: np.ndarray
    point_ids: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "M", np.asarray(self.M, dtype=np.float64))
        object.__setattr__(self, "S", np.asarray(self.S, dtype=np.float64))
        object.__setattr__(self, "centroids", np.asarray(self.centroids, dtype=np.float64))
        object.__setattr__(self, "point_ids", tuple(self.point_ids))

    @property
    def n_views(self) -> int:
        return self.M.shape[0] // 2


@dataclass(frozen=True)
class SurfacePointCloud:
    """Reconstructed points with signed plane-relative depth in microns.

    x_um/y_um are absolute view-A image coordinates scaled to microns, so
    dividing by um_per_px recovers the original pixel positions. z_um is
    the signed distance to the least-squares plane; the plane normal has
    positive z-component, so protrusion toward the camera is positive.
    """

    ids: tuple[str, ...]
    x_um: np.ndarray
    y_um: np.ndarray
    z_um: np.ndarray
    plane_normal: np.ndarray
    plane_offset: float

    def __post_init__(self):
        for name in ("x_um", "y_um", "z_um"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "plane_normal", np.asarray(self.plane_normal, dtype=np.float64))
        n = len(self.ids)
        if not (len(self.x_um) == len(self.y_um) == len(self.z_um) == n):
            raise InputError("cloud arrays must share length")
        scale = max(1.0, float(np.max(np.abs(self.z_um))) if n else 1.0)
        if n and abs(float(np.mean(self.z_um))) > 1e-9 * scale:
            raise InputError("mean signed depth must be zero (plane is least-squares fit)")


@dataclass(frozen=True)
class CrackProfile:
    """Depth samples ordered by arclength along a crack line."""

    ids: tuple[str, ...]
    s_um: np.ndarray
    z_um: np.ndarray
    anchor: tuple[float, float]
    angle_deg: float
    corridor_um: float

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "s_um", np.asarray(self.s_um, dtype=np.float64))
        object.__setattr__(self, "z_um", np.asarray(self.z_um, dtype=np.float64))
        if np.any(np.diff(self.s_um) < 0):
            raise InputError("profile arclength must be non-decreasing")


@dataclass(frozen=True)
class DepthProjections:
    """Depth scatter against each image axis with linear trend slopes."""

    xz: np.ndarray  # (P, 2) pairs (x_um, z_um)
    yz: np.ndarray  # (P, 2) pairs (y_um, z_um)
    slope_zx: float | None
    slope_zy: float | None


def build_measurement_matrix(
    tracks: Mapping[str, Sequence[tuple[float, float]]]
) -> MeasurementMatrix:
    """Stack per-point view positions into a registered measurement matrix.

    Every point must be observed in every view. Rows are the x-rows of
    all views followed by the y-rows, with per-view centroids removed.
    """
    ids = tuple(tracks.keys())
    if len(ids) < 3:
        raise InputError(f"P < 3 distinct points (got {len(ids)})")
    n_views = len(next(iter(tracks.values())))
    if n_views < 2:
        raise InputError("need V >= 2 views")
    obs = np.empty((n_views, len(ids), 2))
    for j, pid in enumerate(ids):
        positions = tracks[pid]
        if len(positions) != n_views:
            raise InputError(f"missing observation for point {pid!r}")
        obs[:, j, :] = positions

    distinct = {tuple(obs[:, j, :].ravel()) for j in range(len(ids))}
    if len(distinct) < 3:
        raise InputError("P < 3 distinct points")

    centroids = obs.mean(axis=1)  # (V, 2)
    registered = obs - centroids[:, None, :]
    W = np.vstack([registered[:, :, 0], registered[:, :, 1]])
    return MeasurementMatrix(W=W, centroids=centroids, point_ids=ids)


def factorize(W: MeasurementMatrix) -> AffineStructure:
    """Rank-3 SVD split of the measurement matrix into motion and shape."""
    u, s, vt = np.linalg.svd(W.W, full_matrices=False)
    if s[2] <= 1e-9 * s[0]:
        raise DegeneracyError(
            "rank-deficient measurement matrix: scene is planar (rank 2)"
        )
    root = np.sqrt(s[:3])
    M = u[:, :3] * root
    S = root[:, None] * vt[:3]
    return AffineStructure(M=M, S=S, centroids=W.centroids, point_ids=W.point_ids)


def _constraint_row(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # coefficients of the symmetric L (l11,l12,l13,l22,l23,l33) in a^T L b
    return np.array(
        [
            a[0] * b[0],
            a[0] * b[1] + a[1] * b[0],
            a[0] * b[2] + a[2] * b[0],
            a[1] * b[1],
            a[1] * b[2] + a[2] * b[1],
            a[2] * b[2],
        ]
    )


def _align_first_view(M: np.ndarray, S: np.ndarray, V: int) -> tuple[np.ndarray, np.ndarray]:
    # rotate the gauge so the first view's rows become the identity frame
    i1, j1 = M[0], M[V]
    B = np.vstack([i1, j1, np.cross(i1, j1)])
    u, _, vt = np.linalg.svd(B)
    d = np.sign(np.linalg.det(u @ vt))
    R1 = u @ np.diag([1.0, 1.0, d]) @ vt
    return M @ R1.T, R1 @ S


def metric_upgrade(
    structure: AffineStructure, relative_rotation: np.ndarray | None = None
) -> AffineStructure:
    """Upgrade the affine factors so motion rows are orthonormal per view.

    For three or more views the row constraints |i_v| = |j_v| = 1 and
    i_v . j_v = 0 determine the Gram matrix L = Q Q^T in least squares;
    L is factored by eigendecomposition (small negative eigenvalues are
    clamped, genuinely indefinite systems rejected), Q is applied and the
    first view's rows are rotated onto the identity frame.

    Two views leave a one-parameter family of metric interpretations (the
    relief scale trades off against the assumed out-of-plane rotation),
    so the inter-view rotation must be supplied to pin the member: with
    ``relative_rotation`` given, the metric motion rows are known exactly
    and the mixing matrix is solved directly in least squares.
    """
    V = structure.n_views
    M, S = structure.M, structure.S

    if V == 2 and relative_rotation is not None:
        Rg = np.asarray(relative_rotation, dtype=np.float64).reshape(3, 3)
        target = np.vstack([[1.0, 0.0, 0.0], Rg[0], [0.0, 1.0, 0.0], Rg[1]])
        G, *_ = np.linalg.lstsq(M, target, rcond=None)
        if abs(np.linalg.det(G)) < 1e-12:
            raise DegeneracyError("metric mixing matrix is singular")
        M2 = M @ G
        S2 = np.linalg.solve(G, S)
        M2, S2 = _align_first_view(M2, S2, V)
        return AffineStructure(
            M=M2, S=S2, centroids=structure.centroids, point_ids=structure.point_ids
        )

    rows, rhs = [], []
    for v in range(V):
        iv, jv = M[v], M[V + v]
        rows.append(_constraint_row(iv, iv))
        rhs.append(1.0)
        rows.append(_constraint_row(jv, jv))
        rhs.append(1.0)
        rows.append(_constraint_row(iv, jv))
        rhs.append(0.0)
    A = np.array(rows)
    svals = np.linalg.svd(A, compute_uv=False)
    if svals[5] <= 1e-9 * svals[0]:
        raise DegeneracyError(
            "metric upgrade is underdetermined: two orthographic views leave a "
            "one-parameter relief family; supply the inter-view rotation"
        )
    sol, *_ = np.linalg.lstsq(A, np.array(rhs), rcond=None)
    L = np.array(
        [
            [sol[0], sol[1], sol[2]],
            [sol[1], sol[3], sol[4]],
            [sol[2], sol[4], sol[5]],
        ]
    )
    w, vec = np.linalg.eigh(L)
    wmax = w[-1]
    if wmax <= 0:
        raise DegeneracyError("metric constraints yield a non-positive Gram matrix")
    if w[0] < -1e-6 * wmax:
        raise DegeneracyError(
            "metric constraints are not positive semidefinite: "
            "inconsistent or too-noisy motion"
        )
    w = np.maximum(w, 1e-12 * wmax)  # keep Q invertible after clamping
    Q = vec * np.sqrt(w)

    M2 = M @ Q
    S2 = np.linalg.solve(Q, S)
    M2, S2 = _align_first_view(M2, S2, V)
    return AffineStructure(
        M=M2, S=S2, centroids=structure.centroids, point_ids=structure.point_ids
    )


def scale_and_depth(structure: AffineStructure, um_per_px: float) -> SurfacePointCloud:
    """Scale the metric shape to microns and measure plane-relative depth.

    The factorization is in pixel units; the similarity scale is fixed by
    the known lateral pixel size. The view-A centroid is restored so x/y
    are absolute view-A image coordinates in microns.
    """
    if um_per_px <= 0:
        raise InputError("um_per_px must be > 0")
    S = structure.S
    if S.shape[1] < 3:
        raise InputError("need at least 3 points for a reference plane")
    x_um = (S[0] + structure.centroids[0, 0]) * um_per_px
    y_um = (S[1] + structure.centroids[0, 1]) * um_per_px
    z_um = S[2] * um_per_px

    pts = np.column_stack([x_um, y_um, z_um])
    center = pts.mean(axis=0)
    centered = pts - center
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[1] <= 1e-9 * max(svals[0], 1e-30):
        raise DegeneracyError("plane undefined: points are collinear")
    normal = vt[2]
    if abs(normal[2]) > 1e-12:
        if normal[2] < 0:
            normal = -normal
    else:
        k = int(np.argmax(np.abs(normal)))
        if normal[k] < 0:
            normal = -normal
    depth = centered @ normal
    return SurfacePointCloud(
        ids=structure.point_ids,
        x_um=pts[:, 0],
        y_um=pts[:, 1],
        z_um=depth,
        plane_normal=normal,
        plane_offset=float(normal @ center),
    )


def crack_profile(
    cloud: SurfacePointCloud,
    anchor: tuple[float, float],
    angle_deg: float,
    corridor_um: float,
) -> CrackProfile:
    """Depth profile along a line through the cloud.

    Selects points within ``corridor_um`` perpendicular distance of the
    line through ``anchor`` at ``angle_deg`` from the image horizontal,
    ordered by arclength (ties broken by point id).
    """
    if corridor_um <= 0:
        raise InputError("corridor_um must be > 0")
    if len(cloud.ids) == 0:
        raise InputError("empty cloud")
    theta = np.radians(angle_deg)
    d = np.array([np.cos(theta), np.sin(theta)])
    n = np.array([-np.sin(theta), np.cos(theta)])
    rel = np.column_stack([cloud.x_um - anchor[0], cloud.y_um - anchor[1]])
    s = rel @ d
    t = rel @ n
    keep = np.where(np.abs(t) <= corridor_um)[0]
    if len(keep) == 0:
        raise InputError("no points within corridor")
    order = sorted(keep, key=lambda i: (s[i], cloud.ids[i]))
    return CrackProfile(
        ids=tuple(cloud.ids[i] for i in order),
        s_um=s[order],
        z_um=cloud.z_um[order],
        anchor=(float(anchor[0]), float(anchor[1])),
        angle_deg=float(angle_deg),
        corridor_um=float(corridor_um),
    )


def _trend_slope(x: np.ndarray, z: np.ndarray) -> float | None:
    dx = x - x.mean()
    var = float(dx @ dx)
    if var == 0.0:
        return None
    return float(dx @ (z - z.mean()) / var)


def depth_projections(cloud: SurfacePointCloud) -> DepthProjections:
    """Depth scatter onto the x-z and y-z planes with linear trends.

    Slopes are dimensionless (microns per micron); a slope is None when
    the corresponding coordinate has no variation.
    """
    if len(cloud.ids) < 2:
        raise InputError("need at least 2 points")
    return DepthProjections(
        xz=np.column_stack([cloud.x_um, cloud.z_um]),
        yz=np.column_stack([cloud.y_um, cloud.z_um]),
        slope_zx=_trend_slope(cloud.x_um, cloud.z_um),
        slope_zy=_trend_slope(cloud.y_um, cloud.z_um),
    )
