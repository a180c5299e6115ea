"""Fundamental-matrix estimation from manual correspondences.

Implements the normalized eight-point algorithm with Hartley
preconditioning, epipole extraction, Sampson residual diagnostics, and a
Monte-Carlo harness quantifying how the epipole estimate stabilizes as
the number of correspondences grows.

No outlier rejection is performed: correspondences are hand-picked and
assumed inlying; the residual report exposes bad clicks instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneracyError, InputError


@dataclass(frozen=True)
class Correspondence:
    """One manually matched point across the two end-state views (px)."""

    id: str
    xa: float
    ya: float
    xb: float
    yb: float


@dataclass(frozen=True)
class NormalizationTransform:
    """Similarity taking a point set to zero centroid and RMS radius sqrt(2)."""

    T: np.ndarray

    def __post_init__(self):
        T = np.asarray(self.T, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "T", T)
        if T[0, 0] <= 0 or T[0, 0] != T[1, 1] or T[0, 1] != 0 or T[1, 0] != 0:
            raise InputError("normalization must be an axis-aligned isotropic similarity")

    def apply(self, pts: np.ndarray) -> np.ndarray:
        return pts * self.T[0, 0] + self.T[:2, 2]


@dataclass(frozen=True)
class FundamentalMatrix:
    """Rank-2, Frobenius-normalized fundamental matrix.

    Sign is fixed so the largest-magnitude entry is positive.
    """

    F: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "F", F)
        svals = np.linalg.svd(F, compute_uv=False)
        if svals[2] > 1e-12 * svals[0]:
            raise InputError("F must have rank 2")
        if abs(np.linalg.norm(F) - 1.0) > 1e-12:
            raise InputError("F must be Frobenius-normalized")
        flat = F.ravel()
        if flat[np.argmax(np.abs(flat))] < 0:
            raise InputError("sign convention: largest-magnitude entry must be positive")


@dataclass(frozen=True)
class Epipoles:
    """Null directions of F: F e_a = 0 and F^T e_b = 0, unit norm."""

    e_a: np.ndarray
    e_b: np.ndarray

    def __post_init__(self):
        for name in ("e_a", "e_b"):
            e = np.asarray(getattr(self, name), dtype=np.float64).reshape(3)
            object.__setattr__(self, name, e)
            if abs(np.linalg.norm(e) - 1.0) > 1e-12:
                raise InputError(f"{name} must be unit norm")


@dataclass(frozen=True)
class StabilityReport:
    """Angular scatter of the epipole over random correspondence subsets."""

    subset_size: int
    trials: int
    epipole_spread_deg: float
    epipoles: np.ndarray  # (trials, 3) per-trial e_a

    def __post_init__(self):
        if self.trials < 2:
            raise InputError("trials must be >= 2")
        if self.epipole_spread_deg < 0:
            raise InputError("spread must be >= 0")


def _unique_ids(corrs: list[Correspondence]) -> None:
    ids = [c.id for c in corrs]
    if len(set(ids)) != len(ids):
        raise InputError("correspondence ids must be unique")


def hartley_normalize(points: np.ndarray) -> tuple[NormalizationTransform, np.ndarray]:
    """Translate to zero centroid and scale to RMS radius sqrt(2).

    Raises when all points coincide (the scale is undefined).
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] < 2:
        raise InputError("need at least 2 points to normalize")
    centroid = pts.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((pts - centroid) ** 2, axis=1)))
    if rms == 0.0:
        raise DegeneracyError("all points coincident: normalization scale undefined")
    s = np.sqrt(2.0) / rms
    T = np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )
    return NormalizationTransform(T=T), (pts - centroid) * s


def eight_point(corrs: list[Correspondence]) -> FundamentalMatrix:
    """Normalized eight-point estimate of the fundamental matrix.

    Both point sets are Hartley-normalized, the unit 9-vector minimizing
    the stacked epipolar constraints is taken from the smallest singular
    vector, rank 2 is enforced by zeroing the smallest singular value,
    and the result is denormalized as Tb^T F Ta.
    """
    if len(corrs) < 8:
        raise InputError(f"insufficient correspondences: need >= 8, got {len(corrs)}")
    _unique_ids(corrs)
    pa = np.array([[c.xa, c.ya] for c in corrs])
    pb = np.array([[c.xb, c.yb] for c in corrs])
    Ta, na = hartley_normalize(pa)
    Tb, nb = hartley_normalize(pb)

    xa, ya = na[:, 0], na[:, 1]
    xb, yb = nb[:, 0], nb[:, 1]
    ones = np.ones(len(corrs))
    A = np.column_stack(
        [xb * xa, xb * ya, xb, yb * xa, yb * ya, yb, xa, ya, ones]
    )
    _, svals, vt = np.linalg.svd(A)
    # sigma_8 of the 9-column spectrum; a (near-)zero value means the
    # constraint null space has dimension > 1 and F is not unique
    if svals[7] < 1e-12:
        raise DegeneracyError("degenerate configuration: correspondences are rank-deficient")
    Fn = vt[-1].reshape(3, 3)

    u, s, vt = np.linalg.svd(Fn)
    Fn = u @ np.diag([s[0], s[1], 0.0]) @ vt
    Tam, Tbm = Ta.T, Tb.T
    F = Tbm.T @ Fn @ Tam

    # re-zero the smallest singular value after denormalization so the
    # rank-2 invariant holds exactly at output scale
    u, s, vt = np.linalg.svd(F)
    F = u @ np.diag([s[0], s[1], 0.0]) @ vt
    F = F / np.linalg.norm(F)
    flat = F.ravel()
    if flat[np.argmax(np.abs(flat))] < 0:
        F = -F
    return FundamentalMatrix(F=F)


def _fix_sign_last_nonzero(e: np.ndarray) -> np.ndarray:
    nz = np.where(np.abs(e) > 1e-12)[0]
    k = nz[-1] if len(nz) else 2
    return -e if e[k] < 0 else e


def epipoles(F: FundamentalMatrix) -> Epipoles:
    """Unit null vectors of F: e_a on the right, e_b on the left."""
    u, _, vt = np.linalg.svd(F.F)
    e_a = _fix_sign_last_nonzero(vt[2])
    e_b = _fix_sign_last_nonzero(u[:, 2])
    return Epipoles(e_a=e_a, e_b=e_b)


def epipolar_residuals(F: FundamentalMatrix, corrs: list[Correspondence]) -> np.ndarray:
    """First-order (Sampson) distance of each correspondence, in px."""
    if not corrs:
        raise InputError("no correspondences")
    pa = np.column_stack(
        [[c.xa for c in corrs], [c.ya for c in corrs], np.ones(len(corrs))]
    )
    pb = np.column_stack(
        [[c.xb for c in corrs], [c.yb for c in corrs], np.ones(len(corrs))]
    )
    Fa = pa @ F.F.T  # rows: F @ pa_i
    Fb = pb @ F.F  # rows: F^T @ pb_i
    num = np.abs(np.sum(pb * Fa, axis=1))
    den = np.sqrt(Fa[:, 0] ** 2 + Fa[:, 1] ** 2 + Fb[:, 0] ** 2 + Fb[:, 1] ** 2)
    return num / den


def _axial_spread_deg(es: np.ndarray) -> float:
    # epipoles are axial (e and -e identical): measure RMS angle about the
    # principal axis of the orientation matrix
    M = es.T @ es / es.shape[0]
    _, vecs = np.linalg.eigh(M)
    axis = vecs[:, -1]
    cosang = np.clip(np.abs(es @ axis), -1.0, 1.0)
    ang = np.degrees(np.arccos(cosang))
    return float(np.sqrt(np.mean(ang**2)))


def epipole_stability(
    corrs: list[Correspondence],
    subset_sizes: list[int],
    trials: int,
    seed: int,
) -> list[StabilityReport]:
    """Epipole scatter across random correspondence subsets per size.

    Subsets are drawn without replacement by PCG64 generators seeded from
    (seed, subset_size, trial), so reports are reproducible byte-for-byte
    and trials are independent streams.
    """
    _unique_ids(corrs)
    if trials < 2:
        raise InputError("trials must be >= 2")
    n = len(corrs)
    reports = []
    for size in subset_sizes:
        if size < 8 or size > n:
            raise InputError(f"subset size {size} out of range [8, {n}]")
        es = np.empty((trials, 3))
        for t in range(trials):
            rng = np.random.default_rng([seed, size, t])
            idx = rng.choice(n, size=size, replace=False)
            F = eight_point([corrs[i] for i in idx])
            es[t] = epipoles(F).e_a
        reports.append(
            StabilityReport(
                subset_size=size,
                trials=trials,
                epipole_spread_deg=_axial_spread_deg(es),
                epipoles=es,
            )
        )
    return reports
