"""Camera intrinsics and inter-view rotation from annotated parallel lines.

Two or more segments per orthogonal scene direction give one vanishing
point each; three mutually orthogonal vanishing points constrain a
zero-skew, unit-aspect camera (f, cx, cy) through the image of the
absolute conic, and their back-projections give the view's rotation.

Conventions fixed here (the data alone cannot resolve them):

* Euler angles use the extrinsic Z-Y-X convention, R = Rx @ Ry @ Rz.
* Vanishing directions are sign-ambiguous, so rotations are recoverable
  only up to flipping pairs of axes. The returned representative has
  det = +1, a third column with positive z-component and a first column
  with positive x-component (largest-magnitude component as fallback
  when those are zero). ``canonicalize_axes`` maps any rotation onto the
  same representative for comparison against external ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .errors import DegeneracyError, InputError

_VIEW_IDS = ("A", "B")


@dataclass(frozen=True)
class LineSegment:
    """A 2D segment annotated with its scene direction group and view."""

    x0: float
    y0: float
    x1: float
    y1: float
    plane_id: int
    view_id: str

    def __post_init__(self):
        if self.plane_id not in (0, 1, 2):
            raise InputError(f"plane_id must be 0, 1 or 2 (got {self.plane_id})")
        if self.view_id not in _VIEW_IDS:
            raise InputError(f"view_id must be A or B (got {self.view_id!r})")
        if math.hypot(self.x1 - self.x0, self.y1 - self.y0) <= 1.0:
            raise InputError("segment endpoints must be more than 1 px apart")


@dataclass(frozen=True)
class VanishingPoint:
    """Homogeneous image point of a scene direction, unit norm."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.float64).reshape(3)
        n = np.linalg.norm(v)
        if n == 0.0:
            raise InputError("vanishing point must be a nonzero 3-vector")
        v = v / n
        k = int(np.argmax(np.abs(v)))
        if v[k] < 0:
            v = -v
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class Intrinsics:
    """Zero-skew, unit-aspect pinhole intrinsics."""

    f: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.f <= 0:
            raise InputError("focal length must be > 0")

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.f, 0.0, self.cx], [0.0, self.f, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class RotationEstimate:
    """A proper rotation with its Z-Y-X Euler decomposition in degrees."""

    R: np.ndarray
    euler_z_deg: float
    euler_y_deg: float
    euler_x_deg: float

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        object.__setattr__(self, "R", R)
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise InputError("R is not orthonormal to 1e-9")
        if abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise InputError("R must have determinant +1")
        recomposed = matrix_from_euler_zyx(
            self.euler_z_deg, self.euler_y_deg, self.euler_x_deg
        )
        if np.max(np.abs(recomposed - R)) > 1e-9:
            raise InputError("Euler angles do not recompose R to 1e-9")


def matrix_from_euler_zyx(z_deg: float, y_deg: float, x_deg: float) -> np.ndarray:
    """Compose R = Rx(x) @ Ry(y) @ Rz(z) from degrees (extrinsic Z-Y-X)."""
    cz, sz = math.cos(math.radians(z_deg)), math.sin(math.radians(z_deg))
    cy, sy = math.cos(math.radians(y_deg)), math.sin(math.radians(y_deg))
    cx, sx = math.cos(math.radians(x_deg)), math.sin(math.radians(x_deg))
    rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    return rx @ ry @ rz


def euler_zyx_from_matrix(R: np.ndarray) -> tuple[float, float, float]:
    """Decompose R = Rx @ Ry @ Rz into (z, y, x) degrees.

    At gimbal lock (|R[0,2]| = 1) the x angle is fixed to zero and the
    remaining freedom is absorbed by z.
    """
    R = np.asarray(R, dtype=np.float64)
    sy = float(np.clip(R[0, 2], -1.0, 1.0))
    y = math.asin(sy)
    if abs(sy) < 1.0 - 1e-12:
        z = math.atan2(-R[0, 1], R[0, 0])
        x = math.atan2(-R[1, 2], R[2, 2])
    else:
        z = math.atan2(R[1, 0], R[1, 1])
        x = 0.0
    return math.degrees(z), math.degrees(y), math.degrees(x)


def rotation_estimate(R: np.ndarray) -> RotationEstimate:
    """Wrap a rotation matrix with its Euler decomposition."""
    z, y, x = euler_zyx_from_matrix(R)
    return RotationEstimate(R=R, euler_z_deg=z, euler_y_deg=y, euler_x_deg=x)


def _dominant_sign(v: np.ndarray, preferred_component: int) -> float:
    """Sign making ``preferred_component`` positive, falling back to the
    largest-magnitude component when it vanishes."""
    if abs(v[preferred_component]) > 1e-12:
        return 1.0 if v[preferred_component] > 0 else -1.0
    k = int(np.argmax(np.abs(v)))
    return 1.0 if v[k] >= 0 else -1.0


def canonicalize_axes(R: np.ndarray) -> np.ndarray:
    """Flip column pairs of a rotation onto this module's representative.

    The result differs from R by right-multiplication with diag(s1,s2,s3),
    s1*s2*s3 = +1, and satisfies the sign conventions documented in the
    module docstring.
    """
    R = np.asarray(R, dtype=np.float64)
    s3 = _dominant_sign(R[:, 2], 2)
    s1 = _dominant_sign(R[:, 0], 0)
    s2 = s1 * s3  # keeps det = +1
    return R @ np.diag([s1, s2, s3])


def vanishing_point(segments: list[LineSegment]) -> VanishingPoint:
    """Least-squares vanishing point of segments sharing one direction.

    Each segment maps to the homogeneous line through its endpoints; the
    vanishing point is the unit direction minimizing the summed squared
    line incidence residuals (smallest singular vector of the stacked
    line matrix). Coordinates are rescaled internally for conditioning.
    """
    if len(segments) < 2:
        raise InputError("need at least 2 segments for a vanishing point")
    plane_ids = {s.plane_id for s in segments}
    view_ids = {s.view_id for s in segments}
    if len(plane_ids) != 1 or len(view_ids) != 1:
        raise InputError("segments must share plane_id and view_id")
    coords = {(s.x0, s.y0, s.x1, s.y1) for s in segments}
    if len(coords) != len(segments):
        raise InputError("duplicate segments")

    pts = np.array([[s.x0, s.y0, s.x1, s.y1] for s in segments], dtype=np.float64)
    scale = max(1.0, float(np.mean(np.abs(pts))))
    p0 = np.column_stack([pts[:, 0] / scale, pts[:, 1] / scale, np.ones(len(segments))])
    p1 = np.column_stack([pts[:, 2] / scale, pts[:, 3] / scale, np.ones(len(segments))])
    lines = np.cross(p0, p1)
    lines /= np.linalg.norm(lines[:, :2], axis=1, keepdims=True)

    _, svals, vt = np.linalg.svd(lines)
    if svals[1] <= 1e-10 * svals[0]:
        raise DegeneracyError("all segments collinear: vanishing point undefined")
    v = vt[-1]
    # Undo the coordinate scaling: x' = x/s maps directions v' -> (s vx', s vy', vz').
    v = np.array([v[0] * scale, v[1] * scale, v[2]])
    return VanishingPoint(v=v)


def _conic_row(u: np.ndarray, v: np.ndarray) -> list[float]:
    # Coefficients of [w1, w2, w3, w4] in u^T omega v for
    # omega = [[w1,0,w2],[0,w1,w3],[w2,w3,w4]].
    return [
        u[0] * v[0] + u[1] * v[1],
        u[0] * v[2] + u[2] * v[0],
        u[1] * v[2] + u[2] * v[1],
        u[2] * v[2],
    ]


def intrinsics_from_orthogonal_vps(
    v1: VanishingPoint, v2: VanishingPoint, v3: VanishingPoint
) -> Intrinsics:
    """Solve the three orthogonality constraints for (f, cx, cy).

    For orthogonal scene directions the vanishing points satisfy
    vi^T omega vj = 0 (i < j) where omega is the image of the absolute
    conic of a zero-skew, unit-aspect camera. The three constraints
    determine omega up to scale; f, cx, cy follow from its entries.
    """
    vs = (v1.v, v2.v, v3.v)
    rows = np.array(
        [_conic_row(vs[i], vs[j]) for i, j in ((0, 1), (0, 2), (1, 2))]
    )
    _, svals, vt = np.linalg.svd(rows)
    if svals[2] <= 1e-12 * svals[0]:
        raise DegeneracyError("degenerate configuration: constraints are rank-deficient")
    w = vt[-1]
    if abs(w[0]) <= 1e-12 * np.max(np.abs(w)):
        raise DegeneracyError("degenerate configuration: conic has no finite focal term")
    cx = -w[1] / w[0]
    cy = -w[2] / w[0]
    f_sq = w[3] / w[0] - cx * cx - cy * cy
    if f_sq <= 0:
        raise DegeneracyError(
            f"negative f^2 ({f_sq:.6g}): annotations are inconsistent"
        )
    return Intrinsics(f=math.sqrt(f_sq), cx=float(cx), cy=float(cy))


def _nearest_rotation(B: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(B)
    d = np.sign(np.linalg.det(u @ vt))
    return u @ np.diag([1.0, 1.0, d]) @ vt


def rotation_from_vps(
    K: Intrinsics, v1: VanishingPoint, v2: VanishingPoint, v3: VanishingPoint
) -> RotationEstimate:
    """Rotation whose axis images are the given vanishing points.

    Candidate columns are the normalized back-projections K^-1 vi; their
    signs follow the module's conventions and the result is projected to
    the nearest proper rotation to absorb annotation noise.
    """
    kinv = np.linalg.inv(K.matrix())
    cols = []
    for vp in (v1, v2, v3):
        c = kinv @ vp.v
        n = np.linalg.norm(c)
        if n == 0.0:
            raise DegeneracyError("vanishing point back-projects to zero direction")
        cols.append(c / n)
    B = np.column_stack(cols)
    s3 = _dominant_sign(B[:, 2], 2)
    s1 = _dominant_sign(B[:, 0], 0)
    detB = np.linalg.det(B * np.array([s1, 1.0, s3]))
    s2 = 1.0 if detB > 0 else -1.0
    B = B @ np.diag([s1, s2, s3])

    R = _nearest_rotation(B)
    if np.linalg.norm(B - R) > 0.2:
        raise DegeneracyError(
            "back-projected directions are far from orthonormal: "
            "inconsistent annotations"
        )
    return rotation_estimate(R)


def relative_rotation(Ra: RotationEstimate, Rb: RotationEstimate) -> RotationEstimate:
    """Rotation taking view A's frame onto view B's: Rb @ Ra^T."""
    return rotation_estimate(Rb.R @ Ra.R.T)


def _so3_exp(w: np.ndarray) -> np.ndarray:
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        return np.eye(3)
    k = w / theta
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(theta) * kx + (1.0 - math.cos(theta)) * (kx @ kx)


def refine_calibration(
    segments: list[LineSegment], K0: Intrinsics, R0: RotationEstimate
) -> tuple[Intrinsics, RotationEstimate]:
    """Jointly refine (f, cx, cy, R) against all raw segments of one view.

    Minimizes the first-order (Sampson-scaled) collinearity residual of
    each segment's endpoints with its direction group's predicted
    vanishing point K R e_i. This couples the three directions through
    the shared camera, which noticeably tightens both f and the angles
    compared to the closed-form chain, especially at short focal lengths.

    Deterministic Levenberg-Marquardt from the closed-form initial guess.
    """
    if not segments:
        raise InputError("no segments to refine against")
    p0 = np.array([[s.x0, s.y0] for s in segments])
    p1 = np.array([[s.x1, s.y1] for s in segments])
    pid = np.array([s.plane_id for s in segments])

    def residuals(p: np.ndarray) -> np.ndarray:
        f, cx, cy = p[0], p[1], p[2]
        R = _so3_exp(p[3:]) @ R0.R
        K = np.array([[f, 0.0, cx], [0.0, f, cy], [0.0, 0.0, 1.0]])
        v = (K @ R)[:, pid].T
        c = (
            p0[:, 0] * (p1[:, 1] * v[:, 2] - v[:, 1])
            - p0[:, 1] * (p1[:, 0] * v[:, 2] - v[:, 0])
            + (p1[:, 0] * v[:, 1] - p1[:, 1] * v[:, 0])
        )
        g0x = p1[:, 1] * v[:, 2] - v[:, 1]
        g0y = -(p1[:, 0] * v[:, 2] - v[:, 0])
        g1x = -(p0[:, 1] * v[:, 2] - v[:, 1])
        g1y = p0[:, 0] * v[:, 2] - v[:, 0]
        grad = np.sqrt(g0x**2 + g0y**2 + g1x**2 + g1y**2)
        return c / np.maximum(grad, 1e-12)

    x0 = np.array([K0.f, K0.cx, K0.cy, 0.0, 0.0, 0.0])
    sol = least_squares(
        residuals, x0, method="lm", xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=400
    )
    f, cx, cy = sol.x[:3]
    if f <= 0:
        raise DegeneracyError("refinement produced a non-positive focal length")
    R = _nearest_rotation(_so3_exp(sol.x[3:]) @ R0.R)
    return Intrinsics(f=float(f), cx=float(cx), cy=float(cy)), rotation_estimate(R)
