"""Shi-Tomasi corner detection and pyramidal Lucas-Kanade tracking.

Tracking runs point-wise and purely on immutable frame data, so results
are independent of evaluation order and bit-reproducible. The propagation
driver walks a frame sequence in reverse chronological order, chaining
frame-pair tracking and flagging round-trip-inconsistent steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import InputError
from .imagio import FrameSequence, gaussian_pyramid, image_gradients, _as_grid

TRACKED = "tracked"
SUSPECT = "suspect"
LOST = "lost"


@dataclass(frozen=True)
class Corner:
    """Detected corner with its minimum-eigenvalue response."""

    x: float
    y: float
    response: float

    def __post_init__(self):
        if self.response < 0:
            raise InputError("corner response must be >= 0")


@dataclass(frozen=True)
class FlowParams:
    """Tracker knobs.

    ``min_eig_threshold`` is compared against the structure tensor's
    minimum eigenvalue divided by the window pixel count, making it
    independent of window size. ``fb_threshold`` is the forward-backward
    round-trip distance beyond which a step is flagged suspect.
    """

    window: int = 21
    levels: int = 3
    max_iter: int = 30
    eps: float = 0.01
    min_eig_threshold: float = 1e-4
    fb_threshold: float = 1.0

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise InputError("window must be odd and >= 3")
        if self.levels < 1:
            raise InputError("levels must be >= 1")
        if self.max_iter < 1:
            raise InputError("max_iter must be >= 1")
        if self.eps <= 0:
            raise InputError("eps must be > 0")
        if self.min_eig_threshold < 0 or self.fb_threshold < 0:
            raise InputError("thresholds must be >= 0")


@dataclass(frozen=True)
class TrackStep:
    frame_index: int
    x: float
    y: float
    status: str


@dataclass(frozen=True)
class TrackSet:
    """Per-point trajectories in traversal order.

    Steps carry the position at each frame; a track that could not be
    followed further ends with a step whose status is ``lost`` (its
    position is the last valid one).
    """

    tracks: dict[str, tuple[TrackStep, ...]]
    direction: str = "reverse"

    def __post_init__(self):
        object.__setattr__(
            self,
            "tracks",
            {k: tuple(v) for k, v in self.tracks.items()},
        )


def shi_tomasi(
    img,
    quality_level: float,
    min_distance: float,
    block_size: int,
    max_corners: int | None = None,
) -> list[Corner]:
    """Minimum-eigenvalue corner detection with greedy radius suppression.

    Keeps pixels whose windowed structure-tensor minimum eigenvalue is at
    least ``quality_level`` times the image maximum, then accepts corners
    in descending response order (ties by y then x) subject to pairwise
    distance >= ``min_distance``.
    """
    grid = _as_grid(img)
    if not (0.0 < quality_level <= 1.0):
        raise InputError("quality_level must be in (0, 1]")
    if block_size < 3 or block_size % 2 == 0:
        raise InputError("block_size must be odd and >= 3")
    if grid.shape[0] < block_size or grid.shape[1] < block_size:
        raise InputError("image smaller than block_size")

    ix, iy = image_gradients(grid)
    area = float(block_size * block_size)
    sxx = ndimage.uniform_filter(ix * ix, size=block_size, mode="nearest") * area
    sxy = ndimage.uniform_filter(ix * iy, size=block_size, mode="nearest") * area
    syy = ndimage.uniform_filter(iy * iy, size=block_size, mode="nearest") * area
    half_tr = (sxx + syy) / 2.0
    disc = np.sqrt(((sxx - syy) / 2.0) ** 2 + sxy**2)
    response = np.maximum(half_tr - disc, 0.0)

    max_resp = float(response.max())
    if max_resp <= 0.0:
        return []
    ys, xs = np.nonzero(response >= quality_level * max_resp)
    resp = response[ys, xs]
    order = np.lexsort((xs, ys, -resp))

    accepted: list[Corner] = []
    acc_xy = np.empty((0, 2))
    min_d2 = float(min_distance) ** 2
    for k in order:
        x, y, r = float(xs[k]), float(ys[k]), float(resp[k])
        if len(accepted):
            d2 = (acc_xy[:, 0] - x) ** 2 + (acc_xy[:, 1] - y) ** 2
            if d2.min() < min_d2:
                continue
        accepted.append(Corner(x=x, y=y, response=r))
        acc_xy = np.vstack([acc_xy, [x, y]])
        if max_corners is not None and len(accepted) >= max_corners:
            break
    return accepted


def _bilinear(grid: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h, w = grid.shape
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 2)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 2)
    fx = xs - x0
    fy = ys - y0
    g00 = grid[y0, x0]
    g01 = grid[y0, x0 + 1]
    g10 = grid[y0 + 1, x0]
    g11 = grid[y0 + 1, x0 + 1]
    return (
        g00 * (1 - fy) * (1 - fx)
        + g01 * (1 - fy) * fx
        + g10 * fy * (1 - fx)
        + g11 * fy * fx
    )


def _window_in_bounds(xs: np.ndarray, ys: np.ndarray, shape: tuple[int, int]) -> bool:
    return (
        xs.min() >= 0.0
        and ys.min() >= 0.0
        and xs.max() <= shape[1] - 1
        and ys.max() <= shape[0] - 1
    )


def _track_point(
    pyr_prev: list[np.ndarray],
    grads_prev: list[tuple[np.ndarray, np.ndarray]],
    pyr_next: list[np.ndarray],
    point: np.ndarray,
    params: FlowParams,
) -> tuple[np.ndarray, str]:
    half = params.window // 2
    offs = np.arange(-half, half + 1, dtype=np.float64)
    ox, oy = np.meshgrid(offs, offs)
    area = float(params.window * params.window)

    g = np.zeros(2)
    for level in reversed(range(params.levels)):
        scale = 2.0**level
        px, py = point[0] / scale, point[1] / scale
        xs = px + ox
        ys = py + oy
        prev_img = pyr_prev[level]
        next_img = pyr_next[level]
        if not _window_in_bounds(xs, ys, prev_img.shape):
            return np.array([np.nan, np.nan]), LOST
        gx = _bilinear(grads_prev[level][0], xs, ys)
        gy = _bilinear(grads_prev[level][1], xs, ys)
        gxx = float(np.sum(gx * gx))
        gxy = float(np.sum(gx * gy))
        gyy = float(np.sum(gy * gy))
        half_tr = (gxx + gyy) / 2.0
        disc = np.sqrt(((gxx - gyy) / 2.0) ** 2 + gxy**2)
        if (half_tr - disc) / area < params.min_eig_threshold:
            return np.array([np.nan, np.nan]), LOST
        det = gxx * gyy - gxy * gxy
        if det <= 0.0:
            return np.array([np.nan, np.nan]), LOST
        patch_prev = _bilinear(prev_img, xs, ys)

        d = np.zeros(2)
        converged = False
        for _ in range(params.max_iter):
            qx = xs + g[0] + d[0]
            qy = ys + g[1] + d[1]
            if not _window_in_bounds(qx, qy, next_img.shape):
                return np.array([np.nan, np.nan]), LOST
            diff = patch_prev - _bilinear(next_img, qx, qy)
            bx = float(np.sum(diff * gx))
            by = float(np.sum(diff * gy))
            nu = np.array([gyy * bx - gxy * by, gxx * by - gxy * bx]) / det
            d += nu
            if float(np.hypot(nu[0], nu[1])) < params.eps:
                converged = True
                break
        # coarse levels only seed the next one; convergence is demanded at
        # the finest level, where the estimate is the answer
        if level == 0 and not converged:
            return np.array([np.nan, np.nan]), LOST
        g = 2.0 * (g + d) if level > 0 else g + d
    return point + g, TRACKED


def _prepare(frame, params: FlowParams):
    grid = _as_grid(frame)
    pyr = gaussian_pyramid(grid, params.levels)
    grads = [image_gradients(level) for level in pyr]
    return pyr, grads


def lk_track(
    prev,
    next,
    points,
    params: FlowParams = FlowParams(),
) -> tuple[np.ndarray, list[str]]:
    """Track points from ``prev`` to ``next`` with pyramidal Lucas-Kanade.

    Returns the new positions (NaN rows for lost points) and a status per
    point. A point is lost when its window leaves either image, the
    structure tensor is ill-conditioned, or the iteration does not
    converge within ``max_iter``.
    """
    prev_grid = _as_grid(prev)
    next_grid = _as_grid(next)
    if prev_grid.shape != next_grid.shape:
        raise InputError("frames must share dimensions")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)

    pyr_prev, grads_prev = _prepare(prev_grid, params)
    pyr_next = gaussian_pyramid(next_grid, params.levels)

    out = np.empty_like(pts)
    statuses: list[str] = []
    for i, p in enumerate(pts):
        q, status = _track_point(pyr_prev, grads_prev, pyr_next, p, params)
        out[i] = q
        statuses.append(status)
    return out, statuses


def forward_backward_check(
    prev,
    next,
    points,
    params: FlowParams = FlowParams(),
) -> np.ndarray:
    """Round-trip tracking error per point, in px (inf when lost).

    Tracks prev -> next, then the result back next -> prev; the error is
    the distance between each original point and its round-trip image.
    Large values indicate unreliable motion, typically in regions of
    homogeneous intensity where the solve jumps.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    fwd, st_f = lk_track(prev, next, pts, params)
    errors = np.full(len(pts), np.inf)
    ok = [i for i, s in enumerate(st_f) if s == TRACKED]
    if ok:
        back, st_b = lk_track(next, prev, fwd[ok], params)
        for j, i in enumerate(ok):
            if st_b[j] == TRACKED:
                errors[i] = float(np.hypot(*(back[j] - pts[i])))
    return errors


def reverse_propagate(
    seq: FrameSequence,
    seed_points: list[tuple[str, float, float]],
    params: FlowParams = FlowParams(),
) -> TrackSet:
    """Chain tracking from the final frame back to the first.

    Seeds are positions in the last frame (the most deformed, most
    textured state). Each step is validated with the forward-backward
    check: steps whose round-trip error exceeds ``fb_threshold`` are
    flagged suspect but kept. A lost point ends its track at the last
    valid frame with status ``lost``.
    """
    frames = seq.frames
    ids = [s[0] for s in seed_points]
    if len(set(ids)) != len(ids):
        raise InputError("seed ids must be unique")
    if not seed_points:
        raise InputError("no seed points")
    last = frames[-1]
    for pid, x, y in seed_points:
        if not (0 <= x <= last.width - 1 and 0 <= y <= last.height - 1):
            raise InputError(f"seed {pid!r} out of bounds: ({x}, {y})")

    steps: dict[str, list[TrackStep]] = {
        pid: [TrackStep(last.frame_index, float(x), float(y), TRACKED)]
        for pid, x, y in seed_points
    }
    active = list(ids)
    positions = {pid: np.array([x, y], dtype=np.float64) for pid, x, y in seed_points}

    for k in range(len(frames) - 1, 0, -1):
        if not active:
            break
        cur, nxt = frames[k], frames[k - 1]
        pts = np.array([positions[pid] for pid in active])
        moved, statuses = lk_track(cur, nxt, pts, params)

        fb = np.full(len(active), np.inf)
        ok = [i for i, s in enumerate(statuses) if s == TRACKED]
        if ok:
            back, st_back = lk_track(nxt, cur, moved[ok], params)
            for j, i in enumerate(ok):
                if st_back[j] == TRACKED:
                    fb[i] = float(np.hypot(*(back[j] - pts[i])))

        still_active = []
        for i, pid in enumerate(active):
            if statuses[i] != TRACKED:
                lost_step = steps[pid][-1]
                steps[pid][-1] = TrackStep(lost_step.frame_index, lost_step.x, lost_step.y, LOST)
                continue
            status = SUSPECT if fb[i] > params.fb_threshold else TRACKED
            steps[pid].append(
                TrackStep(nxt.frame_index, float(moved[i, 0]), float(moved[i, 1]), status)
            )
            positions[pid] = moved[i]
            still_active.append(pid)
        active = still_active

    return TrackSet(tracks={pid: tuple(steps[pid]) for pid in ids}, direction="reverse")
