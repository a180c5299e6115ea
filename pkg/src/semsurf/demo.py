"""Synthetic end-to-end dataset generator.

Builds a fully consistent scene the whole pipeline can run on: annotated
parallel lines for two end-state views, point correspondences with known
3D structure, and a 15-frame drift sequence whose lower and upper halves
move by different amounts (so displacement statistics come out bimodal
and depth correlates with vertical motion). Everything derives from one
seed; rerunning writes byte-identical files.

Usage: python -m semsurf.demo OUTDIR [--seed 7]
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import calib, formats
from .epipolar import Correspondence

UM_PER_PX = 0.05
IMAGE_SIZE = 320
N_FRAMES = 15
MINUTES_PER_FRAME = 80.0
CYCLES_PER_FRAME = 500_000

# view poses for the end-state pair: both are generic "cube corner" views of
# the sample's orthogonal structure and both already satisfy the rotation
# sign conventions, so the calibrated relative rotation matches exactly
VIEW_A_EULER = (27.1, -49.5, -12.6)
RELATIVE_EULER = (46.1, 3.2, -62.1)

# camera for the annotated end-state images
CAL_F = 1704.0
CAL_CX = 1300.0
CAL_CY = -1604.0

# per-frame drift, px (forward time): a fast-moving middle band between two
# slow outer bands, so the displacement distribution is bimodal and the
# vertical-motion pattern is not a plane (depth keeps its correlation with
# dy after the reference-plane fit)
SLOW_STEP = (-0.15, 0.684)
FAST_STEP = (-0.25, 2.131)
FAST_ZONE = (115.0, 200.0)  # rows with pure fast drift
BLEND_ROWS = 15.0  # smooth transition width on each side


def _texture_components(rng: np.random.Generator):
    f_lo = rng.uniform(0.012, 0.035, (6, 2))
    f_mid = rng.uniform(0.05, 0.10, (8, 2))
    signs = np.where(rng.uniform(size=(14, 2)) < 0.5, -1.0, 1.0)
    freqs = np.vstack([f_lo, f_mid]) * signs
    phases = rng.uniform(0, 2 * np.pi, 14)
    amps = np.concatenate([rng.uniform(0.8, 1.0, 6), rng.uniform(0.4, 0.7, 8)])
    amps = 0.45 * amps / amps.sum()
    return freqs, phases, amps


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return 3.0 * t * t - 2.0 * t * t * t


def _band_weight(y: np.ndarray) -> np.ndarray:
    # 1 inside the fast middle band, 0 in the slow outer bands
    rise = _smoothstep((y - (FAST_ZONE[0] - BLEND_ROWS)) / BLEND_ROWS)
    fall = _smoothstep((y - FAST_ZONE[1]) / BLEND_ROWS)
    return rise * (1.0 - fall)


def _frame(t: int, components) -> np.ndarray:
    freqs, phases, amps = components
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE].astype(np.float64)
    w = _band_weight(yy)
    bx = SLOW_STEP[0] + (FAST_STEP[0] - SLOW_STEP[0]) * w
    by = SLOW_STEP[1] + (FAST_STEP[1] - SLOW_STEP[1]) * w
    xs = xx - t * bx
    ys = yy - t * by
    img = np.full(xx.shape, 0.5)
    for (u, v), ph, a in zip(freqs, phases, amps):
        img += a * np.cos(2 * np.pi * (u * xs + v * ys) + ph)
    return np.clip(img, 0.0, 1.0)


def _write_pgm(path: Path, img: np.ndarray) -> None:
    data = np.round(img * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode())
        fh.write(data.tobytes())


def _seed_points(rng: np.random.Generator) -> tuple[list[str], np.ndarray, np.ndarray]:
    """Final-frame seed positions for both bands plus per-point drift."""
    # seed windows must stay inside the coarsest pyramid level and inside
    # their drift band over the whole backward trajectory
    ids, pos, steps = [], [], []
    grids = [
        (np.linspace(48, 260, 6), np.linspace(62, 86, 2), SLOW_STEP),
        (np.linspace(48, 260, 8), np.linspace(160, 188, 3), FAST_STEP),
        (np.linspace(48, 260, 6), np.linspace(240, 268, 2), SLOW_STEP),
    ]
    k = 0
    for xs, ys, step in grids:
        for y in ys:
            for x in xs:
                k += 1
                ids.append(f"p{k:03d}")
                jitter = rng.uniform(-2.0, 2.0, 2)
                pos.append([x + jitter[0], y + jitter[1]])
                steps.append(step)
    return ids, np.array(pos), np.array(steps)


def _surface_depth(rng: np.random.Generator, seeds_px: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Plane-free depth field, microns: correlated with vertical drift plus
    smooth noise, scaled into the +-0.2 band."""
    dy_um = steps[:, 1] * (N_FRAMES - 1) * UM_PER_PX
    z = 0.16 * (dy_um - dy_um.mean())
    xy = seeds_px * UM_PER_PX
    for _ in range(4):
        k = rng.uniform(0.05, 0.25, 2)
        ph = rng.uniform(0, 2 * np.pi)
        z += 0.018 * rng.normal() * np.sin(2 * np.pi * (xy @ k) + ph)
    return 0.2 * z / np.max(np.abs(z))


def _line_segments(rng: np.random.Generator) -> list[calib.LineSegment]:
    K = np.array([[CAL_F, 0.0, CAL_CX], [0.0, CAL_F, CAL_CY], [0.0, 0.0, 1.0]])
    Ra = calib.matrix_from_euler_zyx(*VIEW_A_EULER)
    Rb = calib.matrix_from_euler_zyx(*RELATIVE_EULER) @ Ra
    segments = []
    for view_id, R in (("A", Ra), ("B", Rb)):
        for plane_id in range(3):
            v = K @ R[:, plane_id]
            for _ in range(4):
                a = rng.uniform([0.0, 0.0], [2600.0, 2000.0])
                line = np.cross([a[0], a[1], 1.0], v)
                d = np.array([line[1], -line[0]])
                d /= np.linalg.norm(d)
                t = rng.uniform(1500.0, 2500.0)
                if rng.uniform() < 0.5:
                    t = -t
                segments.append(
                    calib.LineSegment(
                        x0=float(a[0]), y0=float(a[1]),
                        x1=float(a[0] + t * d[0]), y1=float(a[1] + t * d[1]),
                        plane_id=plane_id, view_id=view_id,
                    )
                )
    return segments


def generate(out_dir: Path, seed: int = 7) -> dict:
    """Write the demo dataset and return its manifest summary."""
    out_dir = Path(out_dir)
    images = out_dir / "images"
    images.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng([seed, 2024])

    components = _texture_components(rng)
    ids, seeds_px, steps = _seed_points(rng)
    z_um = _surface_depth(rng, seeds_px, steps)

    # end-state stereo pair: view A is the final-frame viewpoint, view B the
    # re-oriented acquisition at the reported relative rotation
    R_rel = calib.matrix_from_euler_zyx(*RELATIVE_EULER)
    P3 = np.column_stack([seeds_px * UM_PER_PX, z_um])  # microns, view-A frame
    view_b_px = (P3 @ R_rel[:2].T) / UM_PER_PX + np.array([40.0, 60.0])
    corrs = [
        Correspondence(
            id=ids[i],
            xa=float(seeds_px[i, 0]), ya=float(seeds_px[i, 1]),
            xb=float(view_b_px[i, 0]), yb=float(view_b_px[i, 1]),
        )
        for i in range(len(ids))
    ]
    formats.write_correspondences_csv(out_dir / "correspondences.csv", corrs)
    formats.write_lines_csv(out_dir / "lines.csv", _line_segments(rng))

    frames = []
    for t in range(N_FRAMES):
        name = f"frame_{t:03d}.pgm"
        _write_pgm(images / name, _frame(t, components))
        frames.append(
            {
                "index": t,
                "path": f"images/{name}",
                "timestamp_min": MINUTES_PER_FRAME * t,
                "cycles": CYCLES_PER_FRAME * t,
            }
        )
    manifest = {"um_per_px": UM_PER_PX, "frames": frames}
    formats.write_json(out_dir / "frames.json", manifest)

    config = {
        "lines": "lines.csv",
        "correspondences": "correspondences.csv",
        "manifest": "frames.json",
        "view_a_image": "images/frame_014.pgm",
        "um_per_px": UM_PER_PX,
        "stability": {"sizes": [10, 20, 30, 40], "trials": 100},
        "profiles": [
            {
                "name": "crack1",
                "anchor_x_um": 2.0,
                "anchor_y_um": 2.5,
                "angle_deg": 35.0,
                "corridor_um": 0.8,
            }
        ],
        "out_dir": "out",
        "seed": seed,
    }
    formats.write_json(out_dir / "config.json", config)
    return {
        "n_points": len(ids),
        "n_frames": N_FRAMES,
        "out_dir": str(out_dir),
        "expected_net_px": {
            "fast": [FAST_STEP[0] * (N_FRAMES - 1), FAST_STEP[1] * (N_FRAMES - 1)],
            "slow": [SLOW_STEP[0] * (N_FRAMES - 1), SLOW_STEP[1] * (N_FRAMES - 1)],
        },
    }


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Generate the synthetic demo dataset")
    parser.add_argument("out_dir", help="directory to write the dataset into")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    summary = generate(Path(args.out_dir), seed=args.seed)
    print(json.dumps(summary, indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
