"""Image ingestion, grayscale conversion, pyramids and spatial gradients.

All images are held as float64 row-major grids with intensities in [0, 1].
Border handling is edge replication everywhere so results are deterministic
and independent of image content outside the frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InputError

# ITU-R 601 luma weights for RGB convenience inputs.
_LUMA = (0.299, 0.587, 0.114)

# 5-tap binomial blur used between pyramid levels.
_BINOMIAL5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


@dataclass(frozen=True)
class ImageFrame:
    """One grayscale frame plus its acquisition metadata.

    ``pixels`` is a (height, width) float64 array in [0, 1].  ``um_per_px``
    is the lateral scale of the acquisition; it must be supplied explicitly
    because the image files carry no physical scale.
    """

    pixels: np.ndarray
    frame_index: int = 0
    timestamp_min: float = 0.0
    cycles: int = 0
    um_per_px: float = 1.0

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        object.__setattr__(self, "pixels", px)
        if px.ndim != 2 or px.shape[0] == 0 or px.shape[1] == 0:
            raise InputError("image must be a non-empty 2D grid")
        if px.min() < 0.0 or px.max() > 1.0:
            raise InputError("intensities must lie in [0, 1]")
        if self.timestamp_min < 0:
            raise InputError("timestamp_min must be >= 0")
        if self.cycles < 0:
            raise InputError("cycles must be >= 0")
        if self.um_per_px <= 0:
            raise InputError("um_per_px must be > 0")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class FrameSequence:
    """Time-ordered frames sharing dimensions and lateral scale."""

    frames: tuple[ImageFrame, ...]

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if not frames:
            raise InputError("empty sequence")
        first = frames[0]
        for prev, cur in zip(frames, frames[1:]):
            if cur.frame_index <= prev.frame_index:
                raise InputError(
                    f"frame_index must be strictly increasing "
                    f"(got {prev.frame_index} then {cur.frame_index})"
                )
            if cur.timestamp_min < prev.timestamp_min:
                raise InputError("timestamp_min must be non-decreasing")
            if cur.cycles < prev.cycles:
                raise InputError("cycles must be non-decreasing")
        for f in frames:
            if f.pixels.shape != first.pixels.shape:
                raise InputError("all frames must share dimensions")
            if f.um_per_px != first.um_per_px:
                raise InputError("all frames must share um_per_px")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def um_per_px(self) -> float:
        return self.frames[0].um_per_px


def _read_pgm(path: Path) -> np.ndarray:
    """Parse a P2 (ASCII) or P5 (binary) PGM into a uint8 array."""
    data = path.read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise InputError(f"{path}: not a PGM file")

    # Header tokens may be interleaved with '#' comments.
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InputError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise InputError(f"{path}: malformed PGM header") from exc
    if width <= 0 or height <= 0:
        raise InputError(f"{path}: zero-dimension image")
    if maxval > 255:
        raise InputError(f"{path}: unsupported bit depth (maxval {maxval})")

    if magic == b"P5":
        pos += 1  # single whitespace after maxval
        raster = data[pos : pos + width * height]
        if len(raster) < width * height:
            raise InputError(f"{path}: truncated PGM raster")
        arr = np.frombuffer(raster, dtype=np.uint8, count=width * height)
    else:
        values = data[pos:].split()
        if len(values) < width * height:
            raise InputError(f"{path}: truncated PGM raster")
        arr = np.array([int(v) for v in values[: width * height]], dtype=np.int64)
        if arr.min() < 0 or arr.max() > maxval:
            raise InputError(f"{path}: PGM sample out of range")
        arr = arr.astype(np.uint8)
    return arr.reshape(height, width)


def _read_png(path: Path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB PNG into a float64 [0, 1] grid."""
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "P":
            im = im.convert("RGB")
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64) / 255.0
        elif im.mode == "RGB":
            rgb = np.asarray(im, dtype=np.float64) / 255.0
            arr = _LUMA[0] * rgb[..., 0] + _LUMA[1] * rgb[..., 1] + _LUMA[2] * rgb[..., 2]
        else:
            raise InputError(f"{path}: unsupported bit depth (mode {im.mode})")
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InputError(f"{path}: zero-dimension image")
    return arr


def load_image(
    path: str | Path,
    *,
    frame_index: int = 0,
    timestamp_min: float = 0.0,
    cycles: int = 0,
    um_per_px: float = 1.0,
) -> ImageFrame:
    """Load an 8-bit PGM (P2/P5) or PNG raster as an ImageFrame.

    8-bit samples scale to [0, 1] by 1/255; RGB collapses to luma.
    Raises InputError for missing files and unsupported bit depths.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing file: {path}")
    suffix = path.suffix.lower()
    if suffix in (".pgm", ".ppm", ".pnm"):
        grid = _read_pgm(path).astype(np.float64) / 255.0
    elif suffix == ".png":
        grid = _read_png(path)
    else:
        # Fall back on content sniffing for extensionless paths.
        head = path.read_bytes()[:2]
        if head in (b"P2", b"P5"):
            grid = _read_pgm(path).astype(np.float64) / 255.0
        else:
            grid = _read_png(path)
    return ImageFrame(
        pixels=grid,
        frame_index=frame_index,
        timestamp_min=timestamp_min,
        cycles=cycles,
        um_per_px=um_per_px,
    )


def load_manifest(path: str | Path) -> FrameSequence:
    """Load a frame-sequence manifest and every image it references.

    The manifest is JSON::

        { "um_per_px": <real>,
          "frames": [ { "index": <int>, "path": <str>,
                        "timestamp_min": <real>, "cycles": <int> } ] }

    Image paths are resolved relative to the manifest file.  Frames are
    ordered by index; duplicate indices, non-monotone timestamps or cycles
    are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing file: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "um_per_px" not in doc or "frames" not in doc:
        raise InputError(f"{path}: manifest must contain um_per_px and frames")
    um_per_px = float(doc["um_per_px"])
    if um_per_px <= 0:
        raise InputError(f"{path}: um_per_px must be > 0")
    entries = doc["frames"]
    if not isinstance(entries, list) or not entries:
        raise InputError(f"{path}: empty sequence")

    seen: set[int] = set()
    for entry in entries:
        idx = int(entry["index"])
        if idx in seen:
            raise InputError(f"{path}: duplicate frame_index {idx}")
        seen.add(idx)

    frames = []
    for entry in sorted(entries, key=lambda e: int(e["index"])):
        img_path = Path(entry["path"])
        if not img_path.is_absolute():
            img_path = path.parent / img_path
        frames.append(
            load_image(
                img_path,
                frame_index=int(entry["index"]),
                timestamp_min=float(entry.get("timestamp_min", 0.0)),
                cycles=int(entry.get("cycles", 0)),
                um_per_px=um_per_px,
            )
        )
    return FrameSequence(frames=tuple(frames))


def _as_grid(img) -> np.ndarray:
    if isinstance(img, ImageFrame):
        return img.pixels
    return np.asarray(img, dtype=np.float64)


def gaussian_pyramid(img, levels: int) -> list[np.ndarray]:
    """Build a coarse-to-fine pyramid; level 0 is the input grid.

    Each coarser level is the previous one blurred with the separable
    binomial kernel (1,4,6,4,1)/16 under edge replication, then decimated
    by 2 (dimensions floor-divide).
    """
    grid = _as_grid(img)
    if levels < 1:
        raise InputError("levels must be >= 1")
    need = 2 ** (levels - 1)
    if grid.shape[0] < need or grid.shape[1] < need:
        raise InputError(
            f"image too small for {levels} levels: {grid.shape[1]}x{grid.shape[0]}"
        )
    pyramid = [grid]
    for _ in range(levels - 1):
        cur = pyramid[-1]
        blurred = ndimage.correlate1d(cur, _BINOMIAL5, axis=0, mode="nearest")
        blurred = ndimage.correlate1d(blurred, _BINOMIAL5, axis=1, mode="nearest")
        h2, w2 = cur.shape[0] // 2, cur.shape[1] // 2
        pyramid.append(blurred[: 2 * h2 : 2, : 2 * w2 : 2])
    return pyramid


def image_gradients(img) -> tuple[np.ndarray, np.ndarray]:
    """Sobel gradients scaled by 1/8 so a unit-slope ramp yields exactly 1.

    Returns (Ix, Iy) with x along columns and y along rows.  Borders use
    replicated edges.
    """
    grid = _as_grid(img)
    if grid.shape[0] < 3 or grid.shape[1] < 3:
        raise InputError("image smaller than 3x3")
    diff = np.array([-1.0, 0.0, 1.0])
    smooth = np.array([1.0, 2.0, 1.0])
    ix = ndimage.correlate1d(grid, smooth, axis=0, mode="nearest")
    ix = ndimage.correlate1d(ix, diff, axis=1, mode="nearest") / 8.0
    iy = ndimage.correlate1d(grid, smooth, axis=1, mode="nearest")
    iy = ndimage.correlate1d(iy, diff, axis=0, mode="nearest") / 8.0
    return ix, iy
