"""Surface depth and lateral-motion reconstruction for SEM fatigue imagery.

Two re-oriented end-state views give calibration (vanishing points),
epipolar geometry (normalized eight-point) and metric surface structure
(affine factorization); the in-experiment single-view frames are walked
backward with pyramidal Lucas-Kanade tracking to recover how each surface
point moved. The `cli` module ties the stages into a deterministic batch
pipeline with CSV/JSON artifacts.
"""

__version__ = "0.1.0"

from .errors import DegeneracyError, InputError, SemsurfError

__all__ = ["DegeneracyError", "InputError", "SemsurfError", "__version__"]
