"""Structured-light ground truth tooling.

Gray-code pattern generation and decoding (with inverse patterns for
contrast-robust bit tests), three-phase modulation-depth computation with
uncertainty masking, and triangulation of decoded projector columns against
a rectified pinhole projector model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError
from .fields import BinaryMask, CameraRig, DepthMap, DisparityField, ImagePlane, disparity_to_depth

DEFAULT_PHASE_SHIFTS = (0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0)
DEFAULT_MODULATION_THRESHOLD = 0.05
DEFAULT_CONTRAST_EPS = 0.02


def _gray_encode(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def gray_decode_int(g: np.ndarray) -> np.ndarray:
    """Reflected-gray to binary, vectorized."""
    g = np.asarray(g, dtype=np.int64)
    n = g.copy()
    shift = g >> 1
    while shift.any():
        n ^= shift
        shift >>= 1
    return n


@dataclass(frozen=True)
class GrayCodeSet:
    """Column-stripe gray-code patterns plus their inverses.

    patterns[k] carries bit k of the reflected-gray codeword, most
    significant bit first; each pattern is a (height, width) binary image.
    """

    projector_width: int
    bit_count: int
    patterns: tuple
    inverses: tuple


@dataclass(frozen=True)
class PhasePatternSet:
    """Three sinusoidal captures for per-pixel modulation depth."""

    i1: ImagePlane
    i2: ImagePlane
    i3: ImagePlane
    phase_shifts: tuple = DEFAULT_PHASE_SHIFTS
    threshold: float = DEFAULT_MODULATION_THRESHOLD

    def __post_init__(self):
        if not (self.i1.data.shape == self.i2.data.shape == self.i3.data.shape):
            raise InvalidArgumentError("phase captures must share dims")
        if len(self.phase_shifts) != 3:
            raise InvalidArgumentError("exactly three phase shifts expected")


@dataclass(frozen=True)
class CorrespondenceMap:
    """Per-camera-pixel decoded projector column with a certainty mask."""

    columns: np.ndarray
    certain: BinaryMask
    projector_width: int

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.int64)
        sure = self.certain.as_bool()
        if cols.shape != sure.shape:
            raise InvalidArgumentError("columns and certainty dims must match")
        if sure.any():
            cs = cols[sure]
            if cs.min() < 0 or cs.max() >= self.projector_width:
                raise InvalidArgumentError("decoded columns out of projector range")
        object.__setattr__(self, "columns", cols)


@dataclass(frozen=True)
class ProjectorModel:
    """Rectified pinhole projector sharing the camera's row geometry."""

    width: int
    baseline: float
    focal: float | None = None        # defaults to the camera focal
    principal_col: float | None = None  # defaults to the camera cx

    def __post_init__(self):
        if self.width < 2 or self.baseline <= 0:
            raise InvalidArgumentError("projector needs width >= 2 and positive baseline")


def generate_gray_patterns(projector_width: int, height: int = 1) -> GrayCodeSet:
    """Stripe patterns encoding each projector column's gray codeword."""
    if projector_width < 2:
        raise InvalidArgumentError("projector width must be >= 2")
    bit_count = int(np.ceil(np.log2(projector_width)))
    cols = np.arange(projector_width, dtype=np.int64)
    gray = _gray_encode(cols)
    patterns = []
    inverses = []
    for k in range(bit_count):
        bit = (gray >> (bit_count - 1 - k)) & 1
        row = bit.astype(np.float64)
        img = np.tile(row, (height, 1))
        patterns.append(ImagePlane(img))
        inverses.append(ImagePlane(1.0 - img))
    return GrayCodeSet(projector_width, bit_count, tuple(patterns), tuple(inverses))


def decode_gray(
    captures,
    inverse_captures,
    projector_width: int,
    contrast_eps: float = DEFAULT_CONTRAST_EPS,
) -> CorrespondenceMap:
    """Recover projector columns from paired normal/inverse captures.

    Bit k is 1 where capture_k outshines its inverse; pixels where any pair
    differs by less than contrast_eps are flagged uncertain, as are pixels
    decoding outside the projector width (possible when the width is not a
    power of two).
    """
    if len(captures) != len(inverse_captures) or not captures:
        raise InvalidArgumentError("need matching non-empty capture and inverse lists")
    bit_count = len(captures)
    shape = captures[0].data.shape[:2]
    gray = np.zeros(shape, dtype=np.int64)
    certain = np.ones(shape, dtype=bool)
    for k, (cap, inv) in enumerate(zip(captures, inverse_captures)):
        a = cap.data.mean(axis=2)
        b = inv.data.mean(axis=2)
        if a.shape != shape:
            raise InvalidArgumentError("capture dims differ")
        certain &= np.abs(a - b) >= contrast_eps
        bit = (a > b).astype(np.int64)
        gray |= bit << (bit_count - 1 - k)
    cols = gray_decode_int(gray)
    in_range = (cols >= 0) & (cols < projector_width)
    certain &= in_range
    cols = np.where(in_range, cols, 0)
    return CorrespondenceMap(cols, BinaryMask(certain.astype(np.uint8)), projector_width)


def modulation_depth(p: PhasePatternSet):
    """Per-pixel modulation amplitude and its certainty mask.

    T = (2*sqrt(2)/3) * sqrt((I1-I2)^2 + (I2-I3)^2 + (I1-I3)^2); with shifts
    spaced 2*pi/3 apart this equals twice the sinusoid amplitude at every
    pixel phase. Pixels below the threshold are uncertain.
    """
    a = p.i1.data.mean(axis=2)
    b = p.i2.data.mean(axis=2)
    c = p.i3.data.mean(axis=2)
    t = (2.0 * np.sqrt(2.0) / 3.0) * np.sqrt((a - b) ** 2 + (b - c) ** 2 + (a - c) ** 2)
    certain = t >= p.threshold
    return t, BinaryMask(certain.astype(np.uint8))


def triangulate(corr: CorrespondenceMap, rig: CameraRig, projector: ProjectorModel) -> DepthMap:
    """Depth from camera-column / projector-column parallax.

    The projector sits at +baseline along X with its own focal length and
    principal column; the effective column disparity reduces to the standard
    disparity-to-depth relation of the rig geometry. Uncertain pixels and
    non-positive parallax become invalid.
    """
    h, w = corr.columns.shape
    if (h, w) != (rig.height, rig.width):
        raise InvalidArgumentError("correspondence dims must match rig dims")
    f_p = rig.focal if projector.focal is None else projector.focal
    c_p = rig.cx if projector.principal_col is None else projector.principal_col

    j = np.arange(w, dtype=np.float64)[None, :] + np.zeros((h, 1))
    # Z = B / ((j - cx)/f  -  (p - c_p)/f_p); expressed as an equivalent
    # disparity so the shared conversion (with its epsilon rule) applies
    disparity = (j - rig.cx) - (rig.focal / f_p) * (corr.columns - c_p)
    disparity = np.where(corr.certain.as_bool() & (disparity > 0), disparity, 0.0)
    tri_rig = CameraRig(
        focal=rig.focal, cx=rig.cx, cy=rig.cy,
        baseline=projector.baseline, height=h, width=w,
    )
    return disparity_to_depth(DisparityField(disparity), tri_rig)


def render_gray_captures(
    depth: np.ndarray,
    rig: CameraRig,
    projector: ProjectorModel,
    patterns: GrayCodeSet,
    albedo: float = 0.8,
    ambient: float = 0.1,
):
    """Synthetic camera captures of the gray patterns over a depth field.

    Each camera ray hits the surface at its depth and reads the projector
    column illuminating that point (nearest column center). Points outside
    the projector frustum see only ambient light, which decodes as uncertain.
    Returns (captures, inverses, true_columns).
    """
    h, w = depth.shape
    f_p = rig.focal if projector.focal is None else projector.focal
    c_p = rig.cx if projector.principal_col is None else projector.principal_col
    j = np.arange(w, dtype=np.float64)[None, :] + np.zeros((h, 1))
    x = (j - rig.cx) * depth / rig.focal
    p_cont = c_p + f_p * (x - projector.baseline) / depth
    col = np.round(p_cont).astype(np.int64)
    lit = (col >= 0) & (col < projector.width)
    col_safe = np.clip(col, 0, projector.width - 1)

    captures, inverses = [], []
    for pat, inv in zip(patterns.patterns, patterns.inverses):
        bits = pat.data[0, :, 0][col_safe]
        ibits = inv.data[0, :, 0][col_safe]
        cap = np.where(lit, ambient + albedo * bits, ambient)
        icp = np.where(lit, ambient + albedo * ibits, ambient)
        captures.append(ImagePlane(cap))
        inverses.append(ImagePlane(icp))
    return captures, inverses, np.where(lit, col_safe, -1)


def render_phase_captures(
    amplitude,
    rig: CameraRig,
    depth: np.ndarray,
    projector: ProjectorModel,
    period_px: float = 16.0,
    offset: float = 0.5,
    shifts=DEFAULT_PHASE_SHIFTS,
    threshold: float = DEFAULT_MODULATION_THRESHOLD,
) -> PhasePatternSet:
    """Three-phase sinusoid captures for the same projective geometry."""
    h, w = depth.shape
    f_p = rig.focal if projector.focal is None else projector.focal
    c_p = rig.cx if projector.principal_col is None else projector.principal_col
    j = np.arange(w, dtype=np.float64)[None, :] + np.zeros((h, 1))
    x = (j - rig.cx) * depth / rig.focal
    p_cont = c_p + f_p * (x - projector.baseline) / depth
    phase = 2.0 * np.pi * p_cont / period_px
    amp = np.broadcast_to(np.asarray(amplitude, dtype=np.float64), (h, w))
    caps = [ImagePlane(offset + amp * np.sin(phase + s)) for s in shifts]
    return PhasePatternSet(caps[0], caps[1], caps[2], tuple(shifts), threshold)
