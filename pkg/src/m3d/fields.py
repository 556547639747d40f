"""Dense field types and the camera model.

Conventions used throughout the package:

* Pixel (i, j) means row i, column j; arrays are row-major float64.
* Disparities are stored as non-negative magnitudes. A left-image pixel at
  column x corresponds to column x - d_l(x) in the right image; a right-image
  pixel at column x corresponds to x + d_r(x) in the left image.
* Depth and disparity relate through Z = baseline * focal / d. Disparities
  below ZERO_DISPARITY_EPS are treated as invalid rather than mapped to
  infinite depth.

All types are immutable after construction (arrays are locked), so instances
are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

ZERO_DISPARITY_EPS = 1e-6


def _as_locked(a: np.ndarray, dtype) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=dtype)
    if out is a and a.flags.writeable:
        out = out.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class ImagePlane:
    """h x w x c intensity field with values in [0, 1]; c is 1 or 3."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3 or a.shape[2] not in (1, 3):
            raise InvalidArgumentError(f"image must be h x w x {{1,3}}, got {a.shape}")
        if a.shape[0] < 1 or a.shape[1] < 1:
            raise InvalidArgumentError("image dims must be positive")
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("image intensities must be finite")
        if a.min() < 0.0 or a.max() > 1.0:
            raise InvalidArgumentError("image intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _as_locked(a, np.float64))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class DisparityField:
    """h x w non-negative horizontal disparities, in pixels."""

    values: np.ndarray
    d_max: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidArgumentError(f"disparity field must be 2-D, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("disparities must be finite")
        if v.min() < 0.0:
            raise InvalidArgumentError("disparities must be non-negative")
        if self.d_max is not None and v.max() > self.d_max:
            raise InvalidArgumentError(f"disparity exceeds ceiling {self.d_max}")
        object.__setattr__(self, "values", _as_locked(v, np.float64))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class DepthMap:
    """h x w depths in scene units with a per-pixel validity flag."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        m = np.asarray(self.valid, dtype=bool)
        if v.ndim != 2 or m.shape != v.shape:
            raise InvalidArgumentError("depth values and validity must be matching 2-D arrays")
        if not np.all(np.isfinite(v[m])) or (m.any() and v[m].min() <= 0.0):
            raise InvalidArgumentError("valid depths must be finite and positive")
        object.__setattr__(self, "values", _as_locked(v, np.float64))
        object.__setattr__(self, "valid", _as_locked(m, bool))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class CameraRig:
    """Rectified pinhole stereo rig.

    The left camera sits at the origin; the right camera is displaced by
    `baseline` along +X. `focal` is in pixels, `baseline` in scene units.
    """

    focal: float
    cx: float
    cy: float
    baseline: float
    height: int
    width: int

    def __post_init__(self):
        if self.focal <= 0 or self.baseline <= 0:
            raise InvalidArgumentError("focal and baseline must be positive")
        if not (0 <= self.cx <= self.width - 1 and 0 <= self.cy <= self.height - 1):
            raise InvalidArgumentError("principal point must lie inside the image")

    def intrinsics(self) -> np.ndarray:
        return np.array(
            [[self.focal, 0.0, self.cx], [0.0, self.focal, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class PixelGrid:
    """Per-pixel coordinate fields: x_coords(i, j) = j, y_coords(i, j) = i."""

    x_coords: np.ndarray
    y_coords: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x_coords, dtype=np.float64)
        y = np.asarray(self.y_coords, dtype=np.float64)
        if x.ndim != 2 or x.shape != y.shape:
            raise InvalidArgumentError("coordinate fields must be matching 2-D arrays")
        object.__setattr__(self, "x_coords", _as_locked(x, np.float64))
        object.__setattr__(self, "y_coords", _as_locked(y, np.float64))


@dataclass(frozen=True)
class BinaryMask:
    """h x w field of {0, 1}."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise InvalidArgumentError(f"mask must be 2-D, got {b.shape}")
        if not np.isin(b, (0, 1)).all():
            raise InvalidArgumentError("mask values must be 0 or 1")
        object.__setattr__(self, "bits", _as_locked(b, np.uint8))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    def as_bool(self) -> np.ndarray:
        return self.bits.astype(bool)

    @staticmethod
    def full(height: int, width: int) -> "BinaryMask":
        return BinaryMask(np.ones((height, width), dtype=np.uint8))


def make_meshgrid(height: int, width: int) -> PixelGrid:
    """Coordinate grid over an image of the given size."""
    if height < 1 or width < 1:
        raise InvalidArgumentError("meshgrid dims must be >= 1")
    x = np.tile(np.arange(width, dtype=np.float64), (height, 1))
    y = np.tile(np.arange(height, dtype=np.float64)[:, None], (1, width))
    return PixelGrid(x, y)


def disparity_to_depth(d: DisparityField, rig: CameraRig) -> DepthMap:
    """Z = baseline * focal / d; sub-epsilon disparities become invalid pixels."""
    if (d.height, d.width) != (rig.height, rig.width):
        raise InvalidArgumentError(
            f"disparity {d.height}x{d.width} does not match rig {rig.height}x{rig.width}"
        )
    v = d.values
    valid = v >= ZERO_DISPARITY_EPS
    depth = np.zeros_like(v)
    np.divide(rig.baseline * rig.focal, v, out=depth, where=valid)
    return DepthMap(depth, valid)


def depth_to_disparity(depth: DepthMap, rig: CameraRig) -> DisparityField:
    """Inverse of disparity_to_depth; invalid depths map to zero disparity."""
    if (depth.height, depth.width) != (rig.height, rig.width):
        raise InvalidArgumentError(
            f"depth {depth.height}x{depth.width} does not match rig {rig.height}x{rig.width}"
        )
    out = np.zeros_like(depth.values)
    np.divide(rig.baseline * rig.focal, depth.values, out=out, where=depth.valid)
    return DisparityField(out)
