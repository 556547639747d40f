"""Disparity-driven horizontal image warping and blind masking.

Warping is strictly horizontal (rectified pairs). Sampling is bilinear along
x with border clamping; clamped pixels are flagged out-of-bounds so losses can
exclude them. The derivative of a bilinear sample at exact integer positions
uses the right-sided kernel slope, except at x = w - 1 where only the
left-sided slope exists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .fields import BinaryMask, DisparityField, ImagePlane

TOWARD_LEFT = "toward_left"
TOWARD_RIGHT = "toward_right"
LEFT_VIEW = "left_view"
RIGHT_VIEW = "right_view"


@dataclass(frozen=True)
class WarpResult:
    """Reconstruction plus what a loss needs to differentiate through it.

    d_sample_jacobian[i, j, c] is the derivative of reconstructed[i, j, c]
    with respect to the driving disparity at (i, j); it is zero wherever
    in_bounds is zero. `direction` records which disparity field drove the
    warp (toward_left: the left field, toward_right: the right field).
    """

    reconstructed: ImagePlane
    in_bounds: BinaryMask
    d_sample_jacobian: np.ndarray
    direction: str


def sample_rows_x(values: np.ndarray, xs: np.ndarray):
    """Bilinearly sample each row of `values` at horizontal positions `xs`.

    values: (h, w) or (h, w, c); xs: (h, w) sample columns, one per output
    pixel, taken in the same row. Out-of-range positions clamp to the border.

    Returns (sampled, slope, x0, frac, in_bounds):
      sampled  - same leading shape as xs (plus channel axis if present)
      slope    - d(sampled)/d(xs), zero out of range
      x0, frac - integer cell index and fractional offset actually used
      in_bounds- boolean, xs in [0, w - 1]
    """
    squeeze = values.ndim == 2
    if squeeze:
        values = values[:, :, None]
    h, w, c = values.shape
    if xs.shape != (h, w):
        raise InvalidArgumentError("sample grid shape must match field shape")

    in_bounds = (xs >= 0.0) & (xs <= w - 1.0)
    xc = np.clip(xs, 0.0, w - 1.0)
    x0 = np.minimum(np.floor(xc).astype(np.intp), max(w - 2, 0))
    frac = xc - x0

    rows = np.arange(h)[:, None]
    left = values[rows, x0, :]
    right = values[rows, np.minimum(x0 + 1, w - 1), :]
    sampled = (1.0 - frac)[:, :, None] * left + frac[:, :, None] * right
    slope = np.where(in_bounds[:, :, None], right - left, 0.0)

    if squeeze:
        return sampled[:, :, 0], slope[:, :, 0], x0, frac, in_bounds
    return sampled, slope, x0, frac, in_bounds


def warp_horizontal(source: ImagePlane, d: DisparityField, direction: str) -> WarpResult:
    """Reconstruct a view by sampling `source` along disparity-shifted columns.

    toward_left:  output(i, j) = source(i, j - d(i, j))   (left view from right image)
    toward_right: output(i, j) = source(i, j + d(i, j))   (right view from left image)
    """
    if direction not in (TOWARD_LEFT, TOWARD_RIGHT):
        raise InvalidArgumentError(f"unknown warp direction {direction!r}")
    if (source.height, source.width) != (d.height, d.width):
        raise InvalidArgumentError("source and disparity dims must match")

    sign = -1.0 if direction == TOWARD_LEFT else 1.0
    j = np.arange(source.width, dtype=np.float64)[None, :]
    xs = j + sign * d.values
    sampled, slope, _, _, in_bounds = sample_rows_x(source.data, xs)
    jac = sign * slope
    return WarpResult(
        reconstructed=ImagePlane(np.clip(sampled, 0.0, 1.0)),
        in_bounds=BinaryMask(in_bounds.astype(np.uint8)),
        d_sample_jacobian=jac,
        direction=direction,
    )


def project_disparity(d_source: np.ndarray, sign: float, init: np.ndarray | None = None,
                      iters: int = 60) -> np.ndarray:
    """Solve d(x) = sample(d_source)(x + sign*d(x)) per pixel by fixed point.

    Maps a disparity grid into the opposite view's coordinates (sign=+1:
    left grid to right view, sign=-1: right grid to left view). Converges for
    |local slope| < 1; border pixels whose correspondent leaves the grid take
    the clamped border value (they are blind-masked downstream anyway).
    """
    h, w = d_source.shape
    j = np.arange(w, dtype=np.float64)[None, :] + np.zeros((h, 1))
    d = d_source.copy() if init is None else init.copy()
    for _ in range(iters):
        d, _, _, _, _ = sample_rows_x(d_source, j + sign * d)
    return d


def blind_mask(d: DisparityField, direction: str, width: int | None = None) -> BinaryMask:
    """Mark pixels whose stereo correspondent falls inside the other view.

    left_view:  mask = 1 iff j - d(i, j) in [0, width - 1]
    right_view: mask = 1 iff j + d(i, j) in [0, width - 1]

    Pixels with mask 0 (left edge of the left view, right edge of the right
    view) carry no cross-view supervision and are excluded from losses.
    """
    if direction not in (LEFT_VIEW, RIGHT_VIEW):
        raise InvalidArgumentError(f"unknown mask direction {direction!r}")
    w = d.width if width is None else width
    sign = -1.0 if direction == LEFT_VIEW else 1.0
    j = np.arange(d.width, dtype=np.float64)[None, :]
    xs = j + sign * d.values
    bits = (xs >= 0.0) & (xs <= w - 1.0)
    return BinaryMask(bits.astype(np.uint8))
