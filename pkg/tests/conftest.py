"""Shared helpers: random instances and the finite-difference oracle."""

import numpy as np
import pytest

from m3d.fields import CameraRig, DisparityField, ImagePlane


def make_rig(height=16, width=20, focal=100.0, baseline=4.2):
    return CameraRig(
        focal=focal,
        cx=(width - 1) / 2.0,
        cy=(height - 1) / 2.0,
        baseline=baseline,
        height=height,
        width=width,
    )


def rand_image(rng, h, w, c=1, smooth=True):
    """Random test image; light smoothing keeps bilinear slopes informative."""
    img = rng.uniform(0.0, 1.0, size=(h, w, c))
    if smooth:
        for _ in range(2):
            img = 0.25 * (
                img
                + np.roll(img, 1, axis=0)
                + np.roll(img, 1, axis=1)
                + np.roll(img, (1, 1), axis=(0, 1))
            )
    lo, hi = img.min(), img.max()
    img = 0.05 + 0.9 * (img - lo) / max(hi - lo, 1e-12)
    return ImagePlane(img)


def rand_disparity(rng, h, w, low=0.5, high=4.0):
    return DisparityField(rng.uniform(low, high, size=(h, w)))


def central_diff(value_fn, values, i, j, step=1e-6):
    """Central finite difference of value_fn w.r.t. one entry of `values`."""
    v_plus = values.copy()
    v_plus[i, j] += step
    v_minus = values.copy()
    v_minus[i, j] -= step
    return (value_fn(v_plus) - value_fn(v_minus)) / (2.0 * step)


def fd_matches(analytic, fd, rtol=1e-4, atol=1e-10):
    return abs(analytic - fd) <= rtol * max(abs(analytic), abs(fd)) + atol


def away_from_kinks(xs, margin=1e-3):
    """True where bilinear sample positions sit away from integer kinks."""
    frac = xs - np.floor(xs)
    return (frac > margin) & (frac < 1.0 - margin)


def check_gradient_field(value_fn, values, grad, coords, step=1e-6, rtol=1e-4, atol=1e-10):
    """Assert analytic `grad` matches central differences at the given pixels."""
    failures = []
    for i, j in coords:
        fd = central_diff(value_fn, values, i, j, step)
        if not fd_matches(grad[i, j], fd, rtol, atol):
            failures.append((i, j, grad[i, j], fd))
    assert not failures, f"gradient mismatches: {failures[:5]}"
