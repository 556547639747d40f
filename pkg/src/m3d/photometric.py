"""2D loss terms over rectified stereo pairs, with analytic gradients.

Three terms: appearance matching (windowed SSIM blended with L1), left-right
disparity consistency, and edge-aware disparity smoothness. Each returns a
TermValueGrad carrying the scalar value and dense gradient fields with
respect to the disparity maps.

Windowed SSIM statistics are computed as mask-weighted local moments
(zero-weight outside the mask and outside the image), so loss values and
gradients are strictly independent of content at masked-out pixels. The
window box filter with zero padding is self-adjoint, which keeps the
gradient chain exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .fields import BinaryMask, DisparityField, ImagePlane
from .warping import LEFT_VIEW, RIGHT_VIEW, TOWARD_LEFT, WarpResult, sample_rows_x

DEFAULT_GAMMA = 0.85


@dataclass(frozen=True)
class SsimParams:
    """Window size and stabilizing constants for SSIM on [0, 1] intensities."""

    window: int = 3
    c1: float = 0.01**2
    c2: float = 0.03**2

    def __post_init__(self):
        if self.window < 3 or self.window % 2 == 0:
            raise InvalidArgumentError("SSIM window must be odd and >= 3")
        if self.c1 <= 0 or self.c2 <= 0:
            raise InvalidArgumentError("SSIM constants must be positive")


@dataclass(frozen=True)
class TermValueGrad:
    """Scalar loss value plus gradients w.r.t. the left/right disparity fields.

    A slot is all-zero when the term does not depend on that field.
    """

    value: float
    grad_dl: np.ndarray
    grad_dr: np.ndarray
    warnings: tuple = ()

    def __post_init__(self):
        if self.grad_dl.shape != self.grad_dr.shape:
            raise InvalidArgumentError("gradient fields must share one shape")
        if not (np.isfinite(self.value) and np.all(np.isfinite(self.grad_dl)) and np.all(np.isfinite(self.grad_dr))):
            raise InvalidArgumentError("loss value and gradients must be finite")


def box_sum(x: np.ndarray, window: int) -> np.ndarray:
    """Sliding window sum over the first two axes, zero outside the image.

    With zero padding the operator is its own adjoint, a fact the SSIM
    gradient relies on.
    """
    r = window // 2
    pad = [(r, r), (r, r)] + [(0, 0)] * (x.ndim - 2)
    xp = np.pad(x, pad, mode="constant")
    h, w = x.shape[:2]
    out = np.zeros_like(x)
    for di in range(window):
        for dj in range(window):
            out += xp[di : di + h, dj : dj + w]
    return out


def _masked_moments(a, b, m, window):
    """Mask-weighted first and second window moments of two channel stacks."""
    mw = m[:, :, None]
    n = box_sum(np.broadcast_to(mw, a.shape).copy(), window)
    pos = n > 0
    inv_n = np.zeros_like(n)
    np.divide(1.0, n, out=inv_n, where=pos)
    mu_a = box_sum(mw * a, window) * inv_n
    mu_b = box_sum(mw * b, window) * inv_n
    e_aa = box_sum(mw * a * a, window) * inv_n
    e_bb = box_sum(mw * b * b, window) * inv_n
    e_ab = box_sum(mw * a * b, window) * inv_n
    return n, inv_n, pos, mu_a, mu_b, e_aa, e_bb, e_ab


def _ssim_channels(a, b, m, p: SsimParams):
    """Per-channel SSIM from mask-weighted window statistics.

    Returns the ssim stack plus every intermediate the backward pass needs.
    """
    n, inv_n, pos, mu_a, mu_b, e_aa, e_bb, e_ab = _masked_moments(a, b, m, p.window)
    va = e_aa - mu_a**2
    vb = e_bb - mu_b**2
    vab = e_ab - mu_a * mu_b
    a1 = 2.0 * mu_a * mu_b + p.c1
    a2 = 2.0 * vab + p.c2
    b1 = mu_a**2 + mu_b**2 + p.c1
    b2 = va + vb + p.c2
    s = np.where(pos, a1 * a2 / (b1 * b2), 0.0)
    return s, (inv_n, pos, mu_a, mu_b, a1, a2, b1, b2, s)


def _ssim_backward_b(a, b, m, g, cache, window):
    """Gradient of sum(g * ssim) with respect to b, holding a and m fixed."""
    inv_n, pos, mu_a, mu_b, a1, a2, b1, b2, s = cache
    inv_d = 1.0 / (b1 * b2)
    ds_dmub = 2.0 * mu_a * (a2 - a1) * inv_d - 2.0 * mu_b * s / b1 + 2.0 * mu_b * s / b2
    ds_debb = -s / b2
    ds_deab = 2.0 * a1 * inv_d
    g_n = np.where(pos, g * inv_n, 0.0)
    back = (
        box_sum(g_n * ds_dmub, window)
        + 2.0 * b * box_sum(g_n * ds_debb, window)
        + a * box_sum(g_n * ds_deab, window)
    )
    return m[:, :, None] * back


def ssim_map(a: ImagePlane, b: ImagePlane, p: SsimParams = SsimParams()) -> np.ndarray:
    """Per-pixel SSIM between two images, averaged over channels.

    Window statistics near the border average over the in-image part of the
    window, so constant inputs give the exact constant-signal SSIM everywhere.
    Values lie in [-1, 1]. Returned as a plain (h, w) array: SSIM is a
    similarity field, not an intensity image.
    """
    if a.data.shape != b.data.shape:
        raise InvalidArgumentError("SSIM inputs must share dims and channels")
    m = np.ones(a.data.shape[:2])
    s, _ = _ssim_channels(a.data, b.data, m, p)
    return s.mean(axis=2)


def appearance_loss(
    original: ImagePlane,
    reconstructed: WarpResult,
    mask: BinaryMask,
    gamma: float = DEFAULT_GAMMA,
    p: SsimParams = SsimParams(),
) -> TermValueGrad:
    """Masked mean of gamma/2*(1 - SSIM) + (1-gamma)*L1 over the view.

    The gradient is taken w.r.t. the disparity that drove the reconstruction
    and lands in grad_dl or grad_dr according to the warp direction. SSIM
    window statistics exclude masked-out pixels, so the term is invariant to
    image content outside the mask.
    """
    a = original.data
    b = reconstructed.reconstructed.data
    if a.shape != b.shape:
        raise InvalidArgumentError("original and reconstruction must share dims")
    if not 0.0 <= gamma <= 1.0:
        raise InvalidArgumentError("gamma must lie in [0, 1]")
    if (mask.height, mask.width) != a.shape[:2]:
        raise InvalidArgumentError("mask dims must match image dims")

    h, w, c = a.shape
    m = mask.bits.astype(np.float64)
    n_px = m.sum()
    if n_px == 0:
        z = np.zeros((h, w))
        return TermValueGrad(0.0, z, z.copy(), warnings=("empty_mask",))

    s, cache = _ssim_channels(a, b, m, p)
    ssim_px = s.mean(axis=2)
    l1_px = np.abs(a - b).mean(axis=2)
    integrand = 0.5 * gamma * (1.0 - ssim_px) + (1.0 - gamma) * l1_px
    value = float((m * integrand).sum() / n_px)

    # d(value)/d(b), both branches; SSIM couples pixels within one window.
    g_s = (-0.5 * gamma / (n_px * c)) * m
    d_b = _ssim_backward_b(a, b, m, g_s[:, :, None], cache, p.window)
    d_b += ((1.0 - gamma) / (n_px * c)) * m[:, :, None] * np.sign(b - a)

    grad_d = (d_b * reconstructed.d_sample_jacobian).sum(axis=2)
    zeros = np.zeros((h, w))
    if reconstructed.direction == TOWARD_LEFT:
        return TermValueGrad(value, grad_d, zeros)
    return TermValueGrad(value, zeros, grad_d)


def _lr_one_sided(d_ref, d_other, mask_ref, mask_other, sign):
    """One direction of the consistency check.

    Reference pixels x compare d_ref(x) against the other field sampled at
    x + sign*d_ref(x). A pixel contributes only when it is mask-in on the
    reference side and both bilinear support pixels are mask-in on the other
    side, which keeps the term independent of masked-out disparities.
    """
    h, w = d_ref.shape
    j = np.arange(w, dtype=np.float64)[None, :]
    xs = j + sign * d_ref
    v, slope, x0, frac, in_bounds = sample_rows_x(d_other, xs)

    mo = mask_other.astype(bool)
    rows = np.arange(h)[:, None]
    support_ok = mo[rows, x0] & mo[rows, np.minimum(x0 + 1, w - 1)]
    weight = mask_ref.astype(bool) & in_bounds & support_ok
    n = int(weight.sum())

    grad_ref = np.zeros((h, w))
    grad_other = np.zeros((h, w))
    if n == 0:
        return 0.0, grad_ref, grad_other, 0

    diff = d_ref - v
    sgn = np.where(weight, np.sign(diff), 0.0)
    total = float(np.abs(diff)[weight].sum())

    grad_ref = sgn * (1.0 - sign * slope) / n
    scatter = -sgn / n
    np.add.at(grad_other, (rows + np.zeros_like(x0), x0), scatter * (1.0 - frac))
    np.add.at(grad_other, (rows + np.zeros_like(x0), np.minimum(x0 + 1, w - 1)), scatter * frac)
    return total, grad_ref, grad_other, n


def lr_consistency_loss(
    dl: DisparityField,
    dr: DisparityField,
    mask_l: BinaryMask,
    mask_r: BinaryMask,
) -> TermValueGrad:
    """Mutual-projection agreement between the two disparity fields.

    Pools the two symmetric one-sided sums (right pixels against sampled
    left disparities and vice versa) into a single masked mean; gradients
    flow to both fields.
    """
    if dl.values.shape != dr.values.shape:
        raise InvalidArgumentError("disparity fields must share dims")
    tot_r, g_ref_r, g_other_r, n_r = _lr_one_sided(
        dr.values, dl.values, mask_r.bits, mask_l.bits, +1.0
    )
    tot_l, g_ref_l, g_other_l, n_l = _lr_one_sided(
        dl.values, dr.values, mask_l.bits, mask_r.bits, -1.0
    )
    n = n_r + n_l
    if n == 0:
        z = np.zeros_like(dl.values)
        return TermValueGrad(0.0, z, z.copy(), warnings=("empty_mask",))
    value = (tot_r + tot_l) / n
    # One-sided helpers normalize by their own counts; rescale to the pooled N.
    grad_dl = (g_other_r * n_r + g_ref_l * n_l) / n
    grad_dr = (g_ref_r * n_r + g_other_l * n_l) / n
    return TermValueGrad(float(value), grad_dl, grad_dr)


def lr_consistency_one_sided(
    dl: DisparityField,
    dr: DisparityField,
    mask_l: BinaryMask,
    mask_r: BinaryMask,
    view: str,
) -> TermValueGrad:
    """Single-view consistency term (masked mean over that view's pixels).

    view="right_view" compares d_r against sampled d_l; "left_view" mirrors.
    """
    if view == RIGHT_VIEW:
        tot, g_ref, g_other, n = _lr_one_sided(
            dr.values, dl.values, mask_r.bits, mask_l.bits, +1.0
        )
        grad_dl, grad_dr = g_other, g_ref
    elif view == LEFT_VIEW:
        tot, g_ref, g_other, n = _lr_one_sided(
            dl.values, dr.values, mask_l.bits, mask_r.bits, -1.0
        )
        grad_dl, grad_dr = g_ref, g_other
    else:
        raise InvalidArgumentError(f"unknown view {view!r}")
    if n == 0:
        z = np.zeros_like(dl.values)
        return TermValueGrad(0.0, z, z.copy(), warnings=("empty_mask",))
    return TermValueGrad(tot / n, grad_dl, grad_dr)


def smoothness_loss(d: DisparityField, img: ImagePlane, slot: str = "dl") -> TermValueGrad:
    """Edge-weighted mean absolute disparity gradient.

    Forward differences; image gradient magnitudes are channel means; each
    directional term averages over its own valid stencil (the last column or
    row is excluded). `slot` names the gradient field of the returned term.
    """
    if (d.height, d.width) != (img.height, img.width):
        raise InvalidArgumentError("disparity and image dims must match")
    v = d.values
    h, w = v.shape
    grad = np.zeros((h, w))
    value = 0.0

    if w > 1:
        wx = np.exp(-np.abs(np.diff(img.data, axis=1)).mean(axis=2))
        dx = np.diff(v, axis=1)
        n = dx.size
        value += float((np.abs(dx) * wx).sum() / n)
        gx = np.sign(dx) * wx / n
        grad[:, 1:] += gx
        grad[:, :-1] -= gx
    if h > 1:
        wy = np.exp(-np.abs(np.diff(img.data, axis=0)).mean(axis=2))
        dy = np.diff(v, axis=0)
        n = dy.size
        value += float((np.abs(dy) * wy).sum() / n)
        gy = np.sign(dy) * wy / n
        grad[1:, :] += gy
        grad[:-1, :] -= gy

    zeros = np.zeros((h, w))
    if slot == "dl":
        return TermValueGrad(value, grad, zeros)
    if slot == "dr":
        return TermValueGrad(value, zeros, grad)
    raise InvalidArgumentError(f"unknown gradient slot {slot!r}")
