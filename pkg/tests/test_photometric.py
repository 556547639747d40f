import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from m3d.errors import InvalidArgumentError
from m3d.fields import BinaryMask, DisparityField, ImagePlane
from m3d.photometric import (
    SsimParams,
    appearance_loss,
    box_sum,
    lr_consistency_loss,
    lr_consistency_one_sided,
    smoothness_loss,
    ssim_map,
)
from m3d.warping import (
    LEFT_VIEW,
    RIGHT_VIEW,
    TOWARD_LEFT,
    WarpResult,
    blind_mask,
    warp_horizontal,
)

from conftest import (
    away_from_kinks,
    check_gradient_field,
    rand_disparity,
    rand_image,
)


def brute_force_ssim(a, b, mask, p):
    """Independent per-pixel SSIM with mask-weighted window statistics."""
    h, w, c = a.shape
    r = p.window // 2
    out = np.zeros((h, w, c))
    for i in range(h):
        for j in range(w):
            ii = slice(max(i - r, 0), min(i + r + 1, h))
            jj = slice(max(j - r, 0), min(j + r + 1, w))
            m = mask[ii, jj].astype(bool)
            if not m.any():
                continue
            for ch in range(c):
                aw = a[ii, jj, ch][m]
                bw = b[ii, jj, ch][m]
                mu_a, mu_b = aw.mean(), bw.mean()
                va = (aw**2).mean() - mu_a**2
                vb = (bw**2).mean() - mu_b**2
                vab = (aw * bw).mean() - mu_a * mu_b
                out[i, j, ch] = ((2 * mu_a * mu_b + p.c1) * (2 * vab + p.c2)) / (
                    (mu_a**2 + mu_b**2 + p.c1) * (va + vb + p.c2)
                )
    return out


class TestBoxSum:
    @pytest.mark.parametrize("window", [3, 5])
    def test_self_adjoint(self, window):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((9, 7))
        y = rng.standard_normal((9, 7))
        lhs = float((box_sum(x, window) * y).sum())
        rhs = float((x * box_sum(y, window)).sum())
        assert abs(lhs - rhs) < 1e-10

    def test_counts(self):
        n = box_sum(np.ones((4, 5)), 3)
        assert n[0, 0] == 4 and n[0, 2] == 6 and n[2, 2] == 9


class TestSsimMap:
    def test_identical_images(self):
        rng = np.random.default_rng(1)
        img = rand_image(rng, 6, 8, c=3, smooth=False)
        np.testing.assert_allclose(ssim_map(img, img), 1.0, atol=1e-12)

    def test_constant_images_closed_form(self):
        u, v = 0.3, 0.7
        p = SsimParams()
        a = ImagePlane(np.full((5, 6, 1), u))
        b = ImagePlane(np.full((5, 6, 1), v))
        expected = (2 * u * v + p.c1) / (u**2 + v**2 + p.c1)
        np.testing.assert_allclose(ssim_map(a, b, p), expected, rtol=1e-12)

    def test_inverted_image_below_one(self):
        rng = np.random.default_rng(2)
        a = rand_image(rng, 7, 9, c=1, smooth=False)
        b = ImagePlane(1.0 - a.data)
        assert (ssim_map(a, b) < 1.0).all()

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        a = rand_image(rng, 6, 7, c=3, smooth=False)
        b = rand_image(rng, 6, 7, c=3, smooth=False)
        p = SsimParams()
        ref = brute_force_ssim(a.data, b.data, np.ones((6, 7)), p).mean(axis=2)
        np.testing.assert_allclose(ssim_map(a, b, p), ref, rtol=1e-10)

    def test_range(self):
        rng = np.random.default_rng(4)
        a = rand_image(rng, 8, 8, c=1, smooth=False)
        b = rand_image(rng, 8, 8, c=1, smooth=False)
        s = ssim_map(a, b)
        assert s.min() >= -1.0 - 1e-12 and s.max() <= 1.0 + 1e-12

    def test_dim_mismatch(self):
        rng = np.random.default_rng(5)
        with pytest.raises(InvalidArgumentError):
            ssim_map(rand_image(rng, 4, 4), rand_image(rng, 4, 5))


def _warp_setup(seed, h=8, w=10, c=1, direction=TOWARD_LEFT):
    rng = np.random.default_rng(seed)
    source = rand_image(rng, h, w, c=c)
    original = rand_image(rng, h, w, c=c)
    d = rand_disparity(rng, h, w, low=0.4, high=2.5)
    view = LEFT_VIEW if direction == TOWARD_LEFT else RIGHT_VIEW
    mask = blind_mask(d, view)
    return source, original, d, mask, direction


class TestAppearanceLoss:
    def test_perfect_reconstruction_zero(self):
        rng = np.random.default_rng(6)
        img = rand_image(rng, 6, 8, c=3)
        d = DisparityField(np.zeros((6, 8)))
        res = warp_horizontal(img, d, TOWARD_LEFT)
        term = appearance_loss(img, res, BinaryMask.full(6, 8))
        assert term.value == 0.0
        # analytically zero; two box-filter paths cancel only to rounding
        np.testing.assert_allclose(term.grad_dl, 0.0, atol=1e-12)

    def test_gamma_zero_is_masked_l1(self):
        source, original, d, mask, direction = _warp_setup(7)
        res = warp_horizontal(source, d, direction)
        term = appearance_loss(original, res, mask, gamma=0.0)
        m = mask.as_bool()
        expected = np.abs(original.data - res.reconstructed.data).mean(axis=2)[m].mean()
        np.testing.assert_allclose(term.value, expected, rtol=1e-12)

    @pytest.mark.parametrize("gamma", [0.0, 0.5, 0.85, 1.0])
    def test_identity_zero_for_any_mask_and_gamma(self, gamma):
        rng = np.random.default_rng(42)
        img = rand_image(rng, 6, 8, c=3)
        d = DisparityField(np.zeros((6, 8)))
        res = warp_horizontal(img, d, TOWARD_LEFT)
        mask = BinaryMask((rng.random((6, 8)) > 0.4).astype(np.uint8))
        assert appearance_loss(img, res, mask, gamma=gamma).value == 0.0

    def test_empty_mask_warns(self):
        rng = np.random.default_rng(8)
        img = rand_image(rng, 4, 5)
        res = warp_horizontal(img, DisparityField(np.zeros((4, 5))), TOWARD_LEFT)
        term = appearance_loss(img, res, BinaryMask(np.zeros((4, 5), dtype=np.uint8)))
        assert term.value == 0.0
        assert "empty_mask" in term.warnings

    @pytest.mark.parametrize("seed,direction", [(9, TOWARD_LEFT), (10, "toward_right")])
    def test_gradient_matches_fd(self, seed, direction):
        source, original, d, mask, direction = _warp_setup(seed, direction=direction)
        res = warp_horizontal(source, d, direction)
        term = appearance_loss(original, res, mask)
        grad = term.grad_dl if direction == TOWARD_LEFT else term.grad_dr

        sign = -1.0 if direction == TOWARD_LEFT else 1.0
        xs = np.arange(d.width)[None, :] + sign * d.values
        safe = away_from_kinks(xs) & mask.as_bool()

        def value_fn(values):
            r = warp_horizontal(source, DisparityField(values), direction)
            return appearance_loss(original, r, mask).value

        coords = list(zip(*np.nonzero(safe)))[:50]
        assert len(coords) >= 20
        check_gradient_field(value_fn, d.values, grad, coords)

    def test_invariant_to_masked_out_content(self):
        source, original, d, mask, direction = _warp_setup(11)
        res = warp_horizontal(source, d, direction)
        term = appearance_loss(original, res, mask)

        out = ~mask.as_bool()
        rng = np.random.default_rng(12)
        orig2 = original.data.copy()
        orig2[out] = rng.uniform(0, 1, size=(out.sum(), original.channels))
        recon2 = res.reconstructed.data.copy()
        recon2[out] = rng.uniform(0, 1, size=(out.sum(), original.channels))
        res2 = WarpResult(
            reconstructed=ImagePlane(recon2),
            in_bounds=res.in_bounds,
            d_sample_jacobian=res.d_sample_jacobian,
            direction=res.direction,
        )
        term2 = appearance_loss(ImagePlane(orig2), res2, mask)
        assert term2.value == term.value
        np.testing.assert_array_equal(term2.grad_dl, term.grad_dl)


class TestLrConsistency:
    def test_consistent_constant_zero(self):
        h, w = 6, 12
        dl = DisparityField(np.full((h, w), 3.0))
        dr = DisparityField(np.full((h, w), 3.0))
        ml = blind_mask(dl, LEFT_VIEW)
        mr = blind_mask(dr, RIGHT_VIEW)
        term = lr_consistency_loss(dl, dr, ml, mr)
        assert term.value == 0.0

    def test_epsilon_offset(self):
        h, w, c0, eps = 5, 16, 4.0, 0.25
        dl = DisparityField(np.full((h, w), c0))
        dr = DisparityField(np.full((h, w), c0 + eps))
        ml = blind_mask(dl, LEFT_VIEW)
        mr = blind_mask(dr, RIGHT_VIEW)
        term = lr_consistency_loss(dl, dr, ml, mr)
        np.testing.assert_allclose(term.value, eps, rtol=1e-9)

    def test_gradients_match_fd(self):
        rng = np.random.default_rng(13)
        h, w = 8, 10
        dl = rand_disparity(rng, h, w, low=0.4, high=2.4)
        dr = rand_disparity(rng, h, w, low=0.4, high=2.4)
        ml = blind_mask(dl, LEFT_VIEW)
        mr = blind_mask(dr, RIGHT_VIEW)
        term = lr_consistency_loss(dl, dr, ml, mr)

        xs_l = np.arange(w)[None, :] - dl.values
        xs_r = np.arange(w)[None, :] + dr.values
        safe_l = away_from_kinks(xs_l)
        safe_r = away_from_kinks(xs_r)

        def value_of_dl(values):
            return lr_consistency_loss(DisparityField(values), dr, ml, mr).value

        def value_of_dr(values):
            return lr_consistency_loss(dl, DisparityField(values), ml, mr).value

        coords_l = list(zip(*np.nonzero(safe_l)))[:30]
        coords_r = list(zip(*np.nonzero(safe_r)))[:30]
        check_gradient_field(value_of_dl, dl.values, term.grad_dl, coords_l)
        check_gradient_field(value_of_dr, dr.values, term.grad_dr, coords_r)

    def test_one_sided_views_compose(self):
        rng = np.random.default_rng(14)
        h, w = 6, 9
        dl = rand_disparity(rng, h, w)
        dr = rand_disparity(rng, h, w)
        ml = blind_mask(dl, LEFT_VIEW)
        mr = blind_mask(dr, RIGHT_VIEW)
        left = lr_consistency_one_sided(dl, dr, ml, mr, LEFT_VIEW)
        right = lr_consistency_one_sided(dl, dr, ml, mr, RIGHT_VIEW)
        pooled = lr_consistency_loss(dl, dr, ml, mr)
        assert left.value >= 0 and right.value >= 0
        lo, hi = sorted([left.value, right.value])
        assert lo - 1e-12 <= pooled.value <= hi + 1e-12

    def test_invariant_to_masked_out_disparities(self):
        h, w = 6, 10
        rng = np.random.default_rng(15)
        dl_vals = rng.uniform(2.0, 3.0, size=(h, w))
        dr_vals = rng.uniform(2.0, 3.0, size=(h, w))
        dl = DisparityField(dl_vals)
        dr = DisparityField(dr_vals)
        ml = blind_mask(dl, LEFT_VIEW)
        mr = blind_mask(dr, RIGHT_VIEW)
        base = lr_consistency_loss(dl, dr, ml, mr)

        dl2 = dl_vals.copy()
        dl2[~ml.as_bool()] = rng.uniform(0.0, 5.0, size=(~ml.as_bool()).sum())
        dr2 = dr_vals.copy()
        dr2[~mr.as_bool()] = rng.uniform(0.0, 5.0, size=(~mr.as_bool()).sum())
        pert = lr_consistency_loss(DisparityField(dl2), DisparityField(dr2), ml, mr)
        assert pert.value == base.value


class TestSmoothness:
    def test_constant_disparity_zero(self):
        rng = np.random.default_rng(16)
        img = rand_image(rng, 5, 7)
        term = smoothness_loss(DisparityField(np.full((5, 7), 2.0)), img)
        assert term.value == 0.0
        np.testing.assert_array_equal(term.grad_dl, 0.0)

    def test_unit_ramp_flat_image(self):
        h, w = 4, 6
        img = ImagePlane(np.full((h, w, 1), 0.5))
        d = DisparityField(np.tile(np.arange(w, dtype=float), (h, 1)))
        term = smoothness_loss(d, img)
        np.testing.assert_allclose(term.value, 1.0, rtol=1e-12)

    def test_edge_aware_downweighting(self):
        h, w = 4, 8
        step_d = np.zeros((h, w))
        step_d[:, 4:] = 3.0
        flat = ImagePlane(np.full((h, w, 1), 0.5))
        edges = np.full((h, w, 1), 0.2)
        edges[:, 4:] = 0.9
        with_edge = ImagePlane(edges)
        loss_flat = smoothness_loss(DisparityField(step_d), flat).value
        loss_edge = smoothness_loss(DisparityField(step_d), with_edge).value
        assert loss_edge < loss_flat

    def test_gradient_matches_fd(self):
        rng = np.random.default_rng(17)
        h, w = 8, 10
        img = rand_image(rng, h, w)
        d = rand_disparity(rng, h, w)
        term = smoothness_loss(d, img)

        def value_fn(values):
            return smoothness_loss(DisparityField(values), img).value

        coords = [(i, j) for i in range(0, h, 2) for j in range(0, w, 2)]
        check_gradient_field(value_fn, d.values, term.grad_dl, coords)

    @given(st.integers(min_value=0, max_value=10**6))
    @settings(max_examples=25, deadline=None)
    def test_non_negative(self, seed):
        rng = np.random.default_rng(seed)
        img = rand_image(rng, 5, 6)
        d = rand_disparity(rng, 5, 6, low=0.0, high=6.0)
        assert smoothness_loss(d, img).value >= 0.0

    def test_slot_selects_gradient_field(self):
        rng = np.random.default_rng(18)
        img = rand_image(rng, 4, 5)
        d = rand_disparity(rng, 4, 5)
        t_l = smoothness_loss(d, img, slot="dl")
        t_r = smoothness_loss(d, img, slot="dr")
        np.testing.assert_array_equal(t_l.grad_dl, t_r.grad_dr)
        np.testing.assert_array_equal(t_l.grad_dr, 0.0)
