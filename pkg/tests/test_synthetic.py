import numpy as np
import pytest

from m3d.errors import InvalidArgumentError
from m3d.fields import CameraRig
from m3d.photometric import lr_consistency_loss, lr_consistency_one_sided
from m3d.synthetic import (
    OccluderSpec,
    SurfaceSpec,
    SyntheticScene,
    TextureSpec,
    occluded_left_columns,
    synth_scene,
)
from m3d.warping import LEFT_VIEW, RIGHT_VIEW, TOWARD_LEFT, blind_mask, warp_horizontal


def scene_rig(h=32, w=48):
    return CameraRig(
        focal=100.0, cx=(w - 1) / 2, cy=(h - 1) / 2, baseline=4.2, height=h, width=w
    )


def lr_of(sample):
    ml = blind_mask(sample.disp_l, LEFT_VIEW)
    mr = blind_mask(sample.disp_r, RIGHT_VIEW)
    return lr_consistency_loss(sample.disp_l, sample.disp_r, ml, mr).value


class TestSurfaces:
    def test_plane_disparity_from_depth(self):
        rig = scene_rig()
        s = synth_scene(
            SyntheticScene(SurfaceSpec(kind="plane", depth=42.0), TextureSpec(), rig), 0
        )
        np.testing.assert_allclose(s.disp_l.values, 10.0)
        np.testing.assert_allclose(s.disp_r.values, 10.0)
        np.testing.assert_allclose(s.depth_l.values, 42.0)

    def test_slant_disparity_linear_in_x(self):
        rig = scene_rig()
        s = synth_scene(
            SyntheticScene(SurfaceSpec(kind="slant", depth=42.0, tilt=0.08), TextureSpec(), rig), 0
        )
        steps = np.diff(s.disp_l.values, axis=1)
        np.testing.assert_allclose(steps, 0.08, atol=1e-10)
        # analytic projection of the equivalent 3D plane Z = gamma/(1 - alpha*x_n):
        # d(x) = (b*f/gamma)*(1 - alpha*(x - cx)/f) is linear with d(cx) = b*f/gamma
        d_center = rig.baseline * rig.focal / 42.0
        xs = np.arange(rig.width) - rig.cx
        np.testing.assert_allclose(s.disp_l.values[0], d_center + 0.08 * xs, rtol=1e-12)

    def test_sine_relief_bounds(self):
        rig = scene_rig()
        spec = SurfaceSpec(kind="sine", depth=42.0, amp=1.5, fx=1 / 16, fy=1 / 24)
        s = synth_scene(SyntheticScene(spec, TextureSpec(), rig), 0)
        assert s.disp_l.values.min() > 8.0 and s.disp_l.values.max() < 12.0

    def test_negative_depth_rejected(self):
        with pytest.raises(InvalidArgumentError):
            SurfaceSpec(kind="plane", depth=-1.0)


class TestConsistency:
    @pytest.mark.parametrize(
        "spec",
        [
            SurfaceSpec(kind="plane", depth=42.0),
            SurfaceSpec(kind="plane", depth=40.0),  # non-integer disparity 10.5
            SurfaceSpec(kind="slant", depth=42.0, tilt=0.06),
        ],
    )
    def test_linear_surfaces_lr_exact(self, spec):
        s = synth_scene(SyntheticScene(spec, TextureSpec(), scene_rig()), 1)
        assert lr_of(s) < 1e-12

    def test_sine_right_identity_exact_left_second_order(self):
        rig = scene_rig(h=48, w=64)
        spec = SurfaceSpec(kind="sine", depth=42.0, amp=1.5, fx=1 / 24, fy=1 / 40)
        s = synth_scene(SyntheticScene(spec, TextureSpec(), rig), 2)
        ml = blind_mask(s.disp_l, LEFT_VIEW)
        mr = blind_mask(s.disp_r, RIGHT_VIEW)
        right = lr_consistency_one_sided(s.disp_l, s.disp_r, ml, mr, RIGHT_VIEW)
        left = lr_consistency_one_sided(s.disp_l, s.disp_r, ml, mr, LEFT_VIEW)
        assert right.value < 1e-12
        assert left.value < 0.5 * spec.amp * (2 * np.pi * spec.fx) ** 2  # curvature bound

    def test_integer_plane_reconstruction_exact(self):
        rig = scene_rig()
        s = synth_scene(
            SyntheticScene(SurfaceSpec(kind="plane", depth=42.0), TextureSpec(), rig), 3
        )
        ml = blind_mask(s.disp_l, LEFT_VIEW)
        warp = warp_horizontal(s.right, s.disp_l, TOWARD_LEFT)
        err = np.abs(warp.reconstructed.data - s.left.data).max(axis=2)
        assert err[ml.as_bool()].max() == 0.0


class TestDeterminismAndTexture:
    def test_same_seed_identical(self):
        rig = scene_rig()
        scene = SyntheticScene(SurfaceSpec(kind="slant", depth=42.0), TextureSpec(), rig)
        a = synth_scene(scene, 7)
        b = synth_scene(scene, 7)
        np.testing.assert_array_equal(a.left.data, b.left.data)
        np.testing.assert_array_equal(a.right.data, b.right.data)

    def test_different_seed_differs(self):
        rig = scene_rig()
        scene = SyntheticScene(SurfaceSpec(kind="plane", depth=42.0), TextureSpec(), rig)
        assert not np.array_equal(synth_scene(scene, 1).left.data, synth_scene(scene, 2).left.data)

    def test_contrast_bounds_respected(self):
        rig = scene_rig()
        spec = TextureSpec(contrast=(0.2, 0.8), channels=3)
        s = synth_scene(SyntheticScene(SurfaceSpec(kind="plane", depth=42.0), spec, rig), 5)
        assert s.left.data.min() >= 0.2 - 1e-9
        assert s.left.data.max() <= 0.8 + 1e-9
        assert s.left.channels == 3


class TestOccluder:
    def make_occluded(self):
        rig = scene_rig(h=24, w=64)
        # integer disparities: background 10 px (Z=42), band 16 px (Z=26.25)
        return SyntheticScene(
            SurfaceSpec(kind="plane", depth=42.0),
            TextureSpec(),
            rig,
            occluder=OccluderSpec(x0=30, x1=44, depth=rig.baseline * rig.focal / 16.0),
        )

    def test_band_disparities(self):
        s = synth_scene(self.make_occluded(), 0)
        assert s.disp_l.values[0, 35] == 16.0
        assert s.disp_l.values[0, 10] == 10.0
        assert s.disp_r.values[0, 20] == 16.0  # band covers right cols [14, 28)

    def test_visibility_matches_analytic_prediction(self):
        scene = self.make_occluded()
        s = synth_scene(scene, 0)
        warp = warp_horizontal(s.right, s.disp_l, TOWARD_LEFT)
        err = np.abs(warp.reconstructed.data - s.left.data).max(axis=2)
        # border invisibility is the blind mask's job; the occluder oracle
        # predicts the extra mid-image occlusion exactly
        inside = blind_mask(s.disp_l, LEFT_VIEW).as_bool()
        mismatch = (err > 1e-12) & inside
        predicted = occluded_left_columns(scene)
        # occluded band: left cols [x0-(d_occ-d_bg), x0) = [24, 30)
        assert sorted(set(np.nonzero(predicted)[1])) == [24, 25, 26, 27, 28, 29]
        np.testing.assert_array_equal(mismatch, predicted)

    def test_occluder_must_be_closer(self):
        rig = scene_rig()
        with pytest.raises(InvalidArgumentError):
            synth_scene(
                SyntheticScene(
                    SurfaceSpec(kind="plane", depth=42.0),
                    TextureSpec(),
                    rig,
                    occluder=OccluderSpec(x0=10, x1=20, depth=100.0),
                ),
                0,
            )
