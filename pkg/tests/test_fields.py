import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from m3d.errors import InvalidArgumentError
from m3d.fields import (
    BinaryMask,
    CameraRig,
    DepthMap,
    DisparityField,
    ImagePlane,
    depth_to_disparity,
    disparity_to_depth,
    make_meshgrid,
)

from conftest import make_rig


class TestMeshgrid:
    def test_2x3(self):
        g = make_meshgrid(2, 3)
        np.testing.assert_array_equal(g.x_coords, [[0, 1, 2], [0, 1, 2]])
        np.testing.assert_array_equal(g.y_coords, [[0, 0, 0], [1, 1, 1]])

    def test_singleton(self):
        g = make_meshgrid(1, 1)
        assert g.x_coords[0, 0] == 0 and g.y_coords[0, 0] == 0

    def test_spot_values(self):
        g = make_meshgrid(4, 5)
        assert g.x_coords[2, 3] == 3
        assert g.y_coords[2, 3] == 2

    @pytest.mark.parametrize("h,w", [(0, 3), (3, 0), (-1, 2)])
    def test_invalid_dims(self, h, w):
        with pytest.raises(InvalidArgumentError):
            make_meshgrid(h, w)

    def test_deterministic(self):
        a = make_meshgrid(7, 9)
        b = make_meshgrid(7, 9)
        np.testing.assert_array_equal(a.x_coords, b.x_coords)
        np.testing.assert_array_equal(a.y_coords, b.y_coords)


class TestDisparityDepth:
    def test_formula(self):
        rig = make_rig(height=4, width=5, focal=100.0, baseline=4.2)
        d = DisparityField(np.full((4, 5), 10.0))
        depth = disparity_to_depth(d, rig)
        assert depth.valid.all()
        np.testing.assert_allclose(depth.values, 42.0)

    def test_identity_case(self):
        rig = CameraRig(focal=1.0, cx=0.0, cy=0.0, baseline=1.0, height=1, width=1)
        depth = disparity_to_depth(DisparityField(np.array([[1.0]])), rig)
        assert depth.values[0, 0] == 1.0

    def test_zero_disparity_invalid_not_infinite(self):
        rig = make_rig(height=2, width=2)
        d = DisparityField(np.array([[10.0, 0.0], [5.0, 10.0]]))
        depth = disparity_to_depth(d, rig)
        assert not depth.valid[0, 1]
        assert np.isfinite(depth.values).all()

    def test_inverse_formula(self):
        rig = make_rig(height=3, width=3, focal=100.0, baseline=4.2)
        depth = DepthMap(np.full((3, 3), 42.0), np.ones((3, 3), bool))
        d = depth_to_disparity(depth, rig)
        np.testing.assert_allclose(d.values, 10.0)

    def test_invalid_depth_maps_to_zero_flagged(self):
        rig = make_rig(height=2, width=2)
        valid = np.array([[True, False], [True, True]])
        depth = DepthMap(np.full((2, 2), 20.0), valid)
        d = depth_to_disparity(depth, rig)
        assert d.values[0, 1] == 0.0
        assert not disparity_to_depth(d, rig).valid[0, 1]

    def test_dim_mismatch(self):
        rig = make_rig(height=4, width=5)
        with pytest.raises(InvalidArgumentError):
            disparity_to_depth(DisparityField(np.ones((3, 5))), rig)

    @given(
        arrays(
            np.float64,
            (6, 7),
            elements=st.floats(min_value=0.01, max_value=200.0),
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_round_trip(self, values):
        rig = make_rig(height=6, width=7)
        d = DisparityField(values)
        back = depth_to_disparity(disparity_to_depth(d, rig), rig)
        np.testing.assert_allclose(back.values, values, rtol=1e-12)

    @given(st.floats(min_value=1e-3, max_value=100.0), st.floats(min_value=1e-3, max_value=100.0))
    @settings(max_examples=50, deadline=None)
    def test_monotone_decreasing(self, d1, d2):
        rig = make_rig(height=1, width=1)
        z1 = disparity_to_depth(DisparityField(np.array([[d1]])), rig).values[0, 0]
        z2 = disparity_to_depth(DisparityField(np.array([[d2]])), rig).values[0, 0]
        if d1 > d2:
            assert z1 < z2
        elif d1 < d2:
            assert z1 > z2


class TestValidation:
    def test_image_range(self):
        with pytest.raises(InvalidArgumentError):
            ImagePlane(np.full((2, 2, 1), 1.5))

    def test_image_channels(self):
        with pytest.raises(InvalidArgumentError):
            ImagePlane(np.zeros((2, 2, 2)))

    def test_image_grayscale_promotion(self):
        img = ImagePlane(np.zeros((2, 3)))
        assert img.channels == 1

    def test_negative_disparity(self):
        with pytest.raises(InvalidArgumentError):
            DisparityField(np.array([[-0.1]]))

    def test_disparity_ceiling(self):
        with pytest.raises(InvalidArgumentError):
            DisparityField(np.array([[5.0]]), d_max=4.0)

    def test_mask_values(self):
        with pytest.raises(InvalidArgumentError):
            BinaryMask(np.array([[0, 2]]))

    def test_rig_invariants(self):
        with pytest.raises(InvalidArgumentError):
            CameraRig(focal=-1.0, cx=0, cy=0, baseline=1.0, height=2, width=2)
        with pytest.raises(InvalidArgumentError):
            CameraRig(focal=1.0, cx=10.0, cy=0, baseline=1.0, height=2, width=2)

    def test_fields_immutable(self):
        d = DisparityField(np.ones((2, 2)))
        with pytest.raises(ValueError):
            d.values[0, 0] = 3.0
