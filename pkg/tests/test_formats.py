import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from m3d.errors import InvalidArgumentError
from m3d.formats import (
    read_csv,
    read_flat_config,
    read_pfm,
    read_ply,
    read_png,
    write_csv,
    write_flat_config,
    write_pfm,
    write_ply,
    write_png,
)


class TestPfm:
    def test_grayscale_roundtrip(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.standard_normal((7, 9)).astype(np.float32)
        write_pfm(tmp_path / "x.pfm", data)
        np.testing.assert_array_equal(read_pfm(tmp_path / "x.pfm"), data)

    def test_color_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        data = rng.standard_normal((5, 4, 3)).astype(np.float32)
        write_pfm(tmp_path / "x.pfm", data)
        np.testing.assert_array_equal(read_pfm(tmp_path / "x.pfm"), data)

    @given(
        arrays(
            np.float32,
            (3, 4),
            elements=st.floats(allow_nan=False, allow_infinity=False, width=32),
        )
    )
    @settings(max_examples=40, deadline=None)
    def test_lossless_for_finite_float32(self, data):
        import tempfile, os

        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "x.pfm")
            write_pfm(path, data)
            np.testing.assert_array_equal(read_pfm(path), data)

    def test_infinity_roundtrip(self, tmp_path):
        data = np.array([[1.0, np.inf], [2.0, 3.0]], dtype=np.float32)
        write_pfm(tmp_path / "x.pfm", data)
        out = read_pfm(tmp_path / "x.pfm")
        assert np.isinf(out[0, 1]) and out[0, 0] == 1.0

    def test_rejects_bad_file(self, tmp_path):
        (tmp_path / "bad.pfm").write_bytes(b"nope\n")
        with pytest.raises(InvalidArgumentError):
            read_pfm(tmp_path / "bad.pfm")


class TestPng:
    def test_8bit_quantized_roundtrip(self, tmp_path):
        rng = np.random.default_rng(2)
        data = np.round(rng.uniform(0, 1, size=(6, 8)) * 255) / 255.0
        write_png(tmp_path / "x.png", data)
        np.testing.assert_allclose(read_png(tmp_path / "x.png"), data, atol=1e-12)

    def test_16bit_scaled(self, tmp_path):
        depth_mm = np.array([[100.5, 2000.0], [0.0, 65535.0]])
        write_png(tmp_path / "d.png", depth_mm, bit_depth=16, scale=1.0)
        out = read_png(tmp_path / "d.png")
        np.testing.assert_array_equal(out, np.round(depth_mm))


class TestPly:
    def test_roundtrip_float64_exact(self, tmp_path):
        rng = np.random.default_rng(3)
        pts = rng.standard_normal((50, 3))
        write_ply(tmp_path / "c.ply", pts)
        np.testing.assert_array_equal(read_ply(tmp_path / "c.ply"), pts)

    def test_empty_cloud(self, tmp_path):
        write_ply(tmp_path / "e.ply", np.zeros((0, 3)))
        assert read_ply(tmp_path / "e.ply").shape == (0, 3)


class TestCsv:
    def test_roundtrip(self, tmp_path):
        rows = [[1, 0.5, "abc"], [2, float(np.pi), "d"]]
        write_csv(tmp_path / "t.csv", ["a", "b", "c"], rows)
        header, out = read_csv(tmp_path / "t.csv")
        assert header == ["a", "b", "c"]
        assert float(out[1][1]) == float(np.pi)


class TestFlatConfig:
    def test_roundtrip_sorted(self, tmp_path):
        write_flat_config(tmp_path / "c.txt", {"b": 2, "a": "x"})
        text = (tmp_path / "c.txt").read_text()
        assert text == "a = x\nb = 2\n"
        assert read_flat_config(tmp_path / "c.txt") == {"a": "x", "b": "2"}

    def test_unknown_key_rejected(self, tmp_path):
        (tmp_path / "c.txt").write_text("gamma = 0.85\ngama = 0.8\n")
        with pytest.raises(InvalidArgumentError):
            read_flat_config(tmp_path / "c.txt", known_keys={"gamma"})

    def test_comments_and_blanks(self, tmp_path):
        (tmp_path / "c.txt").write_text("# comment\n\nkey = value\n")
        assert read_flat_config(tmp_path / "c.txt") == {"key": "value"}
