import numpy as np
import pytest
from PIL import Image

from semsurf import imagio
from semsurf.errors import InputError


def write_pgm_p5(path, data):
    with open(path, "wb") as fh:
        fh.write(f"P5\n{data.shape[1]} {data.shape[0]}\n255\n".encode())
        fh.write(data.astype(np.uint8).tobytes())


class TestLoadImage:
    def test_p5_scales_by_255(self, tmp_path):
        p = tmp_path / "a.pgm"
        write_pgm_p5(p, np.array([[0, 255], [128, 64]], dtype=np.uint8))
        img = imagio.load_image(p)
        expected = np.array([[0, 255], [128, 64]]) / 255.0
        np.testing.assert_array_equal(img.pixels, expected)

    def test_p2_ascii_with_comment(self, tmp_path):
        p = tmp_path / "a.pgm"
        p.write_text("P2\n# comment\n2 2\n255\n0 255\n128 64\n")
        img = imagio.load_image(p)
        np.testing.assert_array_equal(
            img.pixels, np.array([[0, 255], [128, 64]]) / 255.0
        )

    def test_rgb_png_luma(self, tmp_path):
        p = tmp_path / "red.png"
        Image.fromarray(
            np.full((3, 3, 3), [255, 0, 0], dtype=np.uint8), "RGB"
        ).save(p)
        img = imagio.load_image(p)
        np.testing.assert_allclose(img.pixels, 0.299, atol=1e-12)

    def test_16bit_png_rejected(self, tmp_path):
        p = tmp_path / "deep.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(p)
        with pytest.raises(InputError, match="unsupported bit depth"):
            imagio.load_image(p)

    def test_16bit_pgm_rejected(self, tmp_path):
        p = tmp_path / "deep.pgm"
        p.write_bytes(b"P5\n2 2\n65535\n" + b"\x00" * 8)
        with pytest.raises(InputError, match="unsupported bit depth"):
            imagio.load_image(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError, match="missing file"):
            imagio.load_image(tmp_path / "nope.pgm")

    def test_zero_dimension(self, tmp_path):
        p = tmp_path / "zero.pgm"
        p.write_bytes(b"P5\n0 2\n255\n")
        with pytest.raises(InputError, match="zero-dimension"):
            imagio.load_image(p)

    def test_roundtrip_8bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.integers(0, 256, (16, 24), dtype=np.uint8)
        p = tmp_path / "rt.pgm"
        write_pgm_p5(p, data)
        img = imagio.load_image(p)
        np.testing.assert_array_equal(np.round(img.pixels * 255).astype(np.uint8), data)

    def test_metadata_carried(self, tmp_path):
        p = tmp_path / "m.pgm"
        write_pgm_p5(p, np.zeros((4, 4), dtype=np.uint8))
        img = imagio.load_image(p, frame_index=3, timestamp_min=240.0, cycles=1500000, um_per_px=0.05)
        assert (img.frame_index, img.timestamp_min, img.cycles, img.um_per_px) == (
            3, 240.0, 1500000, 0.05,
        )


class TestFrameValidation:
    def test_intensity_range_enforced(self):
        with pytest.raises(InputError, match=r"\[0, 1\]"):
            imagio.ImageFrame(pixels=np.array([[0.0, 1.5]]))

    def test_um_per_px_positive(self):
        with pytest.raises(InputError, match="um_per_px"):
            imagio.ImageFrame(pixels=np.zeros((2, 2)), um_per_px=0.0)

    def test_sequence_orders_and_checks(self):
        frames = [
            imagio.ImageFrame(pixels=np.zeros((2, 2)), frame_index=i, timestamp_min=10.0 * i)
            for i in range(3)
        ]
        seq = imagio.FrameSequence(frames=tuple(frames))
        assert len(seq) == 3
        with pytest.raises(InputError, match="strictly increasing"):
            imagio.FrameSequence(frames=(frames[0], frames[0]))
        mixed = imagio.ImageFrame(pixels=np.zeros((2, 2)), frame_index=5, um_per_px=2.0)
        with pytest.raises(InputError, match="um_per_px"):
            imagio.FrameSequence(frames=(frames[0], mixed))


class TestManifest:
    def _write(self, tmp_path, entries, um_per_px=0.05):
        import json

        for e in entries:
            write_pgm_p5(tmp_path / e["path"], np.zeros((4, 4), dtype=np.uint8))
        doc = {"um_per_px": um_per_px, "frames": entries}
        p = tmp_path / "frames.json"
        p.write_text(json.dumps(doc))
        return p

    def test_fifteen_frames_paper_spacing(self, tmp_path):
        entries = [
            {"index": i, "path": f"f{i}.pgm", "timestamp_min": 80.0 * i, "cycles": 500000 * i}
            for i in range(15)
        ]
        seq = imagio.load_manifest(self._write(tmp_path, entries))
        assert len(seq) == 15
        assert seq.frames[1].timestamp_min - seq.frames[0].timestamp_min == 80.0
        assert seq.frames[1].cycles - seq.frames[0].cycles == 500000

    def test_empty_sequence(self, tmp_path):
        p = tmp_path / "frames.json"
        p.write_text('{"um_per_px": 0.05, "frames": []}')
        with pytest.raises(InputError, match="empty sequence"):
            imagio.load_manifest(p)

    def test_duplicate_frame_index(self, tmp_path):
        entries = [
            {"index": 0, "path": "f0.pgm", "timestamp_min": 0.0, "cycles": 0},
            {"index": 0, "path": "f1.pgm", "timestamp_min": 1.0, "cycles": 1},
        ]
        with pytest.raises(InputError, match="duplicate frame_index"):
            imagio.load_manifest(self._write(tmp_path, entries))

    def test_non_monotone_timestamps(self, tmp_path):
        entries = [
            {"index": 0, "path": "f0.pgm", "timestamp_min": 10.0, "cycles": 0},
            {"index": 1, "path": "f1.pgm", "timestamp_min": 5.0, "cycles": 1},
        ]
        with pytest.raises(InputError, match="timestamp"):
            imagio.load_manifest(self._write(tmp_path, entries))


class TestPyramid:
    def test_dimension_halving(self):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 1, (64, 64))
        pyr = imagio.gaussian_pyramid(img, 3)
        assert [p.shape for p in pyr] == [(64, 64), (32, 32), (16, 16)]

    def test_constant_stays_constant(self):
        pyr = imagio.gaussian_pyramid(np.full((32, 32), 0.5), 2)
        np.testing.assert_array_equal(pyr[1], np.full((16, 16), 0.5))

    def test_too_small(self):
        with pytest.raises(InputError, match="too small"):
            imagio.gaussian_pyramid(np.zeros((4, 4)), 4)

    def test_total_pixels_bounded(self):
        img = np.zeros((128, 96))
        pyr = imagio.gaussian_pyramid(img, 6)
        total = sum(p.size for p in pyr)
        assert total <= img.size * 4 / 3

    def test_odd_dimensions_floor(self):
        pyr = imagio.gaussian_pyramid(np.zeros((33, 65)), 2)
        assert pyr[1].shape == (16, 32)


class TestGradients:
    def test_constant_zero(self):
        ix, iy = imagio.image_gradients(np.full((8, 8), 0.3))
        np.testing.assert_array_equal(ix, 0.0)
        np.testing.assert_array_equal(iy, 0.0)

    def test_x_ramp_unit_scaling(self):
        # analytic ramp: I = 0.01 * x  ->  interior Ix = 0.01 exactly
        xx = np.tile(np.arange(12, dtype=float) * 0.01, (10, 1))
        ix, iy = imagio.image_gradients(xx)
        np.testing.assert_allclose(ix[1:-1, 1:-1], 0.01, atol=1e-14)
        np.testing.assert_allclose(iy, 0.0, atol=1e-14)

    def test_y_ramp(self):
        yy = np.tile((np.arange(10, dtype=float) * 0.02)[:, None], (1, 12))
        ix, iy = imagio.image_gradients(yy)
        np.testing.assert_allclose(iy[1:-1, 1:-1], 0.02, atol=1e-14)
        np.testing.assert_allclose(ix, 0.0, atol=1e-14)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        a, b = 1.7, -0.6
        I, J = rng.uniform(0, 1, (9, 9)), rng.uniform(0, 1, (9, 9))
        gx1, gy1 = imagio.image_gradients(a * I + b * J)
        ix_i, iy_i = imagio.image_gradients(I)
        ix_j, iy_j = imagio.image_gradients(J)
        np.testing.assert_allclose(gx1, a * ix_i + b * ix_j, atol=1e-12)
        np.testing.assert_allclose(gy1, a * iy_i + b * iy_j, atol=1e-12)

    def test_too_small(self):
        with pytest.raises(InputError, match="3x3"):
            imagio.image_gradients(np.zeros((2, 5)))
