"""File formats: images, config text, checkpoints, field dumps."""

import struct

import numpy as np
import pytest
from PIL import Image

from histocolor import checkpoint, config, net
from histocolor.checkpoint import CheckpointError
from histocolor.histo import BinSpec, build_bins
from histocolor.imageio import ImageFormatError, load_image, save_image


class TestImageRoundTrips:
    def run_round_trip(self, tmp_path, ext, gray=False):
        rng = np.random.default_rng(0)
        img = rng.random((7, 9) if gray else (7, 9, 3))
        path = tmp_path / f"img{ext}"
        save_image(img, path)
        back = load_image(path)
        assert back.shape == img.shape
        assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12
        save_image(back, path)
        again = load_image(path)
        np.testing.assert_array_equal(again, back)  # quantization is stable

    def test_png_color(self, tmp_path):
        self.run_round_trip(tmp_path, ".png")

    def test_png_gray(self, tmp_path):
        self.run_round_trip(tmp_path, ".png", gray=True)

    def test_ppm_color(self, tmp_path):
        self.run_round_trip(tmp_path, ".ppm")

    def test_pgm_gray(self, tmp_path):
        self.run_round_trip(tmp_path, ".pgm", gray=True)

    def test_out_of_range_values_clamped(self, tmp_path):
        path = tmp_path / "c.png"
        save_image(np.array([[[1.7, -0.5, 0.5]]]), path)
        back = load_image(path)
        np.testing.assert_allclose(back[0, 0], [1.0, 0.0, 0.5], atol=1e-2)


class TestNetpbmParsing:
    def test_handwritten_p6(self, tmp_path):
        path = tmp_path / "tiny.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(range(12)))
        img = load_image(path)
        assert img.shape == (2, 2, 3)
        np.testing.assert_allclose(img[0, 0], np.array([0, 1, 2]) / 255)
        np.testing.assert_allclose(img[1, 1], np.array([9, 10, 11]) / 255)

    def test_header_comments_skipped(self, tmp_path):
        path = tmp_path / "c.ppm"
        path.write_bytes(b"P6\n# made by hand\n2 1 # dims\n255\n" + bytes(6))
        assert load_image(path).shape == (1, 2, 3)

    def test_p5_grayscale(self, tmp_path):
        path = tmp_path / "g.pgm"
        path.write_bytes(b"P5\n3 2\n255\n" + bytes([0, 128, 255, 10, 20, 30]))
        img = load_image(path)
        assert img.shape == (2, 3)
        assert img[0, 2] == 1.0

    def test_sixteen_bit_maxval_rejected(self, tmp_path):
        path = tmp_path / "deep.ppm"
        path.write_bytes(b"P6\n2 2\n65535\n" + bytes(24))
        with pytest.raises(ImageFormatError, match="unsupported bit depth"):
            load_image(path)

    def test_truncated_raster(self, tmp_path):
        path = tmp_path / "cut.ppm"
        path.write_bytes(b"P6\n4 4\n255\n" + bytes(10))
        with pytest.raises(ImageFormatError, match="unexpected end of file"):
            load_image(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "cut.ppm"
        path.write_bytes(b"P6\n4")
        with pytest.raises(ImageFormatError, match="unexpected end of file"):
            load_image(path)


class TestPngEdgeCases:
    def test_sixteen_bit_png_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(path)
        with pytest.raises(ImageFormatError, match="unsupported bit depth"):
            load_image(path)

    def test_palette_png_converted(self, tmp_path):
        path = tmp_path / "pal.png"
        rgb = np.zeros((4, 4, 3), dtype=np.uint8)
        rgb[..., 0] = 200
        Image.fromarray(rgb).convert("P", palette=Image.ADAPTIVE).save(path)
        img = load_image(path)
        assert img.shape == (4, 4, 3)
        np.testing.assert_allclose(img[..., 0], 200 / 255, atol=1e-6)

    def test_unrecognized_bytes(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"this is not an image")
        with pytest.raises(ImageFormatError, match="unrecognized"):
            load_image(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageFormatError):
            load_image(tmp_path / "absent.png")


class TestSaveValidation:
    def test_unknown_extension(self, tmp_path):
        with pytest.raises(ImageFormatError, match="unknown output format"):
            save_image(np.zeros((2, 2, 3)), tmp_path / "img.jpg")

    def test_gray_to_ppm_rejected(self, tmp_path):
        with pytest.raises(ImageFormatError, match="PPM holds color"):
            save_image(np.zeros((2, 2)), tmp_path / "img.ppm")

    def test_color_to_pgm_rejected(self, tmp_path):
        with pytest.raises(ImageFormatError, match="PGM holds gray"):
            save_image(np.zeros((2, 2, 3)), tmp_path / "img.pgm")

    def test_bad_shape(self, tmp_path):
        with pytest.raises(ImageFormatError, match="expected"):
            save_image(np.zeros((2, 2, 4)), tmp_path / "img.png")


class TestConfigText:
    def test_canonical_round_trip(self):
        cfg = config.default_config()
        assert config.parse_config(config.canonical_text(cfg)) == cfg

    def test_round_trip_of_modified_config(self):
        cfg = config.PipelineConfig(
            loss="lab_marginal_hist",
            bins=8,
            sigma=12.5,
            layers=((1, 4, 3, 1, 2), (4, 8, 3, 1, 1)),
            taps=("data", "conv2"),
            epochs=3,
            rebalance=False,
        )
        assert config.parse_config(config.canonical_text(cfg)) == cfg

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("bins = 8\nepochs = 2\n")
        cfg = config.load_config(path)
        assert cfg.bins == 8 and cfg.epochs == 2
        assert cfg.loss == "hue_chroma_hist"  # defaults fill the rest

    def test_comments_and_blanks_ignored(self):
        cfg = config.parse_config("# header\n\nbins = 4  # inline\n")
        assert cfg.bins == 4

    def test_unknown_key_reports_line(self):
        with pytest.raises(ValueError, match="line 2"):
            config.parse_config("bins = 4\nbogus = 1\n")

    def test_missing_equals_reports_line(self):
        with pytest.raises(ValueError, match="line 1"):
            config.parse_config("just some words\n")

    def test_bad_boolean(self):
        with pytest.raises(ValueError, match="bad boolean"):
            config.parse_config("rebalance = maybe\n")

    def test_conv_rows(self):
        cfg = config.parse_config("conv1 = 1, 4, 3, 1, 2\nconv2 = 4, 8, 3, 1, 1\n")
        assert cfg.layers == ((1, 4, 3, 1, 2), (4, 8, 3, 1, 1))

    def test_conv_rows_must_be_consecutive(self):
        with pytest.raises(ValueError, match="consecutively"):
            config.parse_config("conv1 = 1, 4, 3, 1, 2\nconv3 = 4, 8, 3, 1, 1\n")

    def test_conv_row_needs_five_fields(self):
        with pytest.raises(ValueError, match="5 fields"):
            config.parse_config("conv1 = 1, 4, 3\n")

    def test_invalid_settings_rejected(self):
        with pytest.raises(ValueError, match="unknown loss"):
            config.PipelineConfig(loss="nope")
        with pytest.raises(ValueError, match="at least 2"):
            config.PipelineConfig(bins=1)
        with pytest.raises(ValueError, match="training"):
            config.PipelineConfig(lr=0.0)

    def test_with_epochs(self):
        cfg = config.default_config()
        assert config.with_epochs(cfg, 3).epochs == 3
        assert config.with_epochs(cfg, None) == cfg


def small_cfg():
    return config.PipelineConfig(
        bins=6,
        layers=((1, 4, 3, 1, 2),),
        taps=("data", "conv1"),
        head_width=8,
    )


class TestCheckpoint:
    def make(self, tmp_path, seed=5):
        cfg = small_cfg()
        model = net.init_model(config.build_net_config(cfg), seed=seed)
        path = tmp_path / "model.ckpt"
        checkpoint.save_checkpoint(model, cfg, path)
        return model, cfg, path

    def test_round_trip(self, tmp_path):
        model, cfg, path = self.make(tmp_path)
        loaded, loaded_cfg = checkpoint.load_checkpoint(path)
        assert loaded_cfg == cfg
        for (name, arr), (name2, arr2) in zip(
            model.parameters(), loaded.parameters()
        ):
            assert name == name2
            np.testing.assert_array_equal(
                arr2, np.asarray(arr, dtype="<f4").astype(np.float64)
            )

    def test_round_trip_preserves_predictions(self, tmp_path):
        model, cfg, path = self.make(tmp_path)
        loaded, _ = checkpoint.load_checkpoint(path)
        gray = np.random.default_rng(6).random((10, 10))
        a = net.predict_field(model, gray)
        b = net.predict_field(loaded, gray)
        for name in a.channels:
            np.testing.assert_allclose(a.channels[name], b.channels[name], atol=1e-6)

    def test_bad_magic(self, tmp_path):
        _, _, path = self.make(tmp_path)
        data = bytearray(path.read_bytes())
        data[0] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="bad magic"):
            checkpoint.load_checkpoint(path)

    def test_bad_version(self, tmp_path):
        _, _, path = self.make(tmp_path)
        data = bytearray(path.read_bytes())
        data[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="version 99"):
            checkpoint.load_checkpoint(path)

    def test_truncated(self, tmp_path):
        _, _, path = self.make(tmp_path)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(CheckpointError, match="unexpected end of file"):
            checkpoint.load_checkpoint(path)

    def test_shape_mismatch(self, tmp_path):
        """Corrupt the first stored dimension so it disagrees with the config."""
        _, _, path = self.make(tmp_path)
        data = bytearray(path.read_bytes())
        pos = 8
        cfg_len = struct.unpack_from("<I", data, pos)[0]
        pos += 4 + cfg_len + 4  # config text, parameter count
        name_len = struct.unpack_from("<H", data, pos)[0]
        pos += 2 + name_len  # first parameter name
        pos += 1  # rank
        dim = struct.unpack_from("<I", data, pos)[0]
        struct.pack_into("<I", data, pos, dim + 1)
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="has shape"):
            checkpoint.load_checkpoint(path)


class TestFieldDump:
    def make_field(self, k=8, h=5, w=4, seed=7):
        rng = np.random.default_rng(seed)
        field = net.HistogramField(
            {
                "hue": rng.dirichlet(np.ones(k), size=(h, w)),
                "chroma": rng.dirichlet(np.ones(k), size=(h, w)),
            }
        )
        tables = {
            "hue": build_bins(BinSpec("uniform_circular", k)),
            "chroma": build_bins(BinSpec("uniform_linear", k)),
        }
        return field, tables

    def test_round_trip(self, tmp_path):
        field, tables = self.make_field()
        path = tmp_path / "pred.field"
        checkpoint.save_field(field, tables, path)
        loaded, loaded_tables = checkpoint.load_field(path)
        assert set(loaded.channels) == {"hue", "chroma"}
        for name in field.channels:
            np.testing.assert_allclose(
                loaded.channels[name], field.channels[name], atol=1e-6
            )
            assert loaded_tables[name].spec == tables[name].spec
        loaded.validate(tol=1e-9)  # rows renormalized on load

    def test_bad_magic(self, tmp_path):
        field, tables = self.make_field()
        path = tmp_path / "pred.field"
        checkpoint.save_field(field, tables, path)
        data = bytearray(path.read_bytes())
        data[:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="not a field dump"):
            checkpoint.load_field(path)

    def test_zeroed_rows_rejected(self, tmp_path):
        field, tables = self.make_field(k=4, h=2, w=2)
        path = tmp_path / "pred.field"
        checkpoint.save_field(field, tables, path)
        data = bytearray(path.read_bytes())
        n = 2 * 2 * 4 * 4  # one channel's raster in bytes
        data[-n:] = bytes(n)
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="invalid rows"):
            checkpoint.load_field(path)

    def test_truncated(self, tmp_path):
        field, tables = self.make_field()
        path = tmp_path / "pred.field"
        checkpoint.save_field(field, tables, path)
        data = path.read_bytes()
        path.write_bytes(data[:-10])
        with pytest.raises(CheckpointError, match="unexpected end of file"):
            checkpoint.load_field(path)
