"""Network forward/backward, hypercolumn sampling, training, rebalancing."""

import numpy as np
import pytest

from histocolor.histo import BinSpec, LossConfig, build_bins
from histocolor.net import (
    ConvSpec,
    HeadSpec,
    HistogramField,
    Model,
    NetConfig,
    TrainingError,
    batch_gradients,
    compute_tap_moments,
    default_config,
    forward_features,
    gather_hypercolumn,
    head_predict,
    init_model,
    predict_field,
    rebalance,
    train_step,
)


def tiny_config(heads=None, taps=("data", "conv1"), head_width=6):
    """One 3x3 conv layer 1 -> 4 at full resolution."""
    if heads is None:
        heads = (HeadSpec("h", 5),)
    return NetConfig(
        layers=(ConvSpec("conv1", 1, 4),),
        taps=taps,
        head_width=head_width,
        heads=heads,
        samples_per_image=16,
    )


def small_tables(k=5):
    return {
        "hue": build_bins(BinSpec("uniform_circular", k)),
        "chroma": build_bins(BinSpec("uniform_linear", k)),
    }


def naive_conv(x, w, b, stride):
    """Reference zero-padded correlation, one output pixel at a time."""
    kh, kw, cin, cout = w.shape
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    h, wd = x.shape[:2]
    hout, wout = -(-h // stride), -(-wd // stride)
    xp = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
    out = np.zeros((hout, wout, cout))
    for oy in range(hout):
        for ox in range(wout):
            patch = xp[oy * stride : oy * stride + kh, ox * stride : ox * stride + kw]
            out[oy, ox] = np.tensordot(patch, w, axes=3) + b
    return out


def naive_pool(x, f):
    """Reference ceil-mode mean pooling with partial edge windows."""
    h, w = x.shape[:2]
    hout, wout = -(-h // f), -(-w // f)
    out = np.zeros((hout, wout, x.shape[2]))
    for oy in range(hout):
        for ox in range(wout):
            out[oy, ox] = x[oy * f : (oy + 1) * f, ox * f : (ox + 1) * f].mean((0, 1))
    return out


class TestNetConfig:
    def test_default_geometry(self):
        cfg = default_config()
        assert cfg.descriptor_length() == 177
        assert cfg.receptive_field() == 38
        assert cfg.tap_geometry() == {
            "data": (1.0, 0.0),
            "conv1": (2.0, 0.5),
            "conv2": (4.0, 1.5),
            "conv3": (8.0, 3.5),
            "conv4": (8.0, 3.5),
        }

    def test_tap_channels(self):
        cfg = default_config()
        assert cfg.tap_channels("data") == 1
        assert cfg.tap_channels("conv2") == 32

    def test_invalid_configs(self):
        with pytest.raises(ValueError):
            ConvSpec("conv1", 1, 4, kernel=2)
        with pytest.raises(ValueError):
            NetConfig(
                layers=(ConvSpec("conv1", 1, 4),),
                taps=(),
                head_width=4,
                heads=(HeadSpec("h", 3),),
            )
        with pytest.raises(ValueError):
            NetConfig(
                layers=(ConvSpec("conv1", 1, 4),),
                taps=("conv9",),
                head_width=4,
                heads=(HeadSpec("h", 3),),
            )


class TestInitModel:
    def test_deterministic(self):
        a = init_model(default_config(), seed=3)
        b = init_model(default_config(), seed=3)
        for (n1, p1), (n2, p2) in zip(a.parameters(), b.parameters()):
            assert n1 == n2
            np.testing.assert_array_equal(p1, p2)

    def test_seed_changes_weights(self):
        a = init_model(tiny_config(), seed=0)
        b = init_model(tiny_config(), seed=1)
        assert not np.array_equal(a.conv_w["conv1"], b.conv_w["conv1"])

    def test_parameter_count(self):
        cfg = NetConfig(
            layers=(ConvSpec("conv1", 1, 8),),
            taps=("conv1",),
            head_width=4,
            heads=(HeadSpec("h", 5),),
        )
        model = init_model(cfg, seed=0)
        counts = {name: arr.size for name, arr in model.parameters()}
        assert counts["conv1.w"] + counts["conv1.b"] == 8 * 9 + 8
        assert counts["hidden.w"] == 8 * 4 and counts["hidden.b"] == 4
        assert counts["head.h.w"] == 4 * 5 and counts["head.h.b"] == 5

    def test_biases_zero_and_weights_bounded(self):
        model = init_model(default_config(), seed=5)
        for spec in model.config.layers:
            assert np.all(model.conv_b[spec.name] == 0.0)
            fan_in = spec.kernel**2 * spec.in_channels
            fan_out = spec.kernel**2 * spec.out_channels
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            assert np.abs(model.conv_w[spec.name]).max() <= bound
        assert np.all(model.hidden_b == 0.0)


class TestForward:
    def test_identity_kernel(self):
        cfg = NetConfig(
            layers=(ConvSpec("conv1", 1, 1, kernel=1),),
            taps=("conv1",),
            head_width=2,
            heads=(HeadSpec("h", 2),),
        )
        model = init_model(cfg, seed=0)
        model.conv_w["conv1"][:] = 1.0
        model.conv_b["conv1"][:] = 0.0
        gray = np.random.default_rng(0).random((6, 7))
        out = forward_features(model, gray)["conv1"]
        np.testing.assert_allclose(out[..., 0], gray)

    def test_zero_weights_give_rectified_bias(self):
        cfg = tiny_config(taps=("conv1",))
        model = init_model(cfg, seed=0)
        model.conv_w["conv1"][:] = 0.0
        model.conv_b["conv1"][:] = [0.3, -0.2, 0.0, 1.5]
        out = forward_features(model, np.ones((5, 5)))["conv1"]
        np.testing.assert_allclose(out[2, 2], [0.3, 0.0, 0.0, 1.5])

    def test_matches_naive_convolution(self):
        cfg = tiny_config(taps=("conv1",))
        model = init_model(cfg, seed=1)
        rng = np.random.default_rng(2)
        gray = rng.random((9, 11))
        out = forward_features(model, gray)["conv1"]
        ref = naive_conv(gray[..., None], model.conv_w["conv1"], model.conv_b["conv1"], 1)
        np.testing.assert_allclose(out, np.maximum(ref, 0.0), atol=1e-12)

    def test_strided_convolution(self):
        cfg = NetConfig(
            layers=(ConvSpec("conv1", 1, 3, kernel=3, stride=2),),
            taps=("conv1",),
            head_width=4,
            heads=(HeadSpec("h", 2),),
        )
        model = init_model(cfg, seed=4)
        gray = np.random.default_rng(5).random((9, 7))
        out = forward_features(model, gray)["conv1"]
        ref = naive_conv(gray[..., None], model.conv_w["conv1"], model.conv_b["conv1"], 2)
        assert out.shape == (5, 4, 3)
        np.testing.assert_allclose(out, np.maximum(ref, 0.0), atol=1e-12)

    def test_mean_pool_partial_windows(self):
        cfg = NetConfig(
            layers=(ConvSpec("conv1", 1, 1, kernel=1, downsample=2),),
            taps=("conv1",),
            head_width=2,
            heads=(HeadSpec("h", 2),),
        )
        model = init_model(cfg, seed=0)
        model.conv_w["conv1"][:] = 1.0
        model.conv_b["conv1"][:] = 0.0
        gray = np.random.default_rng(6).random((5, 5))
        out = forward_features(model, gray)["conv1"]
        np.testing.assert_allclose(out, naive_pool(gray[..., None], 2), atol=1e-12)

    def test_default_map_shapes(self):
        model = init_model(default_config(), seed=0)
        feats = forward_features(model, np.zeros((32, 32)))
        assert feats["data"].shape == (32, 32, 1)
        assert feats["conv1"].shape == (16, 16, 16)
        assert feats["conv2"].shape == (8, 8, 32)
        assert feats["conv3"].shape == (4, 4, 64)
        assert feats["conv4"].shape == (4, 4, 64)

    def test_undersized_image_rejected(self):
        model = init_model(default_config(), seed=0)
        with pytest.raises(ValueError, match="too small"):
            forward_features(model, np.zeros((16, 16)))
        forward_features(model, np.zeros((20, 20)))  # smallest beyond each kernel


class TestGatherHypercolumn:
    def setup_method(self):
        self.cfg = tiny_config()
        self.model = init_model(self.cfg, seed=7)
        self.gray = np.random.default_rng(8).random((8, 8))
        self.feats = forward_features(self.model, self.gray)
        self.geometry = self.cfg.tap_geometry()

    def gather(self, x, y):
        return gather_hypercolumn(
            self.feats, (x, y), self.cfg.taps, self.geometry, self.gray.shape
        )

    def test_grid_point_is_exact_cell(self):
        desc = self.gather(3.0, 5.0)
        np.testing.assert_array_equal(desc[0], self.feats["data"][5, 3, 0])
        np.testing.assert_array_equal(desc[1:], self.feats["conv1"][5, 3])

    def test_cell_center_is_mean_of_four(self):
        desc = self.gather(3.5, 5.5)
        four = self.feats["data"][5:7, 3:5, 0]
        assert np.isclose(desc[0], four.mean())

    def test_fractional_offset_weights(self):
        desc = self.gather(3.25, 5.0)
        expect = 0.75 * self.feats["data"][5, 3, 0] + 0.25 * self.feats["data"][5, 4, 0]
        assert np.isclose(desc[0], expect)

    def test_partition_of_unity(self):
        ones = {t: np.ones_like(f) for t, f in self.feats.items()}
        rng = np.random.default_rng(9)
        for _ in range(100):
            x = rng.uniform(0, 7)
            y = rng.uniform(0, 7)
            desc = gather_hypercolumn(
                ones, (x, y), self.cfg.taps, self.geometry, self.gray.shape
            )
            assert np.all(desc == 1.0)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError):
            self.gather(-0.5, 2.0)
        with pytest.raises(ValueError):
            self.gather(2.0, 7.5)


class TestHeadPredict:
    def setup_method(self):
        self.model = init_model(tiny_config(), seed=10)
        self.d = self.model.config.descriptor_length()

    def test_uniform_logits_give_uniform(self):
        self.model.head_w["h"][:] = 0.0
        self.model.head_b["h"][:] = 0.0
        out = head_predict(self.model, np.random.default_rng(0).random(self.d))
        np.testing.assert_allclose(out["h"], 0.2)

    def test_two_bin_softmax(self):
        cfg = tiny_config(heads=(HeadSpec("h", 2),))
        model = init_model(cfg, seed=0)
        model.hidden_w[:] = 0.0
        model.hidden_b[:] = 1.0  # hidden activations all 1
        model.head_w["h"][:] = 0.0
        model.head_b["h"][:] = [0.0, np.log(3.0)]
        out = head_predict(model, np.zeros(cfg.descriptor_length()))
        np.testing.assert_allclose(out["h"], [0.25, 0.75], atol=1e-12)

    def test_logit_shift_invariance(self):
        model = init_model(tiny_config(), seed=11)
        desc = np.random.default_rng(1).random(self.d)
        base = head_predict(model, desc)["h"]
        model.head_b["h"] += 7.3
        np.testing.assert_allclose(head_predict(model, desc)["h"], base, atol=1e-9)

    def test_normalized(self):
        out = head_predict(self.model, np.random.default_rng(2).random(self.d))
        assert np.isclose(out["h"].sum(), 1.0)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            head_predict(self.model, np.zeros(self.d + 1))


class TestTrainStep:
    def setup_method(self):
        self.cfg = tiny_config(heads=(HeadSpec("hue", 5), HeadSpec("chroma", 5)))
        self.tables = small_tables(5)
        self.loss_cfg = LossConfig("hue_chroma_hist")
        rng = np.random.default_rng(12)
        rgb = rng.random((8, 8, 3))
        self.batch = [(rgb.mean(axis=-1), rgb)]

    def test_zero_learning_rate_is_noop(self):
        model = init_model(self.cfg, seed=0)
        before = [p.copy() for _, p in model.parameters()]
        model, loss = train_step(model, self.batch, self.loss_cfg, self.tables, 0.0, 3)
        assert np.isfinite(loss) and loss > 0
        for (_, p), q in zip(model.parameters(), before):
            np.testing.assert_array_equal(p, q)

    def test_negative_learning_rate_rejected(self):
        model = init_model(self.cfg, seed=0)
        with pytest.raises(ValueError):
            train_step(model, self.batch, self.loss_cfg, self.tables, -0.1, 3)

    def test_deterministic(self):
        runs = []
        for _ in range(2):
            model = init_model(self.cfg, seed=0)
            for step in range(3):
                model, _ = train_step(
                    model, self.batch, self.loss_cfg, self.tables, 0.05, 100 + step
                )
            runs.append([p.copy() for _, p in model.parameters()])
        for p, q in zip(*runs):
            np.testing.assert_array_equal(p, q)

    def test_overfit_single_batch(self):
        """Repeated steps on one fixed batch drive the smoothed loss down."""
        model = init_model(self.cfg, seed=1)
        losses = []
        for step in range(200):
            model, loss = train_step(
                model, self.batch, self.loss_cfg, self.tables, 0.1, 50 + step
            )
            losses.append(loss)
        first = np.mean(losses[:20])
        last = np.mean(losses[-20:])
        assert last < first

    def test_non_finite_loss_names_sample(self):
        model = init_model(self.cfg, seed=0)
        model.hidden_w[:] = np.nan
        with pytest.raises(TrainingError, match="image 0"):
            batch_gradients(model, self.batch, self.loss_cfg, self.tables, 3)


class TestRebalance:
    def test_scaling_factor(self):
        model = init_model(tiny_config(taps=("conv1",)), seed=0)
        w = model.conv_w["conv1"].copy()
        hw = model.hidden_w.copy()
        rebalance(model, {"conv1": 4.0})
        np.testing.assert_allclose(model.conv_w["conv1"], 0.5 * w)
        np.testing.assert_allclose(model.hidden_w, 2.0 * hw)

    def test_unit_moments_change_nothing(self):
        model = init_model(default_config(), seed=1)
        before = [p.copy() for _, p in model.parameters()]
        rebalance(model, {t: 1.0 for t in model.config.taps if t != "data"})
        for (_, p), q in zip(model.parameters(), before):
            np.testing.assert_array_equal(p, q)

    def test_data_tap_accepted_and_ignored(self):
        model = init_model(default_config(), seed=2)
        before = [p.copy() for _, p in model.parameters()]
        rebalance(model, {"data": 0.09})
        for (_, p), q in zip(model.parameters(), before):
            np.testing.assert_array_equal(p, q)

    def test_function_invariance(self):
        """Measured-moment rescaling leaves every head output unchanged."""
        rng = np.random.default_rng(13)
        for trial in range(3):
            model = init_model(default_config(), seed=20 + trial)
            images = [rng.random((24, 24)) for _ in range(3)]
            before = [predict_field(model, img).channels for img in images]
            rebalance(model, compute_tap_moments(model, images))
            for img, ref in zip(images, before):
                after = predict_field(model, img).channels
                for name in ref:
                    np.testing.assert_allclose(after[name], ref[name], atol=1e-5)

    def test_invalid_stats_rejected(self):
        model = init_model(default_config(), seed=0)
        with pytest.raises(ValueError):
            rebalance(model, {"conv1": 0.0})
        with pytest.raises(ValueError):
            rebalance(model, {"not_a_layer": 1.0})


class TestPredictField:
    def test_shape_and_normalization(self, trained):
        gray = np.random.default_rng(14).random((20, 24))
        field = predict_field(trained["model"], gray)
        assert field.height == 20 and field.width == 24
        field.validate(tol=1e-6)

    def test_matches_pointwise_prediction(self):
        cfg = tiny_config(heads=(HeadSpec("hue", 5), HeadSpec("chroma", 5)))
        model = init_model(cfg, seed=15)
        gray = np.random.default_rng(16).random((8, 8))
        field = predict_field(model, gray)
        feats = forward_features(model, gray)
        geometry = cfg.tap_geometry()
        for y, x in [(0, 0), (3, 5), (7, 7)]:
            desc = gather_hypercolumn(feats, (x, y), cfg.taps, geometry, gray.shape)
            point = head_predict(model, desc)
            for name in point:
                np.testing.assert_allclose(field.channels[name][y, x], point[name])

    def test_constant_image_constant_interior(self):
        """Interior pixels (full receptive field inside the image) agree."""
        model = init_model(default_config(), seed=17)
        field = predict_field(model, np.full((64, 64), 0.5))
        hue = field.channels["hue"][20:36, 20:36]
        assert np.abs(hue - hue[0, 0]).max() < 1e-9

    def test_field_validation_catches_bad_rows(self):
        bad = HistogramField({"hue": np.full((2, 2, 4), 0.3)})
        with pytest.raises(ValueError):
            bad.validate()
