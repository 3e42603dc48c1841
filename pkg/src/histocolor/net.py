"""Small fully-convolutional network with hypercolumn descriptors.

The network is a sequential stack of SAME-padded conv layers, each followed
by a rectifier and an optional non-overlapping mean-pool downsample.  A
per-pixel descriptor (hypercolumn) is assembled by bilinearly sampling a
chosen subset of layer outputs (taps) at one image location and
concatenating the slices; a small fully connected head maps descriptors to
per-channel output distributions.

Training is spatially sparse: a handful of pixel locations are sampled per
image, hypercolumns are gathered only there, and each location's gradient
is scattered back to the four surrounding cells of every tap with its
bilinear weights (the exact adjoint of the gather).  All arithmetic is
float64 and runs deterministically for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import histo


@dataclass(frozen=True)
class ConvSpec:
    """One conv layer: SAME zero padding, rectifier, optional mean-pool."""

    name: str
    in_channels: int
    out_channels: int
    kernel: int = 3
    stride: int = 1
    downsample: int = 1

    def __post_init__(self):
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ValueError("kernel size must be odd")
        if self.stride < 1 or self.downsample < 1:
            raise ValueError("stride and downsample factors must be >= 1")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")


@dataclass(frozen=True)
class HeadSpec:
    """One prediction head over the shared hidden layer."""

    name: str
    size: int
    activation: str = "softmax"  # "linear" for regression heads

    def __post_init__(self):
        if self.activation not in ("softmax", "linear"):
            raise ValueError(f"unknown head activation {self.activation!r}")
        if self.size < 1:
            raise ValueError("head size must be positive")


@dataclass(frozen=True)
class NetConfig:
    layers: tuple[ConvSpec, ...]
    taps: tuple[str, ...]
    head_width: int
    heads: tuple[HeadSpec, ...]
    samples_per_image: int = 128

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        if not self.taps:
            raise ValueError("at least one hypercolumn tap is required")
        cin = 1
        for spec in self.layers:
            if spec.in_channels != cin:
                raise ValueError(
                    f"layer {spec.name}: expects {spec.in_channels} input "
                    f"channels but receives {cin}"
                )
            cin = spec.out_channels
        names = {"data"} | {spec.name for spec in self.layers}
        if len(names) != len(self.layers) + 1:
            raise ValueError("duplicate layer names")
        for tap in self.taps:
            if tap not in names:
                raise ValueError(f"unknown tap {tap!r}")
        if self.head_width < 1:
            raise ValueError("head width must be positive")
        if not self.heads:
            raise ValueError("at least one prediction head is required")

    def tap_channels(self, tap: str) -> int:
        if tap == "data":
            return 1
        for spec in self.layers:
            if spec.name == tap:
                return spec.out_channels
        raise ValueError(f"unknown tap {tap!r}")

    def descriptor_length(self) -> int:
        return sum(self.tap_channels(t) for t in self.taps)

    def receptive_field(self) -> int:
        rf, scale = 1, 1
        for spec in self.layers:
            rf += (spec.kernel - 1) * scale
            scale *= spec.stride
            rf += (spec.downsample - 1) * scale
            scale *= spec.downsample
        return rf

    def tap_geometry(self) -> dict[str, tuple[float, float]]:
        """Affine map from tap grid index to image coordinate.

        Cell j of a tap sits at image coordinate scale * j + offset (pixel
        centers at integer coordinates).
        """
        geo = {"data": (1.0, 0.0)}
        scale, offset = 1.0, 0.0
        for spec in self.layers:
            step = float(spec.stride * spec.downsample)
            offset = offset + scale * spec.stride * (spec.downsample - 1) / 2.0
            scale = scale * step
            geo[spec.name] = (scale, offset)
        return geo


def default_config() -> NetConfig:
    """Desk-scale default: 4 conv layers spanning three grid resolutions."""
    return NetConfig(
        layers=(
            ConvSpec("conv1", 1, 16, 3, 1, 2),
            ConvSpec("conv2", 16, 32, 3, 1, 2),
            ConvSpec("conv3", 32, 64, 3, 1, 2),
            ConvSpec("conv4", 64, 64, 3, 1, 1),
        ),
        taps=("data", "conv1", "conv2", "conv3", "conv4"),
        head_width=64,
        heads=(HeadSpec("hue", 32), HeadSpec("chroma", 32)),
    )


@dataclass
class Model:
    """Network parameters.  Mutated in place by training and rebalancing."""

    config: NetConfig
    conv_w: dict[str, np.ndarray]
    conv_b: dict[str, np.ndarray]
    hidden_w: np.ndarray
    hidden_b: np.ndarray
    head_w: dict[str, np.ndarray]
    head_b: dict[str, np.ndarray]
    rng_seed: int = 0

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """All parameters as (name, array) pairs in declaration order."""
        out = []
        for spec in self.config.layers:
            out.append((f"{spec.name}.w", self.conv_w[spec.name]))
            out.append((f"{spec.name}.b", self.conv_b[spec.name]))
        out.append(("hidden.w", self.hidden_w))
        out.append(("hidden.b", self.hidden_b))
        for head in self.config.heads:
            out.append((f"head.{head.name}.w", self.head_w[head.name]))
            out.append((f"head.{head.name}.b", self.head_b[head.name]))
        return out

    def copy(self) -> "Model":
        return Model(
            config=self.config,
            conv_w={k: v.copy() for k, v in self.conv_w.items()},
            conv_b={k: v.copy() for k, v in self.conv_b.items()},
            hidden_w=self.hidden_w.copy(),
            hidden_b=self.hidden_b.copy(),
            head_w={k: v.copy() for k, v in self.head_w.items()},
            head_b={k: v.copy() for k, v in self.head_b.items()},
            rng_seed=self.rng_seed,
        )


def _xavier(rng, shape, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_model(cfg: NetConfig, seed: int) -> Model:
    """Xavier-uniform weights, zero biases, deterministic for a seed."""
    rng = np.random.default_rng(seed)
    conv_w, conv_b = {}, {}
    for spec in cfg.layers:
        k = spec.kernel
        fan_in = k * k * spec.in_channels
        fan_out = k * k * spec.out_channels
        conv_w[spec.name] = _xavier(
            rng, (k, k, spec.in_channels, spec.out_channels), fan_in, fan_out
        )
        conv_b[spec.name] = np.zeros(spec.out_channels)
    d = cfg.descriptor_length()
    hidden_w = _xavier(rng, (d, cfg.head_width), d, cfg.head_width)
    hidden_b = np.zeros(cfg.head_width)
    head_w, head_b = {}, {}
    for head in cfg.heads:
        head_w[head.name] = _xavier(
            rng, (cfg.head_width, head.size), cfg.head_width, head.size
        )
        head_b[head.name] = np.zeros(head.size)
    return Model(cfg, conv_w, conv_b, hidden_w, hidden_b, head_w, head_b, seed)


# --- conv stack primitives ---------------------------------------------


def _conv_forward(x, w, b, stride):
    kh, kw, cin, cout = w.shape
    h, wid = x.shape[:2]
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    hout = -(-h // stride)
    wout = -(-wid // stride)
    xp = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
    out = np.broadcast_to(b, (hout, wout, cout)).copy()
    for dy in range(kh):
        for dx in range(kw):
            patch = xp[dy : dy + stride * hout : stride, dx : dx + stride * wout : stride]
            out += patch @ w[dy, dx]
    return out


def _conv_backward(dout, x, w, stride):
    kh, kw, cin, cout = w.shape
    h, wid = x.shape[:2]
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    hout, wout = dout.shape[:2]
    xp = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    flat_dout = dout.reshape(-1, cout)
    for dy in range(kh):
        for dx in range(kw):
            rows = slice(dy, dy + stride * hout, stride)
            cols = slice(dx, dx + stride * wout, stride)
            dw[dy, dx] = xp[rows, cols].reshape(-1, cin).T @ flat_dout
            dxp[rows, cols] += dout @ w[dy, dx].T
    db = dout.sum(axis=(0, 1))
    return dxp[ph : ph + h, pw : pw + wid], dw, db


def _pool_forward(x, f):
    h, w = x.shape[:2]
    ridx = np.arange(0, h, f)
    cidx = np.arange(0, w, f)
    sums = np.add.reduceat(np.add.reduceat(x, ridx, axis=0), cidx, axis=1)
    rcount = np.minimum(ridx + f, h) - ridx
    ccount = np.minimum(cidx + f, w) - cidx
    counts = rcount[:, None] * ccount[None, :]
    return sums / counts[..., None]


def _pool_backward(dout, h, w, f):
    ridx = np.arange(0, h, f)
    cidx = np.arange(0, w, f)
    rcount = np.minimum(ridx + f, h) - ridx
    ccount = np.minimum(cidx + f, w) - cidx
    counts = rcount[:, None] * ccount[None, :]
    scaled = dout / counts[..., None]
    return np.repeat(np.repeat(scaled, rcount, axis=0), ccount, axis=1)


def _forward_stack(model: Model, gray: np.ndarray):
    """Run the conv stack; returns tap maps plus per-layer caches."""
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise ValueError("expected a 2-d grayscale image")
    x = gray[..., None]
    caches = []
    maps = {"data": x}
    for spec in model.config.layers:
        if x.shape[0] < spec.kernel or x.shape[1] < spec.kernel:
            raise ValueError(
                f"image too small: layer {spec.name} needs at least "
                f"{spec.kernel} cells, input map is {x.shape[0]}x{x.shape[1]}"
            )
        pre = _conv_forward(x, model.conv_w[spec.name], model.conv_b[spec.name], spec.stride)
        act = np.maximum(pre, 0.0)
        out = _pool_forward(act, spec.downsample) if spec.downsample > 1 else act
        caches.append((x, pre, act.shape))
        maps[spec.name] = out
        x = out
    return maps, caches


def forward_features(model: Model, gray: np.ndarray) -> dict[str, np.ndarray]:
    """Feature maps for every configured tap, at native resolutions."""
    maps, _ = _forward_stack(model, gray)
    return {t: maps[t] for t in model.config.taps}


def _backward_stack(model: Model, caches, tap_grads: dict[str, np.ndarray]):
    """Backpropagate tap-map gradients through the conv stack."""
    layers = model.config.layers
    grads_w = {}
    grads_b = {}
    d_out = None
    for i in range(len(layers) - 1, -1, -1):
        spec = layers[i]
        x, pre, act_shape = caches[i]
        g = tap_grads.get(spec.name)
        if d_out is None:
            d_out = g if g is not None else np.zeros(_out_shape(act_shape, spec))
        elif g is not None:
            d_out = d_out + g
        if spec.downsample > 1:
            d_act = _pool_backward(d_out, act_shape[0], act_shape[1], spec.downsample)
        else:
            d_act = d_out
        d_pre = d_act * (pre > 0)
        d_out, grads_w[spec.name], grads_b[spec.name] = _conv_backward(
            d_pre, x, model.conv_w[spec.name], spec.stride
        )
    return grads_w, grads_b


def _out_shape(act_shape, spec):
    h, w, c = act_shape
    if spec.downsample > 1:
        h = -(-h // spec.downsample)
        w = -(-w // spec.downsample)
    return (h, w, c)


# --- hypercolumn gather / scatter --------------------------------------


def _bilinear_indices(n_cells: int, grid_coords: np.ndarray):
    g0 = np.floor(grid_coords).astype(np.int64)
    frac = grid_coords - g0
    i0 = np.clip(g0, 0, n_cells - 1)
    i1 = np.clip(g0 + 1, 0, n_cells - 1)
    return i0, i1, frac


def _bilinear_weights(fx, fy):
    """The four cell weights; the last is the residual so they sum to
    exactly 1.0 in floating point."""
    w00 = (1 - fy) * (1 - fx)
    w01 = (1 - fy) * fx
    w10 = fy * (1 - fx)
    w11 = 1.0 - (w00 + w01 + w10)
    return w00, w01, w10, w11


def _gather_batch(features, geometry, taps, xs, ys):
    """Bilinearly sample every tap at (xs, ys); returns (N, D) descriptors."""
    parts = []
    for tap in taps:
        fmap = features[tap]
        scale, offset = geometry[tap]
        gx = (xs - offset) / scale
        gy = (ys - offset) / scale
        x0, x1, fx = _bilinear_indices(fmap.shape[1], gx)
        y0, y1, fy = _bilinear_indices(fmap.shape[0], gy)
        w00, w01, w10, w11 = _bilinear_weights(fx, fy)
        parts.append(
            w00[:, None] * fmap[y0, x0]
            + w01[:, None] * fmap[y0, x1]
            + w10[:, None] * fmap[y1, x0]
            + w11[:, None] * fmap[y1, x1]
        )
    return np.concatenate(parts, axis=1)


def _scatter_batch(ddesc, features, geometry, taps, xs, ys):
    """Adjoint of :func:`_gather_batch`: descriptor gradients to tap maps."""
    tap_grads = {}
    col = 0
    for tap in taps:
        fmap = features[tap]
        c = fmap.shape[2]
        g = ddesc[:, col : col + c]
        col += c
        scale, offset = geometry[tap]
        gx = (xs - offset) / scale
        gy = (ys - offset) / scale
        x0, x1, fx = _bilinear_indices(fmap.shape[1], gx)
        y0, y1, fy = _bilinear_indices(fmap.shape[0], gy)
        w00, w01, w10, w11 = _bilinear_weights(fx, fy)
        grad = np.zeros_like(fmap)
        np.add.at(grad, (y0, x0), w00[:, None] * g)
        np.add.at(grad, (y0, x1), w01[:, None] * g)
        np.add.at(grad, (y1, x0), w10[:, None] * g)
        np.add.at(grad, (y1, x1), w11[:, None] * g)
        tap_grads[tap] = grad
    return tap_grads


def gather_hypercolumn(
    features: dict[str, np.ndarray],
    location: tuple[float, float],
    taps,
    geometry,
    image_shape: tuple[int, int],
) -> np.ndarray:
    """Hypercolumn descriptor at one continuous (x, y) image location.

    Each tap is sampled with edge-clamped bilinear interpolation of the four
    cells surrounding the location mapped onto that tap's grid; slices are
    concatenated in tap order.
    """
    x, y = location
    h, w = image_shape
    if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
        raise ValueError(f"location {(x, y)} outside image bounds {w}x{h}")
    return _gather_batch(
        features, geometry, taps, np.array([float(x)]), np.array([float(y)])
    )[0]


# --- heads --------------------------------------------------------------


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _heads_forward(model: Model, desc: np.ndarray):
    pre = desc @ model.hidden_w + model.hidden_b
    hid = np.maximum(pre, 0.0)
    outs = {}
    for head in model.config.heads:
        z = hid @ model.head_w[head.name] + model.head_b[head.name]
        outs[head.name] = _softmax(z) if head.activation == "softmax" else z
    return outs, (desc, pre, hid)


def _heads_backward(model: Model, cache, out_grads):
    desc, pre, hid = cache
    d_hid = np.zeros_like(hid)
    g_head_w, g_head_b = {}, {}
    for head in model.config.heads:
        dz = out_grads[head.name]
        g_head_w[head.name] = hid.T @ dz
        g_head_b[head.name] = dz.sum(axis=0)
        d_hid += dz @ model.head_w[head.name].T
    d_pre = d_hid * (pre > 0)
    g_hidden_w = desc.T @ d_pre
    g_hidden_b = d_pre.sum(axis=0)
    d_desc = d_pre @ model.hidden_w.T
    return d_desc, g_hidden_w, g_hidden_b, g_head_w, g_head_b


def head_predict(model: Model, descriptor: np.ndarray) -> dict[str, np.ndarray]:
    """Per-head output for one descriptor: rectified hidden layer, then a
    softmax (or identity, for regression heads) per head."""
    descriptor = np.asarray(descriptor, dtype=np.float64)
    if descriptor.shape != (model.config.descriptor_length(),):
        raise ValueError(
            f"descriptor length {descriptor.shape} does not match model "
            f"({model.config.descriptor_length()})"
        )
    outs, _ = _heads_forward(model, descriptor[None, :])
    return {k: v[0] for k, v in outs.items()}


# --- training -----------------------------------------------------------


class TrainingError(RuntimeError):
    pass


def batch_gradients(model: Model, batch, loss_cfg, tables, seed: int):
    """Batch loss and full parameter gradients, without updating the model.

    Pixel locations are drawn uniformly per image from a generator seeded
    with ``seed``, hypercolumns are gathered at those locations, and the
    configured loss is averaged over every sample in the batch.  Raises
    :class:`TrainingError` naming the offending image and sample when any
    per-sample loss is non-finite.
    """
    cfg = model.config
    rng = np.random.default_rng(seed)
    geometry = cfg.tap_geometry()
    n = cfg.samples_per_image
    total = len(batch) * n
    acc = _zero_grads(model)
    loss_sum = 0.0
    for img_i, (gray, rgb) in enumerate(batch):
        gray = np.asarray(gray, dtype=np.float64)
        h, w = gray.shape
        maps, caches = _forward_stack(model, gray)
        rows = rng.integers(0, h, size=n)
        cols = rng.integers(0, w, size=n)
        xs = cols.astype(np.float64)
        ys = rows.astype(np.float64)
        feats = {t: maps[t] for t in cfg.taps}
        desc = _gather_batch(feats, geometry, cfg.taps, xs, ys)
        outs, hcache = _heads_forward(model, desc)
        targets = histo.build_targets(rgb, rows, cols, loss_cfg, tables)
        losses, out_grads = histo.batch_loss_and_grads(outs, targets, loss_cfg)
        bad = ~np.isfinite(losses)
        if np.any(bad):
            j = int(np.argmax(bad))
            raise TrainingError(
                f"non-finite loss for image {img_i}, sample {j} "
                f"at pixel (row {rows[j]}, col {cols[j]})"
            )
        loss_sum += float(losses.sum())
        scaled = {k: v / total for k, v in out_grads.items()}
        d_desc, g_hw, g_hb, g_head_w, g_head_b = _heads_backward(model, hcache, scaled)
        acc["hidden_w"] += g_hw
        acc["hidden_b"] += g_hb
        for name in g_head_w:
            acc["head_w"][name] += g_head_w[name]
            acc["head_b"][name] += g_head_b[name]
        tap_grads = _scatter_batch(d_desc, feats, geometry, cfg.taps, xs, ys)
        g_conv_w, g_conv_b = _backward_stack(model, caches, tap_grads)
        for name in g_conv_w:
            acc["conv_w"][name] += g_conv_w[name]
            acc["conv_b"][name] += g_conv_b[name]
    return loss_sum / total, acc


def train_step(
    model: Model,
    batch,
    loss_cfg: histo.LossConfig,
    tables: dict,
    lr: float,
    seed: int,
) -> tuple[Model, float]:
    """One vanilla SGD step on a batch of (gray, rgb) image pairs.

    Gradients come from :func:`batch_gradients`; the update is applied in
    place.  Returns the model and the pre-update batch loss.  Deterministic
    for a fixed seed.
    """
    if lr < 0:
        raise ValueError("learning rate must be nonnegative")
    loss, acc = batch_gradients(model, batch, loss_cfg, tables, seed)
    for name in model.conv_w:
        model.conv_w[name] -= lr * acc["conv_w"][name]
        model.conv_b[name] -= lr * acc["conv_b"][name]
    model.hidden_w -= lr * acc["hidden_w"]
    model.hidden_b -= lr * acc["hidden_b"]
    for name in model.head_w:
        model.head_w[name] -= lr * acc["head_w"][name]
        model.head_b[name] -= lr * acc["head_b"][name]
    return model, loss


def _zero_grads(model: Model):
    return {
        "conv_w": {k: np.zeros_like(v) for k, v in model.conv_w.items()},
        "conv_b": {k: np.zeros_like(v) for k, v in model.conv_b.items()},
        "hidden_w": np.zeros_like(model.hidden_w),
        "hidden_b": np.zeros_like(model.hidden_b),
        "head_w": {k: np.zeros_like(v) for k, v in model.head_w.items()},
        "head_b": {k: np.zeros_like(v) for k, v in model.head_b.items()},
    }


# --- rebalancing --------------------------------------------------------


def compute_tap_moments(model: Model, images) -> dict[str, float]:
    """Mean squared activation per tap over a collection of images."""
    sums = {t: 0.0 for t in model.config.taps}
    counts = {t: 0 for t in model.config.taps}
    for gray in images:
        feats = forward_features(model, gray)
        for t, fmap in feats.items():
            sums[t] += float(np.sum(fmap**2))
            counts[t] += fmap.size
    return {t: sums[t] / counts[t] for t in model.config.taps}


def rebalance(model: Model, stats: dict[str, float]) -> Model:
    """Rescale layers toward unit second moment without changing outputs.

    For each conv layer with measured moment v, its weights and bias are
    scaled by m = 1/sqrt(v) and every consumer of its output (the next conv
    layer, and the hidden-layer slice reading its tap) is scaled by 1/m.
    Positive homogeneity of the rectifier and linearity of mean-pooling
    keep the end-to-end function unchanged.  Stats for the raw "data" tap
    are accepted but ignored: the input has no producing layer to fold the
    factor into.
    """
    layer_names = [spec.name for spec in model.config.layers]
    for name, v in stats.items():
        if name != "data" and name not in layer_names:
            raise ValueError(f"unknown layer {name!r} in rebalance stats")
        if not np.isfinite(v) or v <= 0:
            raise ValueError(f"nonpositive second moment for {name!r}")

    slices = _tap_slices(model.config)
    for i, name in enumerate(layer_names):
        if name not in stats:
            continue
        m = 1.0 / np.sqrt(stats[name])
        model.conv_w[name] *= m
        model.conv_b[name] *= m
        if i + 1 < len(layer_names):
            model.conv_w[layer_names[i + 1]] *= 1.0 / m
        if name in model.config.taps:
            lo, hi = slices[name]
            model.hidden_w[lo:hi, :] *= 1.0 / m
    return model


def _tap_slices(cfg: NetConfig) -> dict[str, tuple[int, int]]:
    slices = {}
    col = 0
    for tap in cfg.taps:
        c = cfg.tap_channels(tap)
        slices[tap] = (col, col + c)
        col += c
    return slices


# --- dense prediction ---------------------------------------------------


@dataclass
class HistogramField:
    """Dense per-pixel distributions over color bins, one map per channel."""

    channels: dict[str, np.ndarray]  # name -> (H, W, K)

    @property
    def height(self) -> int:
        return next(iter(self.channels.values())).shape[0]

    @property
    def width(self) -> int:
        return next(iter(self.channels.values())).shape[1]

    def validate(self, tol: float = 1e-6) -> None:
        shape = None
        for name, arr in self.channels.items():
            if arr.ndim != 3:
                raise ValueError(f"channel {name!r} is not a (H, W, K) map")
            if shape is None:
                shape = arr.shape[:2]
            elif arr.shape[:2] != shape:
                raise ValueError("channel maps disagree on image size")
            if np.any(arr < 0):
                raise ValueError(f"channel {name!r} has negative mass")
            if np.any(np.abs(arr.sum(axis=-1) - 1.0) > tol):
                raise ValueError(f"channel {name!r} distributions do not sum to 1")

    def map_distributions(self, fn) -> "HistogramField":
        return HistogramField({k: fn(v) for k, v in self.channels.items()})


def _dense_heads(model: Model, gray: np.ndarray):
    gray = np.asarray(gray, dtype=np.float64)
    h, w = gray.shape
    maps, _ = _forward_stack(model, gray)
    feats = {t: maps[t] for t in model.config.taps}
    geometry = model.config.tap_geometry()
    ys, xs = np.mgrid[0:h, 0:w]
    desc = _gather_batch(
        feats, geometry, model.config.taps,
        xs.ravel().astype(np.float64), ys.ravel().astype(np.float64),
    )
    outs, _ = _heads_forward(model, desc)
    return {k: v.reshape(h, w, -1) for k, v in outs.items()}


def predict_field(model: Model, gray: np.ndarray) -> HistogramField:
    """Per-pixel output distributions for a whole image.

    One dense forward pass of the conv stack, then a hypercolumn gather and
    head evaluation at every pixel.  All heads must be softmax heads.
    """
    for head in model.config.heads:
        if head.activation != "softmax":
            raise ValueError(
                "predict_field needs softmax heads; use predict_values for "
                "regression output"
            )
    return HistogramField(_dense_heads(model, gray))


def predict_values(model: Model, gray: np.ndarray) -> dict[str, np.ndarray]:
    """Dense raw head outputs (regression heads); name -> (H, W, size)."""
    return _dense_heads(model, gray)
