"""Pipeline configuration: flat key=value files and canonical text.

One PipelineConfig fixes everything a training or inference run needs
besides the data and the seed: the loss variant and its binning, the conv
stack, the hypercolumn taps, and the optimizer settings.  The canonical
serialization is embedded verbatim in checkpoints so a model file is
self-describing; parse(canonical_text(cfg)) reproduces cfg exactly.

Grammar: one `key = value` per line; blank lines and `#` comments are
skipped; unknown keys are errors.  Conv layers are consecutive keys
conv1, conv2, ... with value "in_channels, out_channels, kernel, stride,
downsample".
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import histo, net

_VALID_LOSSES = histo.VARIANTS


@dataclass(frozen=True)
class PipelineConfig:
    loss: str = "hue_chroma_hist"
    bins: int = 32
    joint_bins: int = 16
    sigma: float = 25.0
    lambda_h: float = 5.0
    region_size: int = 1
    layers: tuple = (
        (1, 16, 3, 1, 2),
        (16, 32, 3, 1, 2),
        (32, 64, 3, 1, 2),
        (64, 64, 3, 1, 1),
    )
    taps: tuple = ("data", "conv1", "conv2", "conv3", "conv4")
    head_width: int = 64
    samples_per_image: int = 128
    lr: float = 0.01
    batch_size: int = 8
    epochs: int = 10
    rebalance: bool = True

    def __post_init__(self):
        if self.loss not in _VALID_LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.bins < 2 or self.joint_bins < 2:
            raise ValueError("bin counts must be at least 2")
        if self.lr <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("bad training settings")
        if not self.layers:
            raise ValueError("at least one conv layer required")


def default_config() -> PipelineConfig:
    return PipelineConfig()


_SCALAR_KEYS = {
    "loss": str,
    "bins": int,
    "joint_bins": int,
    "sigma": float,
    "lambda_h": float,
    "region_size": int,
    "head_width": int,
    "samples_per_image": int,
    "lr": float,
    "batch_size": int,
    "epochs": int,
    "rebalance": None,  # parsed as a flag
}


def _parse_bool(text: str, key: str) -> bool:
    if text.lower() in ("true", "1", "yes"):
        return True
    if text.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"bad boolean for {key!r}: {text!r}")


def parse_config(text: str) -> PipelineConfig:
    """Parse key=value configuration text; unknown keys are errors."""
    values: dict = {}
    conv_rows: dict[int, tuple] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key.startswith("conv") and key[4:].isdigit():
            parts = [p.strip() for p in val.split(",")]
            if len(parts) != 5:
                raise ValueError(
                    f"line {lineno}: {key} needs 5 fields "
                    "(in_channels, out_channels, kernel, stride, downsample)"
                )
            conv_rows[int(key[4:])] = tuple(int(p) for p in parts)
        elif key == "taps":
            values["taps"] = tuple(p.strip() for p in val.split(",") if p.strip())
        elif key in _SCALAR_KEYS:
            if key == "rebalance":
                values[key] = _parse_bool(val, key)
            else:
                values[key] = _SCALAR_KEYS[key](val)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    if conv_rows:
        expected = list(range(1, len(conv_rows) + 1))
        if sorted(conv_rows) != expected:
            raise ValueError("conv layers must be numbered consecutively from 1")
        values["layers"] = tuple(conv_rows[i] for i in expected)
    return PipelineConfig(**values)


def load_config(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def canonical_text(cfg: PipelineConfig) -> str:
    """Fixed-order serialization; floats use repr so parsing is lossless."""
    lines = [
        f"loss = {cfg.loss}",
        f"bins = {cfg.bins}",
        f"joint_bins = {cfg.joint_bins}",
        f"sigma = {cfg.sigma!r}",
        f"lambda_h = {cfg.lambda_h!r}",
        f"region_size = {cfg.region_size}",
    ]
    for i, row in enumerate(cfg.layers, start=1):
        lines.append(f"conv{i} = " + ", ".join(str(v) for v in row))
    lines += [
        "taps = " + ", ".join(cfg.taps),
        f"head_width = {cfg.head_width}",
        f"samples_per_image = {cfg.samples_per_image}",
        f"lr = {cfg.lr!r}",
        f"batch_size = {cfg.batch_size}",
        f"epochs = {cfg.epochs}",
        f"rebalance = {'true' if cfg.rebalance else 'false'}",
    ]
    return "\n".join(lines) + "\n"


def head_specs(cfg: PipelineConfig) -> tuple:
    """Prediction heads implied by the loss variant."""
    if cfg.loss == "hue_chroma_hist":
        return (
            net.HeadSpec("hue", cfg.bins),
            net.HeadSpec("chroma", cfg.bins),
        )
    if cfg.loss == "lab_marginal_hist":
        return (net.HeadSpec("a", cfg.bins), net.HeadSpec("b", cfg.bins))
    if cfg.loss == "lab_joint_hist":
        return (net.HeadSpec("ab", cfg.joint_bins**2),)
    return (net.HeadSpec("ab_values", 2, activation="linear"),)


def build_net_config(cfg: PipelineConfig) -> net.NetConfig:
    layers = tuple(
        net.ConvSpec(f"conv{i}", *row) for i, row in enumerate(cfg.layers, start=1)
    )
    return net.NetConfig(
        layers=layers,
        taps=cfg.taps,
        head_width=cfg.head_width,
        heads=head_specs(cfg),
        samples_per_image=cfg.samples_per_image,
    )


def build_tables(cfg: PipelineConfig) -> dict:
    """Bin tables keyed by head/channel name for the configured loss."""
    if cfg.loss == "hue_chroma_hist":
        return {
            "hue": histo.build_bins(histo.BinSpec("uniform_circular", cfg.bins)),
            "chroma": histo.build_bins(histo.BinSpec("uniform_linear", cfg.bins)),
        }
    if cfg.loss == "lab_marginal_hist":
        spec = histo.BinSpec("gaussian_quantile", cfg.bins, sigma=cfg.sigma)
        return {"a": histo.build_bins(spec), "b": histo.build_bins(spec)}
    if cfg.loss == "lab_joint_hist":
        spec = histo.BinSpec("joint_gaussian", cfg.joint_bins, sigma=cfg.sigma)
        return {"ab": histo.build_bins(spec)}
    return {}


def build_loss_config(cfg: PipelineConfig) -> histo.LossConfig:
    return histo.LossConfig(
        variant=cfg.loss, lambda_h=cfg.lambda_h, region_size=cfg.region_size
    )


def with_epochs(cfg: PipelineConfig, epochs: int | None) -> PipelineConfig:
    return cfg if epochs is None else replace(cfg, epochs=epochs)
