"""Color-axis binning, training targets, and the training losses.

A :class:`BinTable` partitions one color axis into K bins.  Axes are binned
either uniformly over a fixed interval (hue, chroma) or at evenly spaced
quantiles of a zero-mean Gaussian (the perceptual axes, whose values
concentrate near zero).  A joint table is the Cartesian product of two
Gaussian tables and indexes its bins row-major.

Losses operate on normalized histograms; training code uses the vectorized
batch entry points, which also produce the analytic gradients with respect
to the prediction logits of a softmax output layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import colorspace

PRED_FLOOR = 1e-12

VARIANTS = ("lab_l2", "lab_marginal_hist", "lab_joint_hist", "hue_chroma_hist")


@dataclass(frozen=True)
class BinSpec:
    """Recipe for one binning of a color axis."""

    kind: str  # gaussian_quantile | uniform_linear | uniform_circular | joint_gaussian
    bins: int
    sigma: float = 25.0
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in (
            "gaussian_quantile",
            "uniform_linear",
            "uniform_circular",
            "joint_gaussian",
        ):
            raise ValueError(f"unknown bin kind {self.kind!r}")
        if self.bins < 2:
            raise ValueError("bin count must be at least 2")
        if self.kind in ("gaussian_quantile", "joint_gaussian") and self.sigma <= 0:
            raise ValueError("sigma must be positive for Gaussian binning")
        if self.kind in ("uniform_linear", "uniform_circular") and self.hi <= self.lo:
            raise ValueError("empty value range")
        if self.kind == "uniform_circular" and (self.lo, self.hi) != (0.0, 1.0):
            raise ValueError("circular binning covers [0, 1)")

    def serialize(self) -> str:
        if self.kind in ("gaussian_quantile", "joint_gaussian"):
            return f"{self.kind}:{self.bins}:{self.sigma:g}"
        return f"{self.kind}:{self.bins}:{self.lo:g}:{self.hi:g}"

    @staticmethod
    def parse(text: str) -> "BinSpec":
        parts = text.split(":")
        kind = parts[0]
        try:
            if kind in ("gaussian_quantile", "joint_gaussian"):
                return BinSpec(kind, int(parts[1]), sigma=float(parts[2]))
            return BinSpec(kind, int(parts[1]), lo=float(parts[2]), hi=float(parts[3]))
        except (IndexError, ValueError) as exc:
            raise ValueError(f"bad bin spec {text!r}") from exc


@dataclass(frozen=True)
class BinTable:
    """A binning of one scalar color axis.

    ``edges`` holds the K-1 interior boundaries; the outer boundaries are
    the range limits for uniform tables and unbounded for Gaussian ones.
    Bin k covers [edge_{k-1}, edge_k).  ``centroids`` holds one
    representative value strictly inside each bin.
    """

    spec: BinSpec
    edges: np.ndarray
    centroids: np.ndarray
    circular: bool = False

    @property
    def n_bins(self) -> int:
        return len(self.centroids)

    @property
    def value_dim(self) -> int:
        return 1

    def quantize(self, values) -> np.ndarray:
        """Bin index for each value; circular axes wrap values mod 1."""
        values = np.asarray(values, dtype=np.float64)
        if np.any(np.isnan(values)):
            raise ValueError("cannot quantize NaN")
        if self.circular:
            values = np.mod(values, 1.0)
        idx = np.searchsorted(self.edges, values, side="right")
        return idx

    def angular_centroids(self) -> np.ndarray:
        """Bin centers as angles, 2*pi*(k + 0.5)/K.  Circular tables only."""
        if not self.circular:
            raise ValueError("angular centroids are defined for circular tables")
        k = np.arange(self.n_bins)
        return 2.0 * np.pi * (k + 0.5) / self.n_bins


@dataclass(frozen=True)
class JointBinTable:
    """Cartesian product of two Gaussian tables over a pair of axes.

    Bin (i, j) of the product maps to flat index i * K + j; centroids are
    the (axis0, axis1) centroid pairs.
    """

    spec: BinSpec
    axis0: BinTable
    axis1: BinTable
    centroids: np.ndarray = field(init=False)  # (K0*K1, 2)

    def __post_init__(self):
        c0 = self.axis0.centroids
        c1 = self.axis1.centroids
        grid = np.stack(
            [np.repeat(c0, len(c1)), np.tile(c1, len(c0))], axis=-1
        )
        object.__setattr__(self, "centroids", grid)

    @property
    def n_bins(self) -> int:
        return self.axis0.n_bins * self.axis1.n_bins

    @property
    def value_dim(self) -> int:
        return 2

    @property
    def circular(self) -> bool:
        return False

    def quantize(self, values) -> np.ndarray:
        """Flat bin index for each (axis0, axis1) value pair."""
        values = np.asarray(values, dtype=np.float64)
        i0 = self.axis0.quantize(values[..., 0])
        i1 = self.axis1.quantize(values[..., 1])
        return i0 * self.axis1.n_bins + i1


def build_bins(spec: BinSpec) -> BinTable | JointBinTable:
    """Construct the bin table described by ``spec``.

    Gaussian tables place interior edge j at sigma * Phi^-1(j/K) and
    centroid k at sigma * Phi^-1((k + 0.5)/K); uniform tables use
    equal-width bins with midpoint centroids.
    """
    k = spec.bins
    if spec.kind == "gaussian_quantile":
        edges = spec.sigma * ndtri(np.arange(1, k) / k)
        centroids = spec.sigma * ndtri((np.arange(k) + 0.5) / k)
        return BinTable(spec, edges, centroids, circular=False)
    if spec.kind == "joint_gaussian":
        axis_spec = BinSpec("gaussian_quantile", k, sigma=spec.sigma)
        return JointBinTable(spec, build_bins(axis_spec), build_bins(axis_spec))
    width = (spec.hi - spec.lo) / k
    edges = spec.lo + width * np.arange(1, k)
    centroids = spec.lo + width * (np.arange(k) + 0.5)
    return BinTable(spec, edges, centroids, circular=spec.kind == "uniform_circular")


def target_histogram(values, table, region_size: int = 1) -> np.ndarray:
    """Normalized bin-count histogram of a region's channel values.

    ``values`` are the channel values of a region_size x region_size patch
    (a single value when region_size is 1, which yields a one-hot vector).
    """
    if region_size < 1:
        raise ValueError("region size must be at least 1")
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if table.value_dim == 2:
        values = values.reshape(-1, 2)
    else:
        values = values.reshape(-1)
    if values.size == 0:
        raise ValueError("cannot build a target histogram from no values")
    idx = table.quantize(values)
    counts = np.bincount(idx.ravel(), minlength=table.n_bins).astype(np.float64)
    return counts / counts.sum()


def empirical_histogram(values, table) -> np.ndarray:
    """Normalized histogram of an arbitrary collection of channel values."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot histogram an empty collection")
    idx = table.quantize(values)
    counts = np.bincount(idx.ravel(), minlength=table.n_bins).astype(np.float64)
    return counts / counts.sum()


@dataclass(frozen=True)
class LossConfig:
    """Selects the training loss and its weights."""

    variant: str = "hue_chroma_hist"
    lambda_h: float = 5.0  # hue weight, roughly 1 / E[chroma]
    region_size: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown loss variant {self.variant!r}")
        if self.lambda_h <= 0:
            raise ValueError("lambda_h must be positive")
        if self.region_size < 1:
            raise ValueError("region size must be at least 1")


def _check_normalized(pred: np.ndarray, axis: int = -1) -> None:
    sums = pred.sum(axis=axis)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("prediction histogram is not normalized")


def kl_hist_loss(target: np.ndarray, pred: np.ndarray) -> float:
    """KL divergence D(target || pred) between two normalized histograms.

    Prediction entries are clamped at 1e-12 before the log; target entries
    of zero contribute nothing.  For a one-hot target this is the log loss
    -log pred_k.
    """
    target = np.asarray(target, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    _check_normalized(pred)
    pred = np.maximum(pred, PRED_FLOOR)
    mask = target > 0
    return float(np.sum(target[mask] * np.log(target[mask] / pred[mask])))


def huechroma_loss(
    pred_h: np.ndarray,
    pred_c: np.ndarray,
    target_h: np.ndarray,
    target_c: np.ndarray,
    y_c: float,
    cfg: LossConfig,
) -> float:
    """Chroma KL plus chroma-weighted hue KL.

    The hue term is scaled by lambda_h * y_c so that hue errors on nearly
    achromatic pixels, where hue is unstable, carry no weight.
    """
    loss = kl_hist_loss(target_c, pred_c)
    loss += cfg.lambda_h * y_c * kl_hist_loss(target_h, pred_h)
    return float(loss)


def l2_loss(pred, target) -> float:
    """Squared Euclidean distance between predicted and target vectors."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return float(np.sum((pred - target) ** 2))


def build_targets(
    rgb: np.ndarray, rows: np.ndarray, cols: np.ndarray, loss_cfg, tables: dict
) -> dict[str, np.ndarray]:
    """Per-sample training targets for the pixels at (rows, cols).

    Returns arrays keyed by head name ("hue"/"chroma"/"a"/"b"/"ab"/
    "ab_values"), plus "chroma_value" for the hue/chroma variant.  With
    region_size > 1 the
    target is the empirical histogram of the surrounding region (clipped at
    image borders); with region_size 1 it is one-hot.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    h, w = rgb.shape[:2]
    r = loss_cfg.region_size

    def region_values(channel: np.ndarray) -> list[np.ndarray]:
        half = (r - 1) // 2
        out = []
        for y, x in zip(rows, cols):
            y0, y1 = max(0, y - half), min(h, y - half + r)
            x0, x1 = max(0, x - half), min(w, x - half + r)
            out.append(channel[y0:y1, x0:x1].ravel())
        return out

    def histify(channel: np.ndarray, table) -> np.ndarray:
        if r == 1:
            idx = table.quantize(channel[rows, cols])
            out = np.zeros((len(rows), table.n_bins))
            out[np.arange(len(rows)), idx] = 1.0
            return out
        return np.stack([empirical_histogram(v, table) for v in region_values(channel)])

    if loss_cfg.variant == "hue_chroma_hist":
        hue, chroma, _ = colorspace.rgb_to_huechroma(rgb)
        return {
            "hue": histify(hue, tables["hue"]),
            "chroma": histify(chroma, tables["chroma"]),
            "chroma_value": chroma[rows, cols],
        }
    lab = colorspace.rgb_to_lab(rgb)
    a, b = lab[..., 1], lab[..., 2]
    if loss_cfg.variant == "lab_marginal_hist":
        return {"a": histify(a, tables["a"]), "b": histify(b, tables["b"])}
    if loss_cfg.variant == "lab_joint_hist":
        table = tables["ab"]
        pairs = np.stack([a[rows, cols], b[rows, cols]], axis=-1)
        if r == 1:
            idx = table.quantize(pairs)
            out = np.zeros((len(rows), table.n_bins))
            out[np.arange(len(rows)), idx] = 1.0
            return {"ab": out}
        ab = np.stack([a, b], axis=-1)
        half = (r - 1) // 2
        hists = []
        for y, x in zip(rows, cols):
            y0, y1 = max(0, y - half), min(h, y - half + r)
            x0, x1 = max(0, x - half), min(w, x - half + r)
            hists.append(empirical_histogram(ab[y0:y1, x0:x1].reshape(-1, 2), table))
        return {"ab": np.stack(hists)}
    # lab_l2: regression targets, no binning
    return {"ab_values": np.stack([a[rows, cols], b[rows, cols]], axis=-1)}


def batch_loss_and_grads(
    outputs: dict[str, np.ndarray], targets: dict[str, np.ndarray], loss_cfg
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Per-sample losses and gradients with respect to the head outputs.

    For softmax heads the returned gradient is with respect to the logits
    (the softmax Jacobian is folded in); for the regression head it is with
    respect to the raw outputs.  Gradients are per sample, unreduced.
    """
    if loss_cfg.variant == "hue_chroma_hist":
        f_h = np.maximum(outputs["hue"], PRED_FLOOR)
        f_c = np.maximum(outputs["chroma"], PRED_FLOOR)
        y_h, y_c = targets["hue"], targets["chroma"]
        w = loss_cfg.lambda_h * targets["chroma_value"]
        loss_c = np.sum(np.where(y_c > 0, y_c * np.log(np.maximum(y_c, PRED_FLOOR) / f_c), 0.0), axis=1)
        loss_h = np.sum(np.where(y_h > 0, y_h * np.log(np.maximum(y_h, PRED_FLOOR) / f_h), 0.0), axis=1)
        losses = loss_c + w * loss_h
        grads = {
            "chroma": outputs["chroma"] - y_c,
            "hue": w[:, None] * (outputs["hue"] - y_h),
        }
        return losses, grads
    if loss_cfg.variant in ("lab_marginal_hist", "lab_joint_hist"):
        losses = None
        grads = {}
        for name in outputs:
            f = np.maximum(outputs[name], PRED_FLOOR)
            y = targets[name]
            term = np.sum(np.where(y > 0, y * np.log(np.maximum(y, PRED_FLOOR) / f), 0.0), axis=1)
            losses = term if losses is None else losses + term
            grads[name] = outputs[name] - y
        return losses, grads
    # lab_l2
    diff = outputs["ab_values"] - targets["ab_values"]
    return np.sum(diff**2, axis=1), {"ab_values": 2.0 * diff}
