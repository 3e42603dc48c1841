"""Turn per-pixel color distributions into a color image.

A predicted :class:`~histocolor.net.HistogramField` assigns each pixel one
distribution per color channel.  Decoding reduces each distribution to a
point estimate (sample, mode, median, or expectation), with hue handled on
the circle via a complex expectation whose magnitude doubles as a
confidence; low-confidence pixels have their chroma faded toward gray.
The decoded channels are combined with the input lightness and converted
to RGB, then nudged so the result's grayscale matches the input exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import colorspace
from .histo import BinTable, JointBinTable

METHODS = ("sample", "mode", "median", "expectation")

#: Fading threshold on the hue-expectation magnitude (cross-validated).
DEFAULT_ETA = 0.03

_ZERO_MAG = 1e-12


@dataclass(frozen=True)
class DecodePolicy:
    """How to reduce distributions to values.

    ``hue_method`` drives circular channels, ``scalar_method`` everything
    else.  The default, circular-expectation hue with median chroma and
    chromatic fading, is the best-performing combination.
    """

    hue_method: str = "expectation"
    scalar_method: str = "median"
    fading: bool = True
    eta: float = DEFAULT_ETA
    rng_seed: int = 0

    def __post_init__(self):
        if self.hue_method not in METHODS or self.scalar_method not in METHODS:
            raise ValueError("decode method must be one of " + ", ".join(METHODS))
        if self.hue_method == "median":
            raise ValueError("median decoding is undefined on a circular axis")
        if self.eta <= 0:
            raise ValueError("fading threshold must be positive")

    @staticmethod
    def from_name(name: str, fading: bool = True, seed: int = 0) -> "DecodePolicy":
        """Single-name policy menu used by the command line.

        ``expectation`` and ``median`` keep circular-expectation hue and
        vary the scalar method; ``mode`` and ``sample`` apply to every
        channel.
        """
        if name not in METHODS:
            raise ValueError(f"unknown decode policy {name!r}")
        hue = name if name in ("mode", "sample") else "expectation"
        return DecodePolicy(hue, name, fading=fading, rng_seed=seed)


@dataclass(frozen=True)
class HueEstimate:
    """Circular hue expectation: angle (as hue in [0,1)) and magnitude."""

    hue: np.ndarray
    magnitude: np.ndarray


def _full_edges(table: BinTable) -> np.ndarray:
    # Gaussian outer bins are unbounded; stand in their centroids so the
    # median interpolation stays finite.
    if table.spec.kind == "gaussian_quantile":
        lo, hi = table.centroids[0], table.centroids[-1]
    else:
        lo, hi = table.spec.lo, table.spec.hi
    return np.concatenate([[lo], table.edges, [hi]])


def _sample_bins(dist: np.ndarray, rng) -> np.ndarray:
    cum = np.cumsum(dist, axis=-1)
    u = rng.random(dist.shape[:-1])
    idx = np.sum(cum < u[..., None], axis=-1)
    return np.minimum(idx, dist.shape[-1] - 1)


def decode_scalar_channel(dist, table: BinTable, method: str = "expectation", rng=None):
    """Reduce distributions over a scalar axis to values.

    ``dist`` carries bins along the last axis; any leading shape works.
    sample draws a bin proportionally to its weight and returns its
    centroid; mode returns the argmax centroid (lowest index on ties);
    median linearly interpolates the cumulative sum to its 0.5 crossing
    across the crossing bin's width; expectation is the centroid average.
    """
    dist = np.asarray(dist, dtype=np.float64)
    if method not in METHODS:
        raise ValueError(f"unknown decode method {method!r}")
    if dist.shape[-1] != table.n_bins:
        raise ValueError(
            f"distribution has {dist.shape[-1]} bins, table has {table.n_bins}"
        )
    if method == "expectation":
        return dist @ table.centroids
    if method == "mode":
        return table.centroids[np.argmax(dist, axis=-1)]
    if method == "median":
        if table.circular:
            raise ValueError("median decoding is undefined on a circular axis")
        edges = _full_edges(table)
        cum = np.cumsum(dist, axis=-1)
        k = np.argmax(cum >= 0.5, axis=-1)
        mass = np.take_along_axis(dist, k[..., None], axis=-1)[..., 0]
        below = np.take_along_axis(cum, k[..., None], axis=-1)[..., 0] - mass
        frac = (0.5 - below) / np.maximum(mass, _ZERO_MAG)
        return edges[k] + frac * (edges[k + 1] - edges[k])
    rng = np.random.default_rng() if rng is None else rng
    return table.centroids[_sample_bins(dist, rng)]


def circular_hue_expectation(dist) -> HueEstimate:
    """Complex expectation of a hue distribution.

    z = (1/K) sum_k f_k exp(i theta_k) with theta_k = 2 pi (k+0.5)/K.  The
    angle of z gives the hue; |z| (which keeps the written 1/K prefactor,
    since the fading threshold was tuned against it) measures how
    concentrated the distribution is.  Hue is reported as 0 when the
    magnitude is vanishingly small.
    """
    dist = np.asarray(dist, dtype=np.float64)
    k = dist.shape[-1]
    theta = 2.0 * np.pi * (np.arange(k) + 0.5) / k
    z = (dist @ np.exp(1j * theta)) / k
    magnitude = np.abs(z)
    hue = np.mod(np.angle(z) / (2.0 * np.pi), 1.0)
    hue = np.where(magnitude < _ZERO_MAG, 0.0, hue)
    return HueEstimate(hue=hue, magnitude=magnitude)


def chromatic_fade(chroma, magnitude, eta: float = DEFAULT_ETA):
    """Scale chroma by min(magnitude/eta, 1): uncertain hue fades to gray."""
    if eta <= 0:
        raise ValueError("fading threshold must be positive")
    return np.asarray(chroma) * np.minimum(np.asarray(magnitude) / eta, 1.0)


def _decode_hue(dist, table: BinTable, policy: DecodePolicy, rng):
    est = circular_hue_expectation(dist)
    if policy.hue_method == "expectation":
        return est.hue, est.magnitude
    if policy.hue_method == "mode":
        return table.centroids[np.argmax(dist, axis=-1)], est.magnitude
    return table.centroids[_sample_bins(dist, rng)], est.magnitude


def _joint_marginals(dist, table: JointBinTable):
    k0, k1 = table.axis0.n_bins, table.axis1.n_bins
    grid = dist.reshape(dist.shape[:-1] + (k0, k1))
    return grid.sum(axis=-1), grid.sum(axis=-2)


def _decode_joint(dist, table: JointBinTable, method: str, rng):
    """Decode (axis0, axis1) value pairs from a joint distribution."""
    if method == "expectation":
        return dist @ table.centroids
    if method == "mode":
        return table.centroids[np.argmax(dist, axis=-1)]
    if method == "sample":
        return table.centroids[_sample_bins(dist, rng)]
    d0, d1 = _joint_marginals(dist, table)
    v0 = decode_scalar_channel(d0, table.axis0, "median")
    v1 = decode_scalar_channel(d1, table.axis1, "median")
    return np.stack([v0, v1], axis=-1)


def _check_tables(field, tables, names):
    for name in names:
        if name not in field.channels:
            raise ValueError(f"field is missing channel {name!r}")
        if name not in tables:
            raise ValueError(f"no bin table for channel {name!r}")
        if field.channels[name].shape[-1] != tables[name].n_bins:
            raise ValueError(
                f"channel {name!r}: field has {field.channels[name].shape[-1]} "
                f"bins, table has {tables[name].n_bins}"
            )


def render(field, gray, tables: dict, policy: DecodePolicy | None = None) -> np.ndarray:
    """Decode a histogram field against its grayscale input to an RGB image.

    Hue/chroma fields decode hue on the circle and chroma by the policy's
    scalar method, optionally fade chroma where the hue expectation is
    weak, and rebuild RGB around the input lightness.  Lab fields decode
    the two chromatic axes and combine them with lightness 100*gray.  The
    result is lightness-corrected so its grayscale equals the input on
    unclamped pixels, and always lies in [0, 1].
    """
    policy = DecodePolicy() if policy is None else policy
    gray = np.asarray(gray, dtype=np.float64)
    if gray.ndim != 2:
        raise ValueError("expected a 2-d grayscale image")
    if (field.height, field.width) != gray.shape:
        raise ValueError(
            f"field is {field.width}x{field.height}, image is "
            f"{gray.shape[1]}x{gray.shape[0]}"
        )
    rng = np.random.default_rng(policy.rng_seed)
    names = set(field.channels)

    if names == {"hue", "chroma"}:
        _check_tables(field, tables, ("hue", "chroma"))
        hue, magnitude = _decode_hue(field.channels["hue"], tables["hue"], policy, rng)
        chroma = decode_scalar_channel(
            field.channels["chroma"], tables["chroma"], policy.scalar_method, rng
        )
        if policy.fading:
            chroma = chromatic_fade(chroma, magnitude, policy.eta)
        rgb = colorspace.huechroma_to_rgb(hue, chroma, gray)
        return colorspace.lightness_correct(rgb, gray)

    if names == {"a", "b"}:
        _check_tables(field, tables, ("a", "b"))
        a = decode_scalar_channel(field.channels["a"], tables["a"], policy.scalar_method, rng)
        b = decode_scalar_channel(field.channels["b"], tables["b"], policy.scalar_method, rng)
        return _render_lab(a, b, gray)

    if names == {"ab"}:
        _check_tables(field, tables, ("ab",))
        pair = _decode_joint(field.channels["ab"], tables["ab"], policy.scalar_method, rng)
        return _render_lab(pair[..., 0], pair[..., 1], gray)

    raise ValueError(f"unrecognized field channels {sorted(names)!r}")


def _render_lab(a, b, gray):
    lab = np.stack([100.0 * gray, a, b], axis=-1)
    rgb = colorspace.lab_to_rgb(lab)
    return colorspace.lightness_correct(rgb, gray)


def render_regression(ab_values: np.ndarray, gray: np.ndarray) -> np.ndarray:
    """Render directly regressed (a, b) value maps against the input gray."""
    ab_values = np.asarray(ab_values, dtype=np.float64)
    gray = np.asarray(gray, dtype=np.float64)
    if ab_values.shape != gray.shape + (2,):
        raise ValueError(
            f"value map shape {ab_values.shape} does not match image {gray.shape}"
        )
    return _render_lab(ab_values[..., 0], ab_values[..., 1], gray)
