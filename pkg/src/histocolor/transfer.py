"""Steer colorizations toward a reference color histogram.

Two mechanisms, both post-hoc.  Quantile matching works purely on decoded
images: lightness-normalized channels of the source are monotonically
remapped onto the target's empirical distributions.  Energy minimization
works on the predicted per-pixel distributions themselves: a global per-bin
log-bias b is fitted so that posteriors softmax(log f + b) stay close to
the predictions (KL) while their mean histogram approaches the target
(symmetric chi-squared), weighted by lambda.

The same bias mechanism, with hand-picked rather than optimized biases,
produces diverse sampled colorizations; the hue entropy weighted by chroma
gives a per-pixel uncertainty map.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import logsumexp

from . import colorspace, decode, histo
from .net import HistogramField

#: Guard for the per-pixel lightness division.
LIGHTNESS_EPS = 1e-4

_DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class TransferConfig:
    """Energy-minimization knobs.  lam weighs histogram proximity."""

    lam: float = 1.0
    lr: float = 1.0
    max_iters: int = 500
    tol: float = 1e-6

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("matching weight must be nonnegative")
        if self.lr <= 0:
            raise ValueError("descent step must be positive")


# --- quantile matching --------------------------------------------------


def _quantile_remap(src: np.ndarray, tgt: np.ndarray) -> np.ndarray:
    """Monotone remap of src values onto tgt's empirical distribution."""
    flat = src.ravel()
    s_sorted = np.sort(flat)
    t_sorted = np.sort(tgt.ravel())
    q = np.searchsorted(s_sorted, flat, side="right") / flat.size
    grid = np.arange(1, t_sorted.size + 1) / t_sorted.size
    return np.interp(q, grid, t_sorted).reshape(src.shape)


def quantile_match(source: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Lightness-normalized quantile matching of source onto target.

    Both images are divided per pixel by their lightness (R+G+B)/3, each
    source channel is remapped so its empirical CDF composes onto the
    target's (linear interpolation between order statistics), and the
    result is multiplied back by the source lightness and clamped.
    Matching an image onto itself is exact.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    for img in (source, target):
        if img.size == 0:
            raise ValueError("empty image")
        if img.ndim != 3 or img.shape[-1] != 3:
            raise ValueError("expected (H, W, 3) images")
    s_light = np.maximum(source.mean(axis=-1), LIGHTNESS_EPS)[..., None]
    t_light = np.maximum(target.mean(axis=-1), LIGHTNESS_EPS)[..., None]
    s_norm = source / s_light
    t_norm = target / t_light
    out = np.empty_like(s_norm)
    for c in range(3):
        out[..., c] = _quantile_remap(s_norm[..., c], t_norm[..., c])
    return np.clip(out * s_light, 0.0, 1.0)


# --- energy minimization ------------------------------------------------


def symmetric_chi2(p, q) -> float:
    """Symmetric chi-squared distance sum (p-q)^2 / (p+q), bounded by 2."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    denom = p + q
    terms = np.where(denom >= _DENOM_FLOOR, (p - q) ** 2 / np.maximum(denom, _DENOM_FLOOR), 0.0)
    return float(terms.sum())


def image_histograms(rgb: np.ndarray, tables: dict) -> dict[str, np.ndarray]:
    """Empirical per-channel histograms of an image under ``tables``.

    Channel values follow the table names: hue/chroma from the bicone
    representation, a/b (or the joint ab pair) from CIELAB.
    """
    rgb = np.asarray(rgb, dtype=np.float64)
    values: dict[str, np.ndarray] = {}
    if "hue" in tables or "chroma" in tables:
        hue, chroma, _ = colorspace.rgb_to_huechroma(rgb)
        values["hue"] = hue.ravel()
        values["chroma"] = chroma.ravel()
    if "a" in tables or "b" in tables or "ab" in tables:
        lab = colorspace.rgb_to_lab(rgb)
        values["a"] = lab[..., 1].ravel()
        values["b"] = lab[..., 2].ravel()
        values["ab"] = lab[..., 1:].reshape(-1, 2)
    out = {}
    for name, table in tables.items():
        if name not in values:
            raise ValueError(f"no value rule for channel {name!r}")
        out[name] = histo.empirical_histogram(values[name], table)
    return out


def _check_targets(field: HistogramField, targets: dict) -> None:
    if set(targets) != set(field.channels):
        raise ValueError(
            f"target channels {sorted(targets)} do not match field "
            f"channels {sorted(field.channels)}"
        )
    for name, t in targets.items():
        t = np.asarray(t)
        if t.shape != (field.channels[name].shape[-1],):
            raise ValueError(f"target for {name!r} has wrong length")
        if abs(float(t.sum()) - 1.0) > 1e-9 or np.any(t < 0):
            raise ValueError(f"target histogram for {name!r} is not normalized")


def _softmax_rows(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _channel_state(logf, b, target, lam):
    """Posterior rows, their mean histogram, and the energy at bias b."""
    z = logf + b
    lse = logsumexp(z, axis=1)
    post = np.exp(z - lse[:, None])
    # per-row KL(post || f) collapses to post.b - logsumexp(log f + b)
    kl = post @ b - lse
    mean_post = post.mean(axis=0)
    energy = float(kl.mean()) + lam * symmetric_chi2(mean_post, target)
    return post, mean_post, energy


def _channel_gradient(post, mean_post, b, target, lam):
    denom = mean_post + target
    g = np.where(
        denom >= _DENOM_FLOOR,
        lam * (mean_post - target) * (mean_post + 3 * target) / np.maximum(denom, _DENOM_FLOOR) ** 2,
        0.0,
    )
    c = b + g
    row_dot = post @ c
    return (post * (c[None, :] - row_dot[:, None])).mean(axis=0)


def energy_minimize(
    field: HistogramField,
    targets: dict,
    cfg: TransferConfig | None = None,
    trace_out: dict | None = None,
):
    """Fit per-bin biases so mean posteriors approach target histograms.

    Each channel is optimized independently by gradient descent on
    E(b) = (1/N) sum_n KL(softmax(log f_n + b) || f_n) + lam * chi2(mean, t)
    starting from b = 0, with step halving (up to 20 times per iteration)
    so the recorded energy never increases.  Returns the posterior field,
    the per-channel biases, and the final energy summed over channels.
    ``trace_out``, when given, receives each channel's energy trace.
    """
    cfg = TransferConfig() if cfg is None else cfg
    _check_targets(field, targets)
    if cfg.lam == 0:
        if trace_out is not None:
            trace_out.update({name: [0.0] for name in field.channels})
        biases = {
            name: np.zeros(arr.shape[-1]) for name, arr in field.channels.items()
        }
        return field, biases, 0.0

    posterior = {}
    biases = {}
    total_energy = 0.0
    for name, arr in field.channels.items():
        k = arr.shape[-1]
        logf = np.log(np.maximum(arr.reshape(-1, k), histo.PRED_FLOOR))
        target = np.asarray(targets[name], dtype=np.float64)
        b = np.zeros(k)
        post, mean_post, energy = _channel_state(logf, b, target, cfg.lam)
        if not np.isfinite(energy):
            raise RuntimeError(f"non-finite energy for channel {name!r}")
        trace = [energy]
        step = cfg.lr
        for _ in range(cfg.max_iters):
            grad = _channel_gradient(post, mean_post, b, target, cfg.lam)
            if float(np.linalg.norm(grad)) < cfg.tol:
                break
            s = step
            accepted = False
            for _ in range(21):
                b_try = b - s * grad
                post_try, mean_try, e_try = _channel_state(logf, b_try, target, cfg.lam)
                if np.isfinite(e_try) and e_try <= energy:
                    accepted = True
                    break
                s /= 2
            if not accepted:
                break
            b, post, mean_post, energy = b_try, post_try, mean_try, e_try
            step = s
            trace.append(energy)
        posterior[name] = post.reshape(arr.shape)
        biases[name] = b
        total_energy += energy
        if trace_out is not None:
            trace_out[name] = trace
    return HistogramField(posterior), biases, total_energy


# --- sampling and uncertainty ------------------------------------------


def apply_bias(field: HistogramField, bias: dict) -> HistogramField:
    """Reweight every pixel's distributions by per-bin log-biases."""
    channels = {}
    for name, arr in field.channels.items():
        b = np.asarray(bias[name], dtype=np.float64)
        if b.shape != (arr.shape[-1],):
            raise ValueError(f"bias for {name!r} has wrong length")
        if not np.all(np.isfinite(b)):
            raise ValueError(f"bias for {name!r} is not finite")
        logf = np.log(np.maximum(arr, histo.PRED_FLOOR))
        channels[name] = _softmax_rows(logf + b)
    return HistogramField(channels)


def biased_samples(
    field: HistogramField,
    biases,
    gray: np.ndarray,
    tables: dict,
    policy: decode.DecodePolicy | None = None,
    seed: int = 0,
) -> list[np.ndarray]:
    """Render the field once per bias vector; deterministic for a seed."""
    policy = decode.DecodePolicy() if policy is None else policy
    out = []
    for i, bias in enumerate(biases):
        shifted = apply_bias(field, bias)
        out.append(
            decode.render(shifted, gray, tables, replace(policy, rng_seed=seed + i))
        )
    return out


def rotation_biases(tables: dict, n: int, amplitude: float = 1.0) -> list[dict]:
    """n bias vectors sweeping a full turn through color space.

    Each bias pushes mass toward one direction of the color plane: for hue
    channels a cosine bump centered on the rotating angle; for Lab channels
    centroid-proportional pushes along the rotating (a, b) direction.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    out = []
    for i in range(n):
        phi = 2.0 * np.pi * i / n
        bias = {}
        for name, table in tables.items():
            if name == "hue":
                theta = table.angular_centroids()
                bias[name] = amplitude * np.cos(theta - phi)
            elif name == "a":
                unit = table.centroids / np.max(np.abs(table.centroids))
                bias[name] = amplitude * np.cos(phi) * unit
            elif name == "b":
                unit = table.centroids / np.max(np.abs(table.centroids))
                bias[name] = amplitude * np.sin(phi) * unit
            elif name == "ab":
                c = table.centroids
                u0 = c[:, 0] / np.max(np.abs(c[:, 0]))
                u1 = c[:, 1] / np.max(np.abs(c[:, 1]))
                bias[name] = amplitude * (np.cos(phi) * u0 + np.sin(phi) * u1)
            else:
                bias[name] = np.zeros(table.n_bins)
        out.append(bias)
    return out


def uncertainty_map(
    field: HistogramField,
    tables: dict,
    policy: decode.DecodePolicy | None = None,
) -> np.ndarray:
    """Hue entropy scaled by decoded chroma, per pixel.

    Entropy uses natural log and is rescaled by 1/ln K so a uniform hue
    distribution scores exactly the decoded chroma; chroma decoding
    follows the policy's scalar method with no fading.
    """
    policy = decode.DecodePolicy() if policy is None else policy
    for name in ("hue", "chroma"):
        if name not in field.channels:
            raise ValueError(f"field is missing channel {name!r}")
    hue = field.channels["hue"]
    p = np.maximum(hue, histo.PRED_FLOOR)
    entropy = -np.sum(np.where(hue > 0, hue * np.log(p), 0.0), axis=-1)
    chroma = decode.decode_scalar_channel(
        field.channels["chroma"],
        tables["chroma"],
        policy.scalar_method,
        np.random.default_rng(policy.rng_seed),
    )
    return entropy / np.log(hue.shape[-1]) * chroma
