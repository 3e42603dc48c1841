"""Quantitative evaluation of colorizations.

Error is measured in the lightness-normalized opponent space (alpha, beta),
which discounts lightness and emphasizes chromatic mistakes: RMSE here is
the mean over all pixels of the per-pixel Euclidean norm of the (alpha,
beta) difference.  PSNR is computed per image in RGB and averaged
arithmetically.  A cumulative curve reports, for a grid of thresholds, the
fraction of pixels whose chromatic error falls below each.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import colorspace

#: Per-image PSNR is capped here; the cap triggers only at MSE <= 1e-10.
PSNR_CAP_DB = 100.0

_CAP_MSE = 1e-10

#: Default thresholds for the cumulative error curve.
DEFAULT_THRESHOLDS = tuple(np.round(np.linspace(0.0, 5.0, 201), 6))


@dataclass
class EvalReport:
    rmse_ab: float
    psnr_mean_db: float
    per_image_psnr: list
    cumulative_curve: list  # (threshold, fraction) pairs


def _check_pairs(preds, gts):
    if len(preds) != len(gts):
        raise ValueError(f"{len(preds)} predictions vs {len(gts)} references")
    if not preds:
        raise ValueError("no image pairs")
    for i, (p, g) in enumerate(zip(preds, gts)):
        p, g = np.asarray(p), np.asarray(g)
        if p.shape != g.shape:
            raise ValueError(
                f"pair {i}: prediction shape {p.shape} does not match "
                f"reference shape {g.shape}"
            )
        if p.ndim != 3 or p.shape[-1] != 3:
            raise ValueError(f"pair {i}: expected (H, W, 3) images")


def _ab_errors(pred, gt) -> np.ndarray:
    """Per-pixel Euclidean norm of the (alpha, beta) difference."""
    pa = colorspace.rgb_to_alphabeta(np.asarray(pred, dtype=np.float64))
    ga = colorspace.rgb_to_alphabeta(np.asarray(gt, dtype=np.float64))
    return np.linalg.norm(pa - ga, axis=-1)


def rmse_ab(preds, gts) -> float:
    """Mean over all pixels of the per-pixel (alpha, beta) error norm."""
    _check_pairs(preds, gts)
    total = 0.0
    count = 0
    for p, g in zip(preds, gts):
        err = _ab_errors(p, g)
        total += float(err.sum())
        count += err.size
    return total / count


def psnr(preds, gts) -> tuple[float, list]:
    """Arithmetic-mean PSNR in dB and the per-image values.

    Per image: -10 log10(||y - y_hat||^2 / (3 N)).  Exact (or nearly
    exact) matches are capped at 100 dB to keep reports finite.
    """
    _check_pairs(preds, gts)
    per_image = []
    for p, g in zip(preds, gts):
        p = np.asarray(p, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        mse = float(np.sum((p - g) ** 2)) / p.size
        per_image.append(PSNR_CAP_DB if mse <= _CAP_MSE else -10.0 * np.log10(mse))
    return float(np.mean(per_image)), per_image


def cumulative_curve(preds, gts, thresholds=DEFAULT_THRESHOLDS) -> list:
    """(threshold, fraction of pixels with ab error <= threshold) pairs."""
    _check_pairs(preds, gts)
    errors = np.concatenate([_ab_errors(p, g).ravel() for p, g in zip(preds, gts)])
    errors.sort()
    thresholds = np.asarray(thresholds, dtype=np.float64)
    counts = np.searchsorted(errors, thresholds, side="right")
    fractions = counts / errors.size
    return list(zip(thresholds.tolist(), fractions.tolist()))


def baseline_predictions(gts) -> list:
    """No-colorization reference: each image's grayscale replicated to RGB."""
    return [
        colorspace.replicate_gray(colorspace.desaturate(np.asarray(g, dtype=np.float64)))
        for g in gts
    ]


def evaluate(preds, gts, thresholds=DEFAULT_THRESHOLDS) -> EvalReport:
    mean_db, per_image = psnr(preds, gts)
    return EvalReport(
        rmse_ab=rmse_ab(preds, gts),
        psnr_mean_db=mean_db,
        per_image_psnr=per_image,
        cumulative_curve=cumulative_curve(preds, gts, thresholds),
    )


def format_report(report: EvalReport) -> str:
    """Flat key=value serialization (curve lives in its own file)."""
    lines = [
        f"rmse_ab = {report.rmse_ab:.10g}",
        f"psnr_mean_db = {report.psnr_mean_db:.10g}",
        f"n_images = {len(report.per_image_psnr)}",
    ]
    for i, db in enumerate(report.per_image_psnr):
        lines.append(f"psnr_db_{i:04d} = {db:.10g}")
    return "\n".join(lines) + "\n"


def format_curve(report: EvalReport) -> str:
    """Two-column threshold/fraction text serialization of the curve."""
    lines = [f"{t:.10g} {f:.10g}" for t, f in report.cumulative_curve]
    return "\n".join(lines) + "\n"
