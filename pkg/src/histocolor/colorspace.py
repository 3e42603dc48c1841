"""Color representations and conversions.

Images are numpy arrays: RGB images have shape (H, W, 3), grayscale images
(H, W), with float channel values in [0, 1].  Per-pixel conversions accept
either a single pixel (shape (3,)) or any array whose last axis holds the
channels, and return matching shapes.

The grayscale pass-through channel is the plain channel mean
L = (R + G + B) / 3.  The hue/chroma bicone instead uses the HSL lightness
(max + min) / 2 as its height; the mismatch between the two definitions is
absorbed by :func:`lightness_correct` at render time.
"""

from __future__ import annotations

import numpy as np

ALPHABETA_EPS = 1e-4

# sRGB <-> XYZ (D65), IEC 61966-2-1
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])
_LAB_DELTA = 6.0 / 29.0


def desaturate(img: np.ndarray) -> np.ndarray:
    """Grayscale version of an RGB image: per pixel, the channel mean."""
    img = np.asarray(img, dtype=np.float64)
    return img.mean(axis=-1)


def rgb_to_huechroma(px: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Convert RGB to the hue/chroma bicone.

    Returns ``(hue, chroma, bicone_lightness)`` where hue is the hexagonal
    hue as a fraction of a full turn in [0, 1), chroma = max - min of the
    channels, and bicone lightness = (max + min) / 2.  Achromatic pixels
    report hue 0 by convention.
    """
    px = np.asarray(px, dtype=np.float64)
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    mx = np.max(px, axis=-1)
    mn = np.min(px, axis=-1)
    chroma = mx - mn
    lightness = 0.5 * (mx + mn)

    safe_c = np.where(chroma > 0, chroma, 1.0)
    hue6 = np.where(
        mx == r,
        np.mod((g - b) / safe_c, 6.0),
        np.where(mx == g, (b - r) / safe_c + 2.0, (r - g) / safe_c + 4.0),
    )
    hue = np.where(chroma > 0, hue6 / 6.0, 0.0)
    hue = np.mod(hue, 1.0)
    return hue, chroma, lightness


def huechroma_to_rgb(
    hue: np.ndarray, chroma: np.ndarray, lightness: np.ndarray
) -> np.ndarray:
    """Convert hue/chroma bicone coordinates back to RGB.

    Chroma exceeding the bicone's feasible radius min(2L, 2(1-L)) is
    clipped before conversion, which makes the function total.  For
    chroma 0 the result is the achromatic pixel (L, L, L).
    """
    hue = np.mod(np.asarray(hue, dtype=np.float64), 1.0)
    lightness = np.asarray(lightness, dtype=np.float64)
    cmax = 2.0 * np.minimum(lightness, 1.0 - lightness)
    chroma = np.clip(np.asarray(chroma, dtype=np.float64), 0.0, cmax)

    h6 = hue * 6.0
    x = chroma * (1.0 - np.abs(np.mod(h6, 2.0) - 1.0))
    z = np.zeros_like(chroma + hue)
    sextant = np.floor(h6).astype(int) % 6
    cases = [sextant == s for s in range(6)]
    r1 = np.select(cases, [chroma, x, z, z, x, chroma])
    g1 = np.select(cases, [x, chroma, chroma, x, z, z])
    b1 = np.select(cases, [z, z, x, chroma, chroma, x])
    m = lightness - chroma / 2.0
    return np.stack([r1 + m, g1 + m, b1 + m], axis=-1)


def rgb_to_alphabeta(px: np.ndarray) -> np.ndarray:
    """Lightness-normalized opponent channels.

    alpha = (B - (R+G)/2) / (L + eps), beta = (R - G) / (L + eps) with
    L = (R+G+B)/3 and eps = 1e-4.  Achromatic pixels map to (0, 0) exactly.
    """
    px = np.asarray(px, dtype=np.float64)
    r, g, b = px[..., 0], px[..., 1], px[..., 2]
    lum = (r + g + b) / 3.0
    denom = lum + ALPHABETA_EPS
    alpha = (b - 0.5 * (r + g)) / denom
    beta = (r - g) / denom
    return np.stack([alpha, beta], axis=-1)


def _lab_f(t: np.ndarray) -> np.ndarray:
    d3 = _LAB_DELTA**3
    return np.where(t > d3, np.cbrt(t), t / (3.0 * _LAB_DELTA**2) + 4.0 / 29.0)


def _lab_f_inv(u: np.ndarray) -> np.ndarray:
    return np.where(
        u > _LAB_DELTA, u**3, 3.0 * _LAB_DELTA**2 * (u - 4.0 / 29.0)
    )


def _srgb_linearize(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _srgb_delinearize(c: np.ndarray) -> np.ndarray:
    c = np.maximum(c, 0.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def rgb_to_lab(px: np.ndarray) -> np.ndarray:
    """Convert sRGB (D65) to CIELAB; returns (..., 3) arrays of (L*, a, b)."""
    px = np.asarray(px, dtype=np.float64)
    lin = _srgb_linearize(px)
    xyz = lin @ _RGB_TO_XYZ.T
    fxyz = _lab_f(xyz / _WHITE_D65)
    lstar = 116.0 * fxyz[..., 1] - 16.0
    a = 500.0 * (fxyz[..., 0] - fxyz[..., 1])
    b = 200.0 * (fxyz[..., 1] - fxyz[..., 2])
    return np.stack([lstar, a, b], axis=-1)


def lab_to_rgb(px: np.ndarray) -> np.ndarray:
    """Convert CIELAB back to sRGB, clamping out-of-gamut results to [0, 1]."""
    px = np.asarray(px, dtype=np.float64)
    lstar, a, b = px[..., 0], px[..., 1], px[..., 2]
    fy = (lstar + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1)
    xyz = xyz * _WHITE_D65
    lin = xyz @ _XYZ_TO_RGB.T
    return np.clip(_srgb_delinearize(lin), 0.0, 1.0)


def lightness_correct(pred: np.ndarray, input_l: np.ndarray) -> np.ndarray:
    """Shift all channels of ``pred`` so its grayscale matches ``input_l``.

    Adds (L - desaturate(pred)) to each channel and clamps to [0, 1].  On
    pixels where no channel clamps the corrected image desaturates back to
    ``input_l`` exactly.
    """
    pred = np.asarray(pred, dtype=np.float64)
    input_l = np.asarray(input_l, dtype=np.float64)
    if pred.shape[:-1] != input_l.shape:
        raise ValueError(
            f"dimension mismatch: prediction {pred.shape[:-1]} vs lightness {input_l.shape}"
        )
    shift = input_l - desaturate(pred)
    return np.clip(pred + shift[..., None], 0.0, 1.0)


def replicate_gray(gray: np.ndarray) -> np.ndarray:
    """Gray image replicated to three channels (the no-colorization image)."""
    gray = np.asarray(gray, dtype=np.float64)
    return np.repeat(gray[..., None], 3, axis=-1)
