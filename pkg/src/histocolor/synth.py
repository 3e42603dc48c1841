"""Deterministic synthetic color corpus for desk-scale experiments.

Each image is a smooth random intensity field colored by a fixed rule:
bright regions take a warm hue, dark regions a cool one, with chroma
peaking at mid intensities.  Color is therefore a deterministic function
of local intensity, which is exactly what a colorization model fed only
the grayscale can hope to learn.  Everything is seeded; image i of a
corpus depends only on (seed, i, size).

Run as a module to write a corpus to disk:
    python -m histocolor.synth --out data/ --n 80 --size 32 --seed 0
"""

from __future__ import annotations

import argparse
import os

import numpy as np

from . import colorspace, imageio

WARM_HUE = 0.06
COOL_HUE = 0.62


def _intensity_field(rng: np.random.Generator, size: int) -> np.ndarray:
    """Smooth field in [0, 1]: a few random low-frequency cosine waves."""
    yy, xx = np.mgrid[0:size, 0:size] / size
    f = np.zeros((size, size))
    for _ in range(3):
        fx, fy = rng.uniform(0.5, 2.0, size=2)
        px, py = rng.uniform(0.0, 2.0 * np.pi, size=2)
        f += rng.uniform(0.5, 1.0) * np.cos(2 * np.pi * fx * xx + px) * np.cos(
            2 * np.pi * fy * yy + py
        )
    lo, hi = f.min(), f.max()
    return (f - lo) / (hi - lo + 1e-9)


def color_rule(f: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Map an intensity field to (hue, chroma, bicone lightness)."""
    blend = 1.0 / (1.0 + np.exp(-(f - 0.5) * 10.0))
    hue = COOL_HUE + (WARM_HUE - COOL_HUE) * blend
    hue = np.mod(hue, 1.0)
    chroma = 0.10 + 0.12 * (1.0 - np.abs(2.0 * f - 1.0))
    lightness = 0.35 + 0.40 * f
    return hue, chroma, lightness


def generate_image(seed: int, index: int, size: int = 32) -> np.ndarray:
    """RGB image ``index`` of the corpus with the given master seed."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    f = _intensity_field(rng, size)
    hue, chroma, lightness = color_rule(f)
    return colorspace.huechroma_to_rgb(hue, chroma, lightness)


def corpus_arrays(n: int, size: int = 32, seed: int = 0) -> list[np.ndarray]:
    return [generate_image(seed, i, size) for i in range(n)]


def make_corpus(out_dir, n: int = 80, size: int = 32, seed: int = 0) -> list[str]:
    """Write n corpus images as PNGs; returns the file paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i in range(n):
        path = os.path.join(out_dir, f"img_{i:04d}.png")
        imageio.save_image(generate_image(seed, i, size), path)
        paths.append(path)
    return paths


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="generate a synthetic color corpus")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--n", type=int, default=80)
    parser.add_argument("--size", type=int, default=32)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    paths = make_corpus(args.out, args.n, args.size, args.seed)
    print(f"wrote {len(paths)} images to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
