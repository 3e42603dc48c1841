"""Image file codecs: 8-bit PNG (via Pillow) and binary PPM/PGM.

Images are exchanged with the rest of the package as float arrays in
[0, 1]: (H, W, 3) for color, (H, W) for grayscale.  Loading maps sample
values v to v/255; saving rounds v*255 with clamping, so a save/load round
trip moves each channel by at most 1/255.
"""

from __future__ import annotations

import numpy as np
from PIL import Image, UnidentifiedImageError

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Unsupported, malformed, or truncated image file."""


def _to_bytes(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    return np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)


def _netpbm_tokens(data: bytes, path, count: int) -> list[int]:
    """First ``count`` whitespace-separated numeric header tokens after the
    magic, honoring '#' comments; returns them plus the raster offset."""
    tokens = []
    i = 2  # past the 2-byte magic
    while len(tokens) < count:
        if i >= len(data):
            raise ImageFormatError(f"{path}: unexpected end of file in header")
        c = data[i : i + 1]
        if c == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        elif c.isdigit():
            j = i
            while j < len(data) and data[j : j + 1].isdigit():
                j += 1
            tokens.append(int(data[i:j]))
            i = j
        else:
            raise ImageFormatError(f"{path}: malformed header")
    if i >= len(data) or not data[i : i + 1].isspace():
        raise ImageFormatError(f"{path}: malformed header")
    return tokens + [i + 1]


def _load_netpbm(data: bytes, path) -> np.ndarray:
    magic = data[:2]
    channels = 3 if magic == b"P6" else 1
    width, height, maxval, offset = _netpbm_tokens(data, path, 3)
    if maxval > 255:
        raise ImageFormatError(f"{path}: unsupported bit depth (maxval {maxval})")
    if maxval < 1:
        raise ImageFormatError(f"{path}: bad maxval {maxval}")
    need = width * height * channels
    raster = data[offset : offset + need]
    if len(raster) < need:
        raise ImageFormatError(f"{path}: unexpected end of file in raster")
    arr = np.frombuffer(raster, dtype=np.uint8).astype(np.float64) / maxval
    if channels == 3:
        return arr.reshape(height, width, 3)
    return arr.reshape(height, width)


def _load_png(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            if im.mode == "P":
                im = im.convert("RGB")
            if im.mode not in ("L", "RGB"):
                if im.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                    raise ImageFormatError(f"{path}: unsupported bit depth")
                raise ImageFormatError(f"{path}: unsupported pixel format {im.mode}")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"{path}: not a valid image file") from exc
    return arr


def load_image(path) -> np.ndarray:
    """Load a PNG, PPM (P6), or PGM (P5) file to a float image in [0, 1]."""
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ImageFormatError(f"{path}: {exc.strerror}") from exc
    if data[:2] in (b"P5", b"P6"):
        return _load_netpbm(data, path)
    if data[: len(_PNG_MAGIC)] == _PNG_MAGIC:
        return _load_png(path)
    raise ImageFormatError(f"{path}: unrecognized image format")


def save_image(img: np.ndarray, path) -> None:
    """Save a float image to PNG/PPM/PGM chosen by the file extension.

    Grayscale arrays go to PGM or grayscale PNG; (H, W, 3) arrays to PPM
    or RGB PNG.  Values are rounded to 8 bits with clamping.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[-1] != 3):
        raise ImageFormatError(f"{path}: expected (H, W) or (H, W, 3) image data")
    name = str(path).lower()
    data = _to_bytes(img)
    if name.endswith(".png"):
        mode = "L" if img.ndim == 2 else "RGB"
        Image.fromarray(data, mode=mode).save(path, format="PNG")
        return
    if name.endswith(".ppm"):
        if img.ndim != 3:
            raise ImageFormatError(f"{path}: PPM holds color images; use .pgm for gray")
        header = f"P6\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    elif name.endswith(".pgm"):
        if img.ndim != 2:
            raise ImageFormatError(f"{path}: PGM holds gray images; use .ppm for color")
        header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode()
    else:
        raise ImageFormatError(f"{path}: unknown output format (use .png/.ppm/.pgm)")
    with open(path, "wb") as fh:
        fh.write(header + data.tobytes())
