"""Grayscale image loading, saving and downscaling for the CLI.

Images are exchanged with the numerical code as float64 matrices in [0, 1].
8-bit sources map through v / 255; RGB rasters are reduced to Rec.601 luma
before mapping.  Writing quantizes with round-half-away-from-zero to 8-bit
PNG or binary PGM (P5, maxval 255).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError

OUTPUT_FORMATS = ("png8", "pgm8")

_FORMAT_SUFFIX = {"png8": ".png", "pgm8": ".pgm"}


def load_image(path) -> np.ndarray:
    """Load a grayscale or RGB raster file as a [0, 1] float64 matrix."""
    p = Path(path)
    if not p.is_file():
        raise InvalidInputError(f"image file not found: {p}")
    try:
        with Image.open(p) as im:
            im.load()
            if im.mode == "L":
                arr = np.asarray(im, dtype=np.float64)
            else:
                rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
                arr = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    except InvalidInputError:
        raise
    except Exception as exc:
        raise InvalidInputError(f"cannot decode image {p}: {exc}") from exc
    if arr.ndim != 2 or arr.shape[0] < 2 or arr.shape[1] < 2:
        raise InvalidInputError(
            f"image {p} is too small: need at least 2x2 pixels, got {arr.shape}"
        )
    return arr / 255.0


def save_image(img, path, fmt: str = "png8") -> None:
    """Quantize a [0, 1] matrix to 8 bits and write it as PNG or PGM."""
    if fmt not in OUTPUT_FORMATS:
        raise InvalidInputError(f"unknown output format {fmt!r}, expected one of {OUTPUT_FORMATS}")
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"image must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise InvalidInputError("image contains NaN or Inf pixels")
    lo = float(arr.min())
    hi = float(arr.max())
    if lo < -1e-9 or hi > 1.0 + 1e-9:
        raise InvalidInputError(f"pixels must lie in [0, 1] before saving, got [{lo:g}, {hi:g}]")
    # round half away from zero; values are nonnegative so floor(v + 0.5) does it
    q = np.floor(np.clip(arr, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    p = Path(path)
    try:
        if fmt == "png8":
            Image.fromarray(q, mode="L").save(p, format="PNG")
        else:
            h, w = q.shape
            with open(p, "wb") as fh:
                fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
                fh.write(q.tobytes())
    except OSError as exc:
        raise InvalidInputError(f"cannot write image {p}: {exc}") from exc


def format_for_path(path, default: str = "png8") -> str:
    """Pick the output format implied by a file suffix (.pgm -> pgm8)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".pgm":
        return "pgm8"
    if suffix == ".png":
        return "png8"
    return default


def suffix_for_format(fmt: str) -> str:
    return _FORMAT_SUFFIX[fmt]


def resize_max_dim(img, max_dim: int) -> np.ndarray:
    """Bilinearly downscale so the longer side is at most ``max_dim`` pixels.

    Images already within the cap are returned unchanged (as a copy).  Used
    to keep whole-image decomposition affordable; cost grows with the cube of
    the longer side.
    """
    if int(max_dim) < 2:
        raise InvalidInputError(f"max_dim must be >= 2, got {max_dim}")
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidInputError(f"image must be 2-D, got shape {arr.shape}")
    h, w = arr.shape
    longest = max(h, w)
    if longest <= int(max_dim):
        return arr.copy()
    scale = int(max_dim) / longest
    new_h = max(2, int(round(h * scale)))
    new_w = max(2, int(round(w * scale)))
    im = Image.fromarray(arr.astype(np.float32), mode="F")
    resized = im.resize((new_w, new_h), Image.Resampling.BILINEAR)
    out = np.asarray(resized, dtype=np.float64)
    return np.clip(out, 0.0, 1.0)
