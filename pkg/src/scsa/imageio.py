"""8-bit PNG / PPM / PGM reading and writing."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image

SUPPORTED_SUFFIXES = (".png", ".ppm", ".pgm", ".pnm")


def read_image(path) -> tuple[np.ndarray, bool]:
    """Load an image as floats in ``[0, 1]``.

    Returns ``(array, is_gray)``; gray images come back 2D, everything else
    as ``(H, W, 3)`` with any alpha channel dropped.
    """
    path = Path(path)
    with Image.open(path) as im:
        im.load()
        if im.mode in ("1", "L", "LA") or (im.mode == "P" and _is_gray_palette(im)):
            return np.asarray(im.convert("L"), dtype=float) / 255.0, True
        if im.mode not in ("RGB", "RGBA", "P"):
            raise OSError(f"{path}: unsupported image mode {im.mode!r} (8-bit only)")
        return np.asarray(im.convert("RGB"), dtype=float) / 255.0, False


def _is_gray_palette(im: Image.Image) -> bool:
    rgb = np.asarray(im.convert("RGB"))
    return bool(np.all(rgb[..., 0] == rgb[..., 1]) and np.all(rgb[..., 1] == rgb[..., 2]))


def to_uint8(image) -> np.ndarray:
    return np.rint(np.clip(np.asarray(image, dtype=float), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_image(path, image, gray: bool = False) -> None:
    """Write ``[0, 1]`` floats as 8-bit; format follows the file suffix."""
    path = Path(path)
    a = np.asarray(image, dtype=float)
    if gray and a.ndim == 3:
        a = a[..., 0]
    data = to_uint8(a)
    mode = "L" if data.ndim == 2 else "RGB"
    path.parent.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()
    fmt = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM", ".pnm": "PPM"}.get(suffix)
    if fmt is None:
        raise ValueError(f"unsupported output format {suffix!r}; use one of {SUPPORTED_SUFFIXES}")
    Image.fromarray(data, mode=mode).save(path, format=fmt)


def box_downsample(image, max_dim: int | None) -> tuple[np.ndarray, int]:
    """Average non-overlapping ``f x f`` blocks so the longer side is at most ``max_dim``.

    Trailing rows/columns that do not fill a block are dropped.  Returns the
    image and the factor ``f`` (1 when nothing was done).
    """
    a = np.asarray(image, dtype=float)
    if not max_dim or max(a.shape[:2]) <= max_dim:
        return a, 1
    f = math.ceil(max(a.shape[:2]) / max_dim)
    rows, cols = (a.shape[0] // f) * f, (a.shape[1] // f) * f
    a = a[:rows, :cols]
    shape = (rows // f, f, cols // f, f) + a.shape[2:]
    return a.reshape(shape).mean(axis=(1, 3)), f


def list_images(directory) -> list[Path]:
    directory = Path(directory)
    return sorted(p for p in directory.iterdir()
                  if p.is_file() and p.suffix.lower() in SUPPORTED_SUFFIXES)
