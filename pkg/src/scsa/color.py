"""RGB/HSV conversion and simple intensity transforms on ``[0, 1]`` images."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "HsvImage",
    "rgb_to_hsv",
    "hsv_to_rgb",
    "min_max_normalize",
    "gamma_correction",
    "luminance",
]


@dataclass(frozen=True)
class HsvImage:
    """Hue in degrees ``[0, 360)``, saturation and value in ``[0, 1]``."""

    h: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def shape(self):
        return self.v.shape


def _check_rgb(rgb) -> np.ndarray:
    rgb = np.asarray(rgb, dtype=float)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected trailing channel axis of size 3, got shape {rgb.shape}")
    if not np.all(np.isfinite(rgb)):
        raise ValueError("image contains non-finite values")
    if rgb.min(initial=0.0) < 0 or rgb.max(initial=0.0) > 1:
        raise ValueError("RGB channels must lie in [0, 1]")
    return rgb


def rgb_to_hsv(rgb) -> HsvImage:
    """Standard hexcone RGB -> HSV.  Gray pixels get hue 0 and saturation 0."""
    rgb = _check_rgb(rgb)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.divide(c, v, out=np.zeros_like(v), where=v > 0)

    safe_c = np.where(c > 0, c, 1.0)
    hue = np.zeros_like(v)
    is_r = (v == r) & (c > 0)
    is_g = (v == g) & (c > 0) & ~is_r
    is_b = (c > 0) & ~is_r & ~is_g
    hue = np.where(is_r, np.mod((g - b) / safe_c, 6.0), hue)
    hue = np.where(is_g, (b - r) / safe_c + 2.0, hue)
    hue = np.where(is_b, (r - g) / safe_c + 4.0, hue)
    hue = 60.0 * hue
    hue = np.where(hue >= 360.0, hue - 360.0, hue)
    return HsvImage(h=hue, s=s, v=v)


def hsv_to_rgb(hsv: HsvImage) -> np.ndarray:
    h = np.asarray(hsv.h, dtype=float)
    s = np.asarray(hsv.s, dtype=float)
    v = np.asarray(hsv.v, dtype=float)
    c = v * s
    hp = np.mod(h, 360.0) / 60.0
    x = c * (1.0 - np.abs(np.mod(hp, 2.0) - 1.0))
    sector = np.floor(hp).astype(int) % 6
    z = np.zeros_like(c)
    # (r, g, b) before adding the offset v - c, per hexcone sector
    table = [(c, x, z), (x, c, z), (z, c, x), (z, x, c), (x, z, c), (c, z, x)]
    out = np.zeros(v.shape + (3,))
    for k, (r1, g1, b1) in enumerate(table):
        mask = sector == k
        out[..., 0] = np.where(mask, r1, out[..., 0])
        out[..., 1] = np.where(mask, g1, out[..., 1])
        out[..., 2] = np.where(mask, b1, out[..., 2])
    out += (v - c)[..., None]
    return np.clip(out, 0.0, 1.0)


def min_max_normalize(image) -> tuple[np.ndarray, bool]:
    """Affinely map to ``[0, 1]``.

    Returns ``(normalized, degenerate)``; a constant input maps to zeros with
    ``degenerate`` set.
    """
    a = np.asarray(image, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError("cannot normalize non-finite values")
    lo, hi = float(a.min()), float(a.max())
    if hi <= lo:
        return np.zeros_like(a), True
    return (a - lo) / (hi - lo), False


def gamma_correction(image, c_bar: float = 1.0, gamma_bar: float = 1.0) -> np.ndarray:
    """Power-law transform ``c_bar * image**gamma_bar`` clipped to ``[0, 1]``."""
    if not gamma_bar > 0:
        raise ValueError(f"gamma_bar must be positive, got {gamma_bar}")
    if not c_bar > 0:
        raise ValueError(f"c_bar must be positive, got {c_bar}")
    a = np.asarray(image, dtype=float)
    if a.min(initial=0.0) < 0 or a.max(initial=0.0) > 1:
        raise ValueError("gamma_correction expects values in [0, 1]")
    return np.clip(c_bar * np.power(a, gamma_bar), 0.0, 1.0)


def luminance(rgb) -> np.ndarray:
    """Rec. 601 luma of an ``(..., 3)`` array; 2D input is returned as float."""
    a = np.asarray(rgb, dtype=float)
    if a.ndim == 2:
        return a
    return 0.299 * a[..., 0] + 0.587 * a[..., 1] + 0.114 * a[..., 2]
