"""Pixelwise 2D-SCSA reconstruction from row/column spectra."""

from __future__ import annotations

import hashlib
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .spectral import ImageSpectra, decompose_image

__all__ = [
    "ScsaParams",
    "SpectraCache",
    "semiclassical_constant",
    "reconstruct_pixel",
    "reconstruct_from_spectra",
    "reconstruct",
    "reconstruct_with_field",
    "default_cache",
]

FLUSH = 1e-300


@dataclass(frozen=True)
class ScsaParams:
    h: float
    gamma: float

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"h must be positive and finite, got {self.h}")
        _check_gamma(self.gamma)


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma < 0:
        raise ValueError(f"gamma must be non-negative and finite, got {gamma}")
    return gamma


def semiclassical_constant(gamma: float) -> float:
    """``Gamma(g+1) / (4*pi*Gamma(g+2))``, i.e. ``1 / (4*pi*(g+1))``."""
    gamma = _check_gamma(gamma)
    return 1.0 / (4.0 * math.pi * (gamma + 1.0))


class SpectraCache:
    """Thread-safe LRU of :class:`ImageSpectra` keyed by image content and ``h``.

    Lookups for a key already being computed by another thread wait for that
    result instead of solving the eigenproblems twice.
    """

    def __init__(self, maxsize: int = 16):
        self.maxsize = maxsize
        self._data: OrderedDict = OrderedDict()
        self._pending: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(image: np.ndarray, h: float) -> tuple:
        img = np.ascontiguousarray(image, dtype=float)
        digest = hashlib.sha1(img.tobytes()).hexdigest()
        return digest, img.shape, round(float(h), 9)

    def get(self, image, h: float, *, require_square: bool = True) -> ImageSpectra:
        key = self.key(image, h)
        with self._lock:
            if key in self._data:
                self._data.move_to_end(key)
                self.hits += 1
                return self._data[key]
            event = self._pending.get(key)
            owner = event is None
            if owner:
                event = self._pending[key] = threading.Event()
                self.misses += 1
        if not owner:
            event.wait()
            with self._lock:
                if key in self._data:
                    self.hits += 1
                    return self._data[key]
            return self.get(image, h, require_square=require_square)
        try:
            spectra = decompose_image(image, h, require_square=require_square)
            with self._lock:
                self._data[key] = spectra
                while len(self._data) > self.maxsize:
                    self._data.popitem(last=False)
            return spectra
        finally:
            with self._lock:
                self._pending.pop(key, None)
            event.set()

    def clear(self):
        with self._lock:
            self._data.clear()
            self.hits = self.misses = 0


default_cache = SpectraCache()


def reconstruct_pixel(spectra: ImageSpectra, i: int, j: int, gamma: float) -> float:
    """Evaluate the reconstruction at a single pixel ``(i, j)``."""
    n_rows, n_cols = spectra.shape
    if not (0 <= i < n_rows and 0 <= j < n_cols):
        raise IndexError(f"pixel ({i}, {j}) outside image of shape {spectra.shape}")
    gamma = _check_gamma(gamma)
    row, col = spectra.rows[i], spectra.cols[j]
    if row.m == 0 or col.m == 0:
        return 0.0
    base = -(row.eigenvalues[:, None] + col.eigenvalues[None, :])
    weight = row.eigenfunctions[j, :][:, None] ** 2 * col.eigenfunctions[i, :][None, :] ** 2
    total = float(np.sum(weight * _power(base, gamma)))
    return _finish(total, spectra.h, gamma)


def _power(base: np.ndarray, gamma) -> np.ndarray:
    # exp(gamma*log(base)); non-positive bases contribute nothing.
    positive = base > 0
    logb = np.log(np.where(positive, base, 1.0))
    out = np.exp(gamma * logb)
    out = np.where(positive & (out >= FLUSH), out, 0.0)
    return out


def _finish(total: float, h: float, gamma: float) -> float:
    scaled = h * h * total / semiclassical_constant(gamma)
    return max(scaled, 0.0) ** (1.0 / (1.0 + gamma))


def _padded(lines, index_len):
    """Stack spectra into ``(n_lines, m_max)`` eigenvalues and ``(n_lines, index_len, m_max)`` squared eigenfunctions."""
    m_max = max((s.m for s in lines), default=0)
    values = np.zeros((len(lines), m_max))
    weights = np.zeros((len(lines), index_len, m_max))
    for n, s in enumerate(lines):
        values[n, : s.m] = s.eigenvalues
        weights[n, :, : s.m] = s.eigenfunctions**2
    return values, weights


def reconstruct_from_spectra(spectra: ImageSpectra, gamma) -> np.ndarray:
    """Reconstruct every pixel from precomputed spectra.

    ``gamma`` is either a scalar or an array with the image shape holding one
    exponent per pixel.
    """
    n_rows, n_cols = spectra.shape
    scalar = np.ndim(gamma) == 0
    if scalar:
        gamma_field = np.full((n_rows, n_cols), _check_gamma(gamma))
    else:
        gamma_field = np.asarray(gamma, dtype=float)
        if gamma_field.shape != (n_rows, n_cols):
            raise ValueError(f"gamma field shape {gamma_field.shape} != image shape {(n_rows, n_cols)}")
        if not np.all(np.isfinite(gamma_field)) or np.any(gamma_field < 0):
            raise ValueError("gamma field entries must be non-negative and finite")

    # beta[i, k], theta2[i, j, k]: row spectra; rho[j, r], phi2[j, i, r]: column spectra.
    beta, theta2 = _padded(spectra.rows, n_cols)
    rho, phi2 = _padded(spectra.cols, n_rows)
    k_mask = np.arange(beta.shape[1])[None, :] < np.array([s.m for s in spectra.rows])[:, None]
    r_mask = np.arange(rho.shape[1])[None, :] < np.array([s.m for s in spectra.cols])[:, None]

    out = np.zeros((n_rows, n_cols))
    if beta.shape[1] == 0 or rho.shape[1] == 0:
        return out
    for i in range(n_rows):
        # base[j, k, r] = -(beta[i, k] + rho[j, r])
        base = -(beta[i][None, :, None] + rho[:, None, :])
        valid = k_mask[i][None, :, None] & r_mask[:, None, :]
        base = np.where(valid, base, 0.0)
        positive = base > 0
        logb = np.log(np.where(positive, base, 1.0))
        g = gamma_field[i][:, None, None]
        terms = np.exp(g * logb)
        terms = np.where(positive & (terms >= FLUSH), terms, 0.0)
        w = theta2[i][:, :, None] * phi2[:, i, :][:, None, :]
        total = np.einsum("jkr,jkr->j", w, terms)
        gi = gamma_field[i]
        scaled = spectra.h**2 * total * 4.0 * np.pi * (gi + 1.0)
        out[i] = np.power(np.maximum(scaled, 0.0), 1.0 / (1.0 + gi))
    return out


def reconstruct(image, params: ScsaParams, *, cache: SpectraCache | None = None) -> np.ndarray:
    """Uniform-gamma reconstruction of a square non-negative image."""
    spectra = _spectra(image, params.h, cache, require_square=True)
    return reconstruct_from_spectra(spectra, params.gamma)


def reconstruct_with_field(image, h: float, field, *, cache: SpectraCache | None = None,
                           require_square: bool = True) -> np.ndarray:
    """Reconstruction with one gamma per pixel; spectra are shared across gamma values."""
    img = np.asarray(image, dtype=float)
    field = np.asarray(field, dtype=float)
    if field.shape != img.shape:
        raise ValueError(f"gamma field shape {field.shape} != image shape {img.shape}")
    spectra = _spectra(img, h, cache, require_square=require_square)
    return reconstruct_from_spectra(spectra, field)


def _spectra(image, h, cache, *, require_square):
    if cache is None:
        return decompose_image(image, h, require_square=require_square)
    return cache.get(image, h, require_square=require_square)
