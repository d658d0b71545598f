"""Fourier pseudospectral discretisation and 1D Schrödinger spectra.

Every image row and column is treated as a periodic potential sampled on a
uniform grid over ``[0, 2*pi)``.  The operator ``-h^2 d^2/dx^2 - V/2`` is
discretised with the Fourier second-derivative matrix and diagonalised with a
dense symmetric eigensolver; only the bound states (negative eigenvalues) are
kept.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Grid",
    "LineSpectrum",
    "ImageSpectra",
    "fourier_d2",
    "line_spectrum",
    "decompose_image",
]

CUTOFF_RTOL = 1e-10


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid of ``q`` samples on ``[0, 2*pi)``."""

    q: int

    def __post_init__(self):
        if self.q < 2:
            raise ValueError(f"grid needs at least 2 samples, got {self.q}")

    @property
    def delta(self) -> float:
        return 2.0 * math.pi / self.q

    @property
    def points(self) -> np.ndarray:
        return self.delta * np.arange(self.q)


@dataclass(frozen=True)
class LineSpectrum:
    """Bound states of one row or column operator.

    ``eigenvalues`` is ascending and strictly negative; column ``k`` of
    ``eigenfunctions`` is the matching eigenfunction, normalised so that
    ``delta * sum(psi**2) == 1``.
    """

    h: float
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray

    @property
    def m(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def q(self) -> int:
        return self.eigenfunctions.shape[0]

    @property
    def delta(self) -> float:
        return 2.0 * math.pi / self.q


@dataclass(frozen=True)
class ImageSpectra:
    """Row and column spectra of an image for one value of ``h``.

    ``rows[i]`` holds the spectrum with potential ``image[i, :]`` (its
    eigenfunctions are indexed by column), ``cols[j]`` the spectrum with
    potential ``image[:, j]`` (indexed by row).
    """

    h: float
    rows: tuple[LineSpectrum, ...]
    cols: tuple[LineSpectrum, ...]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.cols)


@lru_cache(maxsize=64)
def _fourier_d2_cached(q: int) -> np.ndarray:
    dx = 2.0 * math.pi / q
    k = np.arange(1, q)
    sign = np.where(k % 2 == 0, 1.0, -1.0)
    half = k * dx / 2.0
    column = np.empty(q)
    if q % 2 == 0:
        column[0] = -math.pi**2 / (3.0 * dx**2) - 1.0 / 6.0
        column[1:] = -sign / (2.0 * np.sin(half) ** 2)
    else:
        column[0] = -math.pi**2 / (3.0 * dx**2) + 1.0 / 12.0
        column[1:] = -sign / (2.0 * np.sin(half) * np.tan(half))
    # Toeplitz from the first column; the column itself is symmetric in k <-> q-k.
    idx = np.abs(np.subtract.outer(np.arange(q), np.arange(q)))
    d2 = column[idx]
    d2 = 0.5 * (d2 + d2.T)
    d2.setflags(write=False)
    return d2


def fourier_d2(q: int) -> np.ndarray:
    """Periodic Fourier second-derivative matrix on ``q`` points of ``[0, 2*pi)``.

    The closed-form entries follow Trefethen, *Spectral Methods in MATLAB*,
    for both parities of ``q``.  The matrix is symmetric, annihilates
    constants, and has eigenvalues ``-k**2`` for the wavenumbers resolved on
    the grid (including the Nyquist mode ``k = q/2`` when ``q`` is even).

    Returns a read-only array shared between calls; copy before mutating.
    """
    q = int(q)
    if q < 2:
        raise ValueError(f"fourier_d2 needs q >= 2, got {q}")
    return _fourier_d2_cached(q)


def _check_potential(potential) -> np.ndarray:
    p = np.asarray(potential, dtype=float)
    if p.ndim != 1:
        raise ValueError("potential must be a 1D vector")
    if p.shape[0] < 2:
        raise ValueError("potential needs at least 2 samples")
    if not np.all(np.isfinite(p)):
        raise ValueError("potential contains non-finite entries")
    if np.any(p < 0):
        raise ValueError("potential must be non-negative")
    return p


def _canonical_signs(vectors: np.ndarray) -> np.ndarray:
    # First component that is clearly nonzero becomes positive.
    if vectors.shape[1] == 0:
        return vectors
    scale = np.max(np.abs(vectors), axis=0)
    significant = np.abs(vectors) > 1e-8 * scale
    first = np.argmax(significant, axis=0)
    signs = np.sign(vectors[first, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def operator_matrix(potential, h: float) -> np.ndarray:
    """Dense matrix ``-h^2 D2 - diag(potential / 2)``."""
    p = np.asarray(potential, dtype=float)
    m = -(h * h) * fourier_d2(p.shape[0])
    m[np.diag_indices_from(m)] -= 0.5 * p
    return m


def line_spectrum(potential, h: float) -> LineSpectrum:
    """Negative eigenvalues and normalised eigenfunctions of one line operator.

    Eigenvalues below ``-1e-10 * max(1, max(potential))`` are retained, which
    drops the numerically-zero constant mode of a vanishing potential.
    """
    p = _check_potential(potential)
    h = float(h)
    if not (math.isfinite(h) and h > 0):
        raise ValueError(f"h must be positive and finite, got {h}")

    q = p.shape[0]
    values, vectors = np.linalg.eigh(operator_matrix(p, h))
    cutoff = -CUTOFF_RTOL * max(1.0, float(np.max(p)))
    keep = values < cutoff
    values = values[keep]
    vectors = vectors[:, keep]
    # eigh returns unit Euclidean norm; rescale to the delta-weighted L2 norm.
    vectors = _canonical_signs(vectors) / math.sqrt(2.0 * math.pi / q)
    values.setflags(write=False)
    vectors.setflags(write=False)
    return LineSpectrum(h=h, eigenvalues=values, eigenfunctions=vectors)


def decompose_image(image, h: float, *, require_square: bool = True,
                    workers: int | None = None) -> ImageSpectra:
    """Solve the row and column eigenproblems of ``image``.

    ``workers`` > 1 runs the independent line solves on a thread pool; the
    result does not depend on it.  Rectangular images are accepted when
    ``require_square`` is false, each line using its own grid length.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("image must be a 2D array")
    if require_square and img.shape[0] != img.shape[1]:
        raise ValueError(f"image must be square, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite entries")
    if np.any(img < 0):
        raise ValueError("image must be non-negative")
    h = float(h)
    if not (math.isfinite(h) and h > 0):
        raise ValueError(f"h must be positive and finite, got {h}")

    lines = [img[i, :] for i in range(img.shape[0])]
    lines += [img[:, j] for j in range(img.shape[1])]
    if workers is not None and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(lambda p: line_spectrum(p, h), lines))
    else:
        spectra = [line_spectrum(p, h) for p in lines]
    n_rows = img.shape[0]
    return ImageSpectra(h=h, rows=tuple(spectra[:n_rows]), cols=tuple(spectra[n_rows:]))
