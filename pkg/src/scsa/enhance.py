"""Contrast enhancement of color images with per-cluster gamma SCSA.

Pipeline: RGB -> HSV, min-max normalise V, rescale to the 8-bit range,
cluster intensities, reconstruct V with one gamma per cluster, min-max
normalise the reconstruction and recombine with the untouched H and S.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .cluster import ClusterModel, SilhouetteReport, kmeans_pp, silhouette_select
from .color import HsvImage, hsv_to_rgb, min_max_normalize, rgb_to_hsv
from .metrics import MetricsReport, compute_metrics
from .reconstruct import SpectraCache, default_cache, reconstruct_with_field

log = logging.getLogger(__name__)

__all__ = [
    "EnhanceConfig",
    "EnhancedResult",
    "PreparedImage",
    "prepare",
    "cluster_value",
    "gamma_field",
    "apply_gamma_scsa",
    "enhance",
    "to_8bit",
    "as_rgb",
]

H_BOUNDS = (0.05, 20.0)
GAMMA_BOUNDS = (1.0, 15.0)


@dataclass
class EnhanceConfig:
    h: Union[float, str] = "auto"
    gammas: Union[Sequence[float], str] = "auto"
    k: Union[int, str] = "auto"
    seed: int = 0
    intensity_scale: float = 255.0
    k_min: int = 2
    k_max: int = 6
    sample_size: int = 2000
    ga: object = None  # optimize.GaConfig; defaults are used when None
    weights: tuple = (0.5, 0.5)
    compute_report: bool = True

    def __post_init__(self):
        if self.h != "auto" and not float(self.h) > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        if self.k != "auto" and int(self.k) < 1:
            raise ValueError(f"k must be a positive integer, got {self.k}")
        if self.gammas != "auto":
            self.gammas = tuple(float(g) for g in self.gammas)
            if any(not g >= 0 for g in self.gammas):
                raise ValueError("gammas must be non-negative")
        if (self.h == "auto") != (self.gammas == "auto"):
            raise ValueError("h and gammas must both be given or both be 'auto'")
        if not self.intensity_scale > 0:
            raise ValueError("intensity_scale must be positive")


@dataclass
class PreparedImage:
    rgb: np.ndarray
    hsv: HsvImage
    potential: np.ndarray
    degenerate: bool


@dataclass
class EnhancedResult:
    image: np.ndarray
    hsv: HsvImage
    cluster_model: ClusterModel | None
    h: float | None
    gammas: tuple
    metrics: MetricsReport | None
    degenerate: bool = False
    raw: np.ndarray | None = None
    silhouette: SilhouetteReport | None = None
    front: object = None
    extras: dict = field(default_factory=dict)


def as_rgb(image) -> np.ndarray:
    """Float RGB in ``[0, 1]``; 2D input is replicated to three channels."""
    a = np.asarray(image)
    if np.issubdtype(a.dtype, np.integer):
        a = a.astype(float) / 255.0
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        a = np.repeat(a[..., None], 3, axis=2)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected (H, W) or (H, W, 3) image, got {a.shape}")
    return a


def to_8bit(rgb) -> np.ndarray:
    """Quantise ``[0, 1]`` values to the integer grid ``0..255`` (kept as float)."""
    return np.rint(np.clip(np.asarray(rgb, dtype=float), 0.0, 1.0) * 255.0)


def prepare(image, intensity_scale: float = 255.0) -> PreparedImage:
    rgb = as_rgb(image)
    hsv = rgb_to_hsv(rgb)
    v, degenerate = min_max_normalize(hsv.v)
    return PreparedImage(rgb=rgb, hsv=hsv, potential=v * intensity_scale, degenerate=degenerate)


def cluster_value(prepared: PreparedImage, k="auto", seed: int = 0, k_min: int = 2,
                  k_max: int = 6, sample_size: int = 2000):
    """Cluster the rescaled V channel; returns ``(model, silhouette_report or None)``."""
    report = None
    if k == "auto":
        report = silhouette_select(prepared.potential, k_min, k_max, seed=seed,
                                   sample_size=sample_size)
        k = report.selected_k
    return kmeans_pp(prepared.potential, int(k), seed=seed), report


def gamma_field(labels: np.ndarray, gammas: Sequence[float]) -> np.ndarray:
    gammas = np.asarray(gammas, dtype=float)
    labels = np.asarray(labels)
    if labels.size and labels.max() >= gammas.shape[0]:
        raise ValueError(f"{gammas.shape[0]} gammas for {labels.max() + 1} clusters")
    return gammas[labels]


def apply_gamma_scsa(prepared: PreparedImage, model: ClusterModel, h: float,
                     gammas: Sequence[float], cache: SpectraCache | None = default_cache):
    """Reconstruct V with per-cluster gammas.

    Returns ``(rgb, hsv, raw)`` where ``raw`` is the reconstruction before
    the final min-max normalisation.  Raises ``ValueError`` when the
    reconstruction is constant (nothing to normalise).
    """
    if len(gammas) != model.k:
        raise ValueError(f"got {len(gammas)} gammas for {model.k} clusters")
    field_ = gamma_field(model.labels, gammas)
    raw = reconstruct_with_field(prepared.potential, h, field_, cache=cache, require_square=False)
    v, flat = min_max_normalize(raw)
    if flat:
        raise ValueError(f"reconstruction is constant for h={h}, gammas={tuple(gammas)}")
    hsv = HsvImage(h=prepared.hsv.h.copy(), s=prepared.hsv.s.copy(), v=v)
    return hsv_to_rgb(hsv), hsv, raw


def enhance(image, config: EnhanceConfig | None = None, *,
            cache: SpectraCache | None = default_cache) -> EnhancedResult:
    """Run the full enhancement pipeline on an RGB (or gray) image.

    With ``h``/``gammas`` set to ``"auto"`` the parameters come from an
    NSGA-II search followed by augmented-scalarisation selection.
    A constant-V input is returned unchanged with ``degenerate=True``.
    """
    config = config or EnhanceConfig()
    prepared = prepare(image, config.intensity_scale)
    if prepared.degenerate:
        log.warning("constant value channel; returning input unchanged")
        return EnhancedResult(image=prepared.rgb.copy(), hsv=prepared.hsv, cluster_model=None,
                              h=None, gammas=(), metrics=None, degenerate=True)

    model, report = cluster_value(prepared, config.k, config.seed, config.k_min,
                                  config.k_max, config.sample_size)
    front = None
    if config.gammas == "auto":
        from .optimize import GaConfig, asf_select, run_nsga2

        ga = config.ga or GaConfig(seed=config.seed)
        front = run_nsga2(prepared, model, ga, cache=cache)
        chosen, _ = asf_select(front, config.weights)
        h, gammas = chosen.h, chosen.gammas_for(model.k)
    else:
        h, gammas = float(config.h), tuple(config.gammas)
        if len(gammas) != model.k:
            raise ValueError(f"got {len(gammas)} gammas for {model.k} clusters")

    rgb, hsv, raw = apply_gamma_scsa(prepared, model, h, gammas, cache=cache)
    metrics = None
    if config.compute_report:
        metrics = compute_metrics(to_8bit(prepared.rgb), to_8bit(rgb))
    return EnhancedResult(image=rgb, hsv=hsv, cluster_model=model, h=h, gammas=tuple(gammas),
                          metrics=metrics, raw=raw, silhouette=report, front=front)
