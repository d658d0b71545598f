"""Contrast enhancement with gamma-weighted 2D semi-classical signal analysis."""

__version__ = "0.1.0"

from .cluster import ClusterModel, SilhouetteReport, kmeans_pp, silhouette_select
from .color import HsvImage, gamma_correction, hsv_to_rgb, min_max_normalize, rgb_to_hsv
from .enhance import EnhanceConfig, EnhancedResult, enhance
from .metrics import MetricsReport, compute_metrics
from .optimize import Chromosome, GaConfig, Objectives, ParetoFront, asf_select, run_nsga2
from .reconstruct import (
    ScsaParams,
    SpectraCache,
    reconstruct,
    reconstruct_pixel,
    reconstruct_with_field,
    semiclassical_constant,
)
from .spectral import Grid, ImageSpectra, LineSpectrum, decompose_image, fourier_d2, line_spectrum

__all__ = [
    "ClusterModel", "SilhouetteReport", "kmeans_pp", "silhouette_select",
    "HsvImage", "gamma_correction", "hsv_to_rgb", "min_max_normalize", "rgb_to_hsv",
    "EnhanceConfig", "EnhancedResult", "enhance",
    "MetricsReport", "compute_metrics",
    "Chromosome", "GaConfig", "Objectives", "ParetoFront", "asf_select", "run_nsga2",
    "ScsaParams", "SpectraCache", "reconstruct", "reconstruct_pixel", "reconstruct_with_field",
    "semiclassical_constant",
    "Grid", "ImageSpectra", "LineSpectrum", "decompose_image", "fourier_d2", "line_spectrum",
]
