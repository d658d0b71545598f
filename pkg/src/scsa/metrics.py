"""Full-reference image quality metrics on the 8-bit intensity scale.

All functions take images on ``[0, 255]``: either 2D (one channel) or
``(H, W, 3)`` RGB.  MSE, PSNR and entropy use every channel; the structural
metrics (AMBE, SSIM, GMSD, PCQI, FSIM) work on Rec. 601 luma.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .color import luminance

__all__ = [
    "MetricsReport",
    "mse",
    "psnr",
    "psnr_from_mse",
    "ambe",
    "entropy",
    "ssim",
    "ssim_global",
    "gmsd",
    "pcqi",
    "fsim",
    "phase_congruency",
    "compute_metrics",
    "METRIC_NAMES",
]

PEAK = 255.0
SSIM_K1, SSIM_K2 = 0.01, 0.03
GMSD_C = 170.0
PCQI_C = 3.0
PCQI_L = 256.0
FSIM_T1, FSIM_T2 = 0.85, 160.0

METRIC_NAMES = ("mse", "psnr", "ambe", "entropy", "ssim", "gmsd", "fsim", "pcqi")


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    psnr: float
    ambe: float
    entropy: float
    ssim: float
    gmsd: float
    fsim: float
    pcqi: float

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim not in (2, 3) or (a.ndim == 3 and a.shape[2] != 3):
        raise ValueError(f"expected a 2D or (H, W, 3) image, got shape {a.shape}")
    return a, b


def _luma_pair(a, b):
    a, b = _pair(a, b)
    return luminance(a), luminance(b)


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def psnr_from_mse(value: float, peak: float = PEAK) -> float:
    if value < 0:
        raise ValueError("MSE cannot be negative")
    if value == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / value)


def psnr(a, b) -> float:
    """PSNR in dB; identical images give ``math.inf``."""
    return psnr_from_mse(mse(a, b))


def ambe(a, b) -> float:
    la, lb = _luma_pair(a, b)
    return abs(float(la.mean()) - float(lb.mean()))


def entropy(image) -> float:
    """Shannon entropy in bits of the 256-bin histogram, summed over channels."""
    a = np.asarray(image, dtype=float)
    levels = np.clip(np.rint(a), 0, 255).astype(np.int64)
    channels = [levels] if a.ndim == 2 else [levels[..., c] for c in range(a.shape[-1])]
    total = 0.0
    for ch in channels:
        counts = np.bincount(ch.ravel(), minlength=256)
        p = counts[counts > 0] / ch.size
        total += float(-np.sum(p * np.log2(p)))
    return total


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Separable 1D factor of the normalized 2D Gaussian window."""
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, w1d: np.ndarray) -> np.ndarray:
    n = w1d.shape[0]
    tmp = sliding_window_view(img, n, axis=0) @ w1d
    return sliding_window_view(tmp, n, axis=1) @ w1d


def _local_stats(a, b, w1d):
    mu_a = _filter_valid(a, w1d)
    mu_b = _filter_valid(b, w1d)
    var_a = _filter_valid(a * a, w1d) - mu_a * mu_a
    var_b = _filter_valid(b * b, w1d) - mu_b * mu_b
    cov = _filter_valid(a * b, w1d) - mu_a * mu_b
    return mu_a, mu_b, var_a, var_b, cov


def ssim_global(a, b) -> float:
    """Single-window SSIM over the whole image (population statistics)."""
    x, y = _luma_pair(a, b)
    c1, c2 = (SSIM_K1 * PEAK) ** 2, (SSIM_K2 * PEAK) ** 2
    mx, my = x.mean(), y.mean()
    vx, vy = x.var(), y.var()
    cov = np.mean((x - mx) * (y - my))
    return float((2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))


def ssim_map(a, b, window: int = 11, sigma: float = 1.5) -> np.ndarray:
    x, y = _luma_pair(a, b)
    if min(x.shape) < window:
        raise ValueError(f"image smaller than the {window}x{window} SSIM window")
    c1, c2 = (SSIM_K1 * PEAK) ** 2, (SSIM_K2 * PEAK) ** 2
    mu_x, mu_y, var_x, var_y, cov = _local_stats(x, y, gaussian_window(window, sigma))
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return num / den


def ssim(a, b, window: int = 11, sigma: float = 1.5) -> float:
    """Mean Gaussian-windowed SSIM over the valid region.

    Images smaller than the window fall back to :func:`ssim_global`.
    """
    x, y = _luma_pair(a, b)
    if min(x.shape) < window:
        return ssim_global(x, y)
    return float(np.mean(ssim_map(x, y, window, sigma)))


_PREWITT_X = np.array([[1.0, 0.0, -1.0]] * 3) / 3.0
_PREWITT_Y = _PREWITT_X.T


def _correlate_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    win = sliding_window_view(img, kernel.shape)
    return np.einsum("ijkl,kl->ij", win, kernel)


def gradient_magnitude_prewitt(img: np.ndarray) -> np.ndarray:
    gx = _correlate_valid(img, _PREWITT_X)
    gy = _correlate_valid(img, _PREWITT_Y)
    return np.sqrt(gx * gx + gy * gy)


def gmsd(a, b, c: float = GMSD_C) -> float:
    """Population standard deviation of the gradient-magnitude-similarity map."""
    x, y = _luma_pair(a, b)
    if min(x.shape) < 3:
        raise ValueError("GMSD needs images of at least 3x3 pixels")
    g1 = gradient_magnitude_prewitt(x)
    g2 = gradient_magnitude_prewitt(y)
    gms = (2 * g1 * g2 + c) / (g1 * g1 + g2 * g2 + c)
    return float(np.std(gms))


def pcqi(a, b, window: int = 11, sigma: float = 1.5) -> float:
    """Patch-based contrast quality index of ``b`` relative to reference ``a``.

    Product of a mean-intensity term ``exp(-|mu_a - mu_b| / L)``, a contrast
    change term ``(4/pi) atan((cov + C) / (var_a + C))`` and a structure term
    ``(cov + C) / (sd_a sd_b + C)``, averaged over Gaussian-weighted patches.
    Not symmetric: contrast gains in ``b`` push the index above 1.
    """
    x, y = _luma_pair(a, b)
    if min(x.shape) < window:
        raise ValueError(f"image smaller than the {window}x{window} PCQI window")
    mu_x, mu_y, var_x, var_y, cov = _local_stats(x, y, gaussian_window(window, sigma))
    var_x = np.maximum(var_x, 0.0)
    var_y = np.maximum(var_y, 0.0)
    contrast = (4.0 / math.pi) * np.arctan((cov + PCQI_C) / (var_x + PCQI_C))
    structure = (cov + PCQI_C) / (np.sqrt(var_x) * np.sqrt(var_y) + PCQI_C)
    mean_term = np.exp(-np.abs(mu_x - mu_y) / PCQI_L)
    return float(np.mean(mean_term * contrast * structure))


# -- FSIM -------------------------------------------------------------------

def _centered_range(n: int) -> np.ndarray:
    if n % 2:
        return np.arange(-(n - 1) / 2, (n - 1) / 2 + 1) / (n - 1)
    return np.arange(-n / 2, n / 2) / n


def _frequency_grid(rows: int, cols: int):
    x, y = np.meshgrid(_centered_range(cols), _centered_range(rows))
    radius = np.sqrt(x * x + y * y)
    theta = np.arctan2(-y, x)
    return np.fft.ifftshift(radius), np.fft.ifftshift(theta)


def _lowpass(rows: int, cols: int, cutoff: float = 0.45, order: int = 15) -> np.ndarray:
    x, y = np.meshgrid(_centered_range(cols), _centered_range(rows))
    radius = np.sqrt(x * x + y * y)
    return np.fft.ifftshift(1.0 / (1.0 + (radius / cutoff) ** (2 * order)))


def log_gabor_bank(rows: int, cols: int, nscale: int = 4, norient: int = 4,
                   min_wavelength: float = 6.0, mult: float = 2.0,
                   sigma_onf: float = 0.55, d_theta_on_sigma: float = 1.2):
    """Frequency-domain log-Gabor filters, ``filters[o][s]`` of shape ``(rows, cols)``."""
    radius, theta = _frequency_grid(rows, cols)
    radius = radius.copy()
    radius[0, 0] = 1.0
    lp = _lowpass(rows, cols)
    radial = []
    for s in range(nscale):
        fo = 1.0 / (min_wavelength * mult**s)
        lg = np.exp(-(np.log(radius / fo) ** 2) / (2.0 * math.log(sigma_onf) ** 2)) * lp
        lg[0, 0] = 0.0
        radial.append(lg)
    theta_sigma = math.pi / norient / d_theta_on_sigma
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    filters = []
    for o in range(norient):
        angle = o * math.pi / norient
        ds = sin_t * math.cos(angle) - cos_t * math.sin(angle)
        dc = cos_t * math.cos(angle) + sin_t * math.sin(angle)
        spread = np.exp(-(np.abs(np.arctan2(ds, dc)) ** 2) / (2.0 * theta_sigma**2))
        filters.append([lg * spread for lg in radial])
    return filters


def phase_congruency(img, nscale: int = 4, norient: int = 4, k: float = 2.0,
                     epsilon: float = 1e-4, fft2=np.fft.fft2, ifft2=np.fft.ifft2) -> np.ndarray:
    """Kovesi-style phase congruency map (log-Gabor bank, noise compensated).

    ``fft2``/``ifft2`` are injectable so tests can substitute a naive DFT.
    """
    img = np.asarray(img, dtype=float)
    rows, cols = img.shape
    spectrum = fft2(img)
    filters = log_gabor_bank(rows, cols, nscale, norient)
    energy_all = np.zeros((rows, cols))
    an_all = np.zeros((rows, cols))
    for o in range(norient):
        sum_e = np.zeros((rows, cols))
        sum_o = np.zeros((rows, cols))
        sum_an = np.zeros((rows, cols))
        responses = []
        spatial = []
        for s in range(nscale):
            filt = filters[o][s]
            spatial.append(np.real(ifft2(filt)) * math.sqrt(rows * cols))
            eo = ifft2(spectrum * filt)
            responses.append(eo)
            sum_an += np.abs(eo)
            sum_e += eo.real
            sum_o += eo.imag
            if s == 0:
                em_n = float(np.sum(filt**2))
        x_energy = np.sqrt(sum_e**2 + sum_o**2) + epsilon
        mean_e = sum_e / x_energy
        mean_o = sum_o / x_energy
        energy = np.zeros((rows, cols))
        for eo in responses:
            e, od = eo.real, eo.imag
            energy += e * mean_e + od * mean_o - np.abs(e * mean_o - od * mean_e)

        median_e2n = float(np.median(np.abs(responses[0]) ** 2))
        mean_e2n = -median_e2n / math.log(0.5)
        noise_power = mean_e2n / em_n
        est_sum_an2 = sum(float(np.sum(f**2)) for f in spatial)
        est_sum_aiaj = 0.0
        for si in range(nscale - 1):
            for sj in range(si + 1, nscale):
                est_sum_aiaj += float(np.sum(spatial[si] * spatial[sj]))
        noise_energy2 = 2 * noise_power * est_sum_an2 + 4 * noise_power * est_sum_aiaj
        tau = math.sqrt(max(noise_energy2, 0.0) / 2.0)
        threshold = tau * math.sqrt(math.pi / 2.0) + k * math.sqrt((2.0 - math.pi / 2.0) * tau * tau)
        threshold /= 1.7
        energy_all += np.maximum(energy - threshold, 0.0)
        an_all += sum_an
    return np.divide(energy_all, an_all, out=np.zeros_like(energy_all), where=an_all > 0)


_SCHARR_X = np.array([[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]]) / 16.0
_SCHARR_Y = _SCHARR_X.T


def _correlate_same(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    pr, pc = kernel.shape[0] // 2, kernel.shape[1] // 2
    padded = np.pad(img, ((pr, pr), (pc, pc)))
    return _correlate_valid(padded, kernel)


def _fsim_downsample(img: np.ndarray) -> np.ndarray:
    f = max(1, int(round(min(img.shape) / 256)))
    if f == 1:
        return img
    kernel = np.full((f, f), 1.0 / (f * f))
    # 'same' convolution with the centre convention of an even-sized kernel
    top, left = (f - 1) // 2, (f - 1) // 2
    padded = np.pad(img, ((top, f - 1 - top), (left, f - 1 - left)))
    return _correlate_valid(padded, kernel)[::f, ::f]


def fsim(a, b, pc_a=None, pc_b=None) -> float:
    """Feature similarity index on luma (phase congruency + gradient magnitude)."""
    x, y = _luma_pair(a, b)
    x, y = _fsim_downsample(x), _fsim_downsample(y)
    pc1 = phase_congruency(x) if pc_a is None else pc_a
    pc2 = phase_congruency(y) if pc_b is None else pc_b
    g1 = np.hypot(_correlate_same(x, _SCHARR_X), _correlate_same(x, _SCHARR_Y))
    g2 = np.hypot(_correlate_same(y, _SCHARR_X), _correlate_same(y, _SCHARR_Y))
    s_pc = (2 * pc1 * pc2 + FSIM_T1) / (pc1**2 + pc2**2 + FSIM_T1)
    s_g = (2 * g1 * g2 + FSIM_T2) / (g1**2 + g2**2 + FSIM_T2)
    pc_m = np.maximum(pc1, pc2)
    weight = float(np.sum(pc_m))
    if weight <= 0:
        # No phase structure anywhere (e.g. flat images): fall back to gradient similarity.
        return float(np.mean(s_g))
    return float(np.sum(s_pc * s_g * pc_m) / weight)


def compute_metrics(reference, test) -> MetricsReport:
    """All eight metrics; entropy is that of ``test``."""
    reference, test = _pair(reference, test)
    value = mse(reference, test)
    return MetricsReport(
        mse=value,
        psnr=psnr_from_mse(value),
        ambe=ambe(reference, test),
        entropy=entropy(test),
        ssim=ssim(reference, test),
        gmsd=gmsd(reference, test),
        fsim=fsim(reference, test),
        pcqi=pcqi(reference, test),
    )
