"""PSNR and SSIM for 8-bit grayscale images."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .exceptions import DimensionMismatch, TooSmall

PEAK = 255.0


@dataclass(frozen=True)
class QualityReport:
    image: str
    scheme: str
    M: int
    seed: int
    psnr_db: float
    ssim: float

    HEADER = ("image", "scheme", "M", "seed", "psnr_db", "ssim")

    def row(self):
        psnr_txt = "inf" if math.isinf(self.psnr_db) else f"{self.psnr_db:.4f}"
        return [self.image, self.scheme, str(self.M), str(self.seed), psnr_txt,
                f"{self.ssim:.6f}" if self.ssim != 1.0 else "1.0"]


def _pair(reference, test):
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(reference, test) -> float:
    """``10 log10(255^2 / MSE)``; ``inf`` for identical images."""
    a, b = _pair(reference, test)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(PEAK ** 2 / mse))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalised 1-D Gaussian taps; the 2-D window is its outer product."""
    r = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def _filter_valid(x, w):
    half = len(w) // 2
    y = correlate1d(correlate1d(x, w, axis=0, mode="constant"), w, axis=1, mode="constant")
    return y[half:-half, half:-half] if half else y


def box_downsample(x, factor: int) -> np.ndarray:
    """Average ``factor x factor`` cells, dropping any remainder rows/columns."""
    x = np.asarray(x, dtype=np.float64)
    if factor == 1:
        return x
    h, w = (x.shape[0] // factor) * factor, (x.shape[1] // factor) * factor
    return x[:h, :w].reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def ssim(reference, test, win_size: int = 11, sigma: float = 1.5,
         k1: float = 0.01, k2: float = 0.03, data_range: float = PEAK,
         downsample=1) -> float:
    """Mean SSIM over all fully-contained Gaussian windows.

    ``downsample`` box-averages both images first. ``"auto"`` uses
    ``max(1, round(min(h, w) / 256))``, the convention of the widely used
    MATLAB reference script; the default of 1 evaluates at full resolution.
    """
    a, b = _pair(reference, test)
    if downsample == "auto":
        downsample = max(1, int(np.floor(min(a.shape[:2]) / 256 + 0.5)))
    if int(downsample) < 1:
        raise ValueError("downsample must be >= 1")
    a, b = box_downsample(a, int(downsample)), box_downsample(b, int(downsample))
    if a.ndim != 2 or min(a.shape) < win_size:
        raise TooSmall(f"SSIM needs 2-D images of at least {win_size}x{win_size}")
    if np.array_equal(a, b):
        return 1.0
    w = gaussian_window(win_size, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_a = _filter_valid(a, w)
    mu_b = _filter_valid(b, w)
    var_a = _filter_valid(a * a, w) - mu_a ** 2
    var_b = _filter_valid(b * b, w) - mu_b ** 2
    cov = _filter_valid(a * b, w) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def quality_report(reference, test, image: str = "", scheme: str = "", M: int = 0,
                   seed: int = 0) -> QualityReport:
    return QualityReport(image, scheme, int(M), int(seed), psnr(reference, test),
                         ssim(reference, test))
