"""Image-quality measures: SNR, PSNR and mean local structural similarity.

All three take the reference first and accept :class:`~nidtomo.grids.Image`,
:class:`~nidtomo.radon.Sinogram` or plain arrays.  Norms here are unweighted
sums of squares (the quadrature weight cancels in every ratio).  Identical
inputs give ``inf`` for the logarithmic measures and exactly 1 for SSIM.
"""

from __future__ import annotations

import numpy as np


def _values(x) -> np.ndarray:
    arr = getattr(x, "values", x)
    return np.asarray(arr, dtype=float)


def _pair(ref, test):
    a, b = _values(ref), _values(test)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def snr(ref, test) -> float:
    """10 log10(|ref|^2 / |ref - test|^2)."""
    a, b = _pair(ref, test)
    err = float(np.sum((a - b) ** 2))
    if err == 0.0:
        return float("inf")
    return 10.0 * np.log10(float(np.sum(a ** 2)) / err)


def psnr(ref, test) -> float:
    """10 log10(peak^2 / MSE) with the reference maximum as the peak."""
    a, b = _pair(ref, test)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    peak = float(a.max())
    return 10.0 * np.log10(peak ** 2 / mse)


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=float)
    w = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    win = np.outer(w, w)
    return win / win.sum()


def ssim(ref, test, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean local SSIM with the standard 11x11 Gaussian window (sigma 1.5).

    The dynamic range is max(ref) - min(ref); local statistics come from
    windows fully inside the image.
    """
    a, b = _pair(ref, test)
    if min(a.shape) < 11:
        raise ValueError("ssim needs images of at least 11 pixels per side")
    dynamic = float(a.max() - a.min())
    if dynamic == 0.0:
        dynamic = 1.0
    c1 = (k1 * dynamic) ** 2
    c2 = (k2 * dynamic) ** 2

    win = _gaussian_window()
    from scipy.ndimage import correlate

    def local_mean(x):
        return correlate(x, win, mode="constant")[5:-5, 5:-5]

    mu_a = local_mean(a)
    mu_b = local_mean(b)
    var_a = local_mean(a * a) - mu_a ** 2
    var_b = local_mean(b * b) - mu_b ** 2
    cov = local_mean(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def metrics_block(ref, test) -> dict[str, float]:
    """SNR / PSNR / SSIM of a reconstruction against its ground truth."""
    return {"snr": snr(ref, test), "psnr": psnr(ref, test), "ssim": ssim(ref, test)}
