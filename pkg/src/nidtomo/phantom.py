"""Shepp-Logan head phantom and calibrated sinogram noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import GridSpec, Image
from .radon import Sinogram


@dataclass(frozen=True)
class EllipseSpec:
    """One additive ellipse: center, semi-axes, rotation (degrees), intensity."""

    x0: float
    y0: float
    a: float
    b: float
    angle_deg: float
    intensity: float

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0:
            raise ValueError("ellipse semi-axes must be positive")

    def contains(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        phi = math.radians(self.angle_deg)
        dx, dy = x - self.x0, y - self.y0
        u = dx * math.cos(phi) + dy * math.sin(phi)
        v = -dx * math.sin(phi) + dy * math.cos(phi)
        return (u / self.a) ** 2 + (v / self.b) ** 2 <= 1.0


# contrast-enhanced intensity variant (the common default in the literature)
MODIFIED_SHEPP_LOGAN = [
    EllipseSpec(0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    EllipseSpec(0.0, -0.0184, 0.6624, 0.8740, 0.0, -0.8),
    EllipseSpec(0.22, 0.0, 0.1100, 0.3100, -18.0, -0.2),
    EllipseSpec(-0.22, 0.0, 0.1600, 0.4100, 18.0, -0.2),
    EllipseSpec(0.0, 0.35, 0.2100, 0.2500, 0.0, 0.1),
    EllipseSpec(0.0, 0.1, 0.0460, 0.0460, 0.0, 0.1),
    EllipseSpec(0.0, -0.1, 0.0460, 0.0460, 0.0, 0.1),
    EllipseSpec(-0.08, -0.605, 0.0460, 0.0230, 0.0, 0.1),
    EllipseSpec(0.0, -0.605, 0.0230, 0.0230, 0.0, 0.1),
    EllipseSpec(0.06, -0.605, 0.0230, 0.0460, 0.0, 0.1),
]

# original low-contrast gray values
CLASSIC_SHEPP_LOGAN = [
    EllipseSpec(e.x0, e.y0, e.a, e.b, e.angle_deg, g)
    for e, g in zip(
        MODIFIED_SHEPP_LOGAN,
        [2.0, -0.98, -0.02, -0.02, 0.01, 0.01, 0.01, 0.01, 0.01, 0.01],
    )
]

PHANTOM_TABLES = {"modified": MODIFIED_SHEPP_LOGAN, "classic": CLASSIC_SHEPP_LOGAN}


def shepp_logan_phantom(grid: GridSpec, variant: str = "modified") -> Image:
    """Sum of ellipse indicators times intensities, sampled at pixel centers."""
    try:
        table = PHANTOM_TABLES[variant]
    except KeyError:
        raise ValueError(f"unknown phantom variant {variant!r}") from None
    x1, x2 = grid.pixel_centers()
    X, Y = np.meshgrid(x1, x2)
    values = np.zeros((grid.n, grid.n))
    for ell in table:
        values[ell.contains(X, Y)] += ell.intensity
    # the sums of table intensities are exact decimals; drop accumulation dust
    return Image(grid, np.round(values, 12))


def gray_levels(img: Image, decimals: int = 12) -> np.ndarray:
    """Distinct intensity levels of a piecewise-constant image."""
    return np.unique(np.round(img.values, decimals))


def step_gradient_thresholds(levels: np.ndarray, h: float) -> np.ndarray:
    """Pairwise level differences divided by h: gradient magnitudes of ideal
    one-pixel steps between the image's gray values."""
    levels = np.asarray(levels, dtype=float)
    diffs = np.abs(levels[:, None] - levels[None, :]).ravel()
    diffs = np.unique(np.round(diffs[diffs > 1e-12], 12))
    return diffs / h


@dataclass
class NoiseConfig:
    """Additive Gaussian noise calibrated to a data-space SNR target (dB)."""

    target_snr_db: float
    seed: int

    def __post_init__(self):
        if math.isnan(self.target_snr_db):
            raise ValueError("target SNR must be a number (inf disables noise)")


def add_noise(g: Sinogram, cfg: NoiseConfig) -> Sinogram:
    """Add zero-mean Gaussian noise scaled after the draw, so the realized
    SNR 10 log10(|g|^2 / |eta|^2) hits the target exactly."""
    if math.isinf(cfg.target_snr_db):
        return Sinogram(g.geometry, g.values.copy())
    signal = float(np.linalg.norm(g.values))
    if signal == 0.0:
        raise ValueError("cannot calibrate noise against an all-zero sinogram")
    rng = np.random.default_rng(cfg.seed)
    eta = rng.standard_normal(g.values.shape)
    eta *= signal / (np.linalg.norm(eta) * 10.0 ** (cfg.target_snr_db / 20.0))
    return Sinogram(g.geometry, g.values + eta)
