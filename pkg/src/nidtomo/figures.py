"""Matplotlib rendering of images, sinograms, flux curves and traces.

Figures are viewing aids written next to the exact CSV/PGM outputs; they
never feed back into the numerics.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_image_png(path, values: np.ndarray, vmin=None, vmax=None) -> None:
    """Grayscale rendering of an image or sinogram array."""
    plt.imsave(path, np.asarray(values, dtype=float), cmap="gray", vmin=vmin, vmax=vmax)


def save_flux_figure(path, s: np.ndarray, curves: dict[str, tuple[np.ndarray, np.ndarray]],
                     normalized: bool) -> None:
    """Two panels: flux functions on the left, their derivatives on the right."""
    fig, (ax_psi, ax_dpsi) = plt.subplots(1, 2, figsize=(10, 4))
    for label, (psi, dpsi) in curves.items():
        ax_psi.plot(s, psi, label=label)
        ax_dpsi.plot(s, dpsi, label=label)
    suffix = " (normalized)" if normalized else ""
    ax_psi.set_title("flux" + suffix)
    ax_dpsi.set_title("flux derivative" + suffix)
    for ax in (ax_psi, ax_dpsi):
        ax.set_xlabel("gradient magnitude")
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_trace_figure(path, trace) -> None:
    """Functional value and gradient norm against the iteration index."""
    n = trace.column("n")
    fig, (ax_val, ax_grad) = plt.subplots(1, 2, figsize=(10, 4))
    ax_val.plot(n, trace.column("value"))
    ax_val.set_title("functional value")
    ax_grad.semilogy(n, trace.column("grad_norm"))
    ax_grad.set_title("gradient norm")
    for ax in (ax_val, ax_grad):
        ax.set_xlabel("iteration")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
