"""Penalty / diffusion / flux function families and Gaussian-smoothed gradients.

Each family bundles three views of one regularizer, kept exactly consistent:

* ``penalty(s)``      -- p(s), evaluated at the *squared* gradient magnitude;
* ``diffusion_rate(s2)`` -- the derivative p'(s2), the pointwise diffusivity;
* ``flux(s)``         -- psi(s) = s * p'(s^2), whose slope sign separates
  smoothing (psi' > 0) from edge-enhancing (psi' < 0) gradient ranges.

``p' = diffusion_rate`` holds analytically for the closed-form families and
by construction (exact antiderivative of the flux interpolant) for the
tabulated one, so functional values and gradients built from them pass
finite-difference consistency checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi
from scipy.interpolate import CubicHermiteSpline

from .grids import GridSpec, Image, VectorField, grad_fd, grad_fd_adjoint


def _check_nonneg(x, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise ValueError(f"{what} must be nonnegative")
    return arr


class PenaltyFamily:
    """Base interface; subclasses implement penalty/diffusion_rate/flux_derivative."""

    tag = "base"

    def penalty(self, s):
        raise NotImplementedError

    def diffusion_rate(self, s2):
        raise NotImplementedError

    def flux(self, s):
        s = _check_nonneg(s, "flux argument")
        return s * self.diffusion_rate(s * s)

    def flux_derivative(self, s):
        raise NotImplementedError


@dataclass
class PeronaMalikRational(PenaltyFamily):
    """Diffusivity lam^2 / (lam^2 + s^2) with penalty lam^2 log(1 + s/lam^2)."""

    lam: float
    tag = "pm1"

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("threshold lam must be positive")

    def penalty(self, s):
        s = _check_nonneg(s, "penalty argument")
        return self.lam ** 2 * np.log1p(s / self.lam ** 2)

    def diffusion_rate(self, s2):
        s2 = _check_nonneg(s2, "diffusion argument")
        return self.lam ** 2 / (self.lam ** 2 + s2)

    def flux_derivative(self, s):
        s = _check_nonneg(s, "flux argument")
        l2 = self.lam ** 2
        return l2 * (l2 - s * s) / (l2 + s * s) ** 2


@dataclass
class PeronaMalikExponential(PenaltyFamily):
    """Diffusivity exp(-s^2 / lam^2) with penalty lam^2 (1 - exp(-s/lam^2))."""

    lam: float
    tag = "pm2"

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("threshold lam must be positive")

    def penalty(self, s):
        s = _check_nonneg(s, "penalty argument")
        return self.lam ** 2 * -np.expm1(-s / self.lam ** 2)

    def diffusion_rate(self, s2):
        s2 = _check_nonneg(s2, "diffusion argument")
        return np.exp(-s2 / self.lam ** 2)

    def flux_derivative(self, s):
        s = _check_nonneg(s, "flux argument")
        r = s * s / self.lam ** 2
        return (1.0 - 2.0 * r) * np.exp(-r)


@dataclass
class AcarVogelTV(PenaltyFamily):
    """Smoothed total-variation penalty sqrt(eps + s).

    Its diffusion rate is the derivative 0.5 / sqrt(eps + s^2); the flux
    therefore saturates at 1/2 for large gradients (no backward diffusion).
    """

    eps: float
    tag = "av"

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("smoothing eps must be positive")

    def penalty(self, s):
        s = _check_nonneg(s, "penalty argument")
        return np.sqrt(self.eps + s)

    def diffusion_rate(self, s2):
        s2 = _check_nonneg(s2, "diffusion argument")
        return 0.5 / np.sqrt(self.eps + s2)

    def flux_derivative(self, s):
        s = _check_nonneg(s, "flux argument")
        return 0.5 * self.eps / (self.eps + s * s) ** 1.5


@dataclass
class RationalMixture(PenaltyFamily):
    """Weighted average of rational diffusivities at several thresholds.

    Stores (weight, threshold) pairs and normalizes by the weight sum, so
    the absolute regularization strength stays with the functional term.
    """

    terms: list  # of (gamma_k, lam_k)
    tag = "nid1"

    def __post_init__(self):
        if not self.terms:
            raise ValueError("mixture needs at least one (weight, threshold) term")
        for g, l in self.terms:
            if g <= 0 or l <= 0:
                raise ValueError("mixture weights and thresholds must be positive")
        self._wsum = float(sum(g for g, _ in self.terms))

    def penalty(self, s):
        s = _check_nonneg(s, "penalty argument")
        out = sum(g * l ** 2 * np.log1p(s / l ** 2) for g, l in self.terms)
        return out / self._wsum

    def diffusion_rate(self, s2):
        s2 = _check_nonneg(s2, "diffusion argument")
        out = sum(g * l ** 2 / (l ** 2 + s2) for g, l in self.terms)
        return out / self._wsum

    def flux_derivative(self, s):
        s = _check_nonneg(s, "flux argument")
        out = sum(
            g * l ** 2 * (l ** 2 - s * s) / (l ** 2 + s * s) ** 2 for g, l in self.terms
        )
        return out / self._wsum


@dataclass
class ShiftedRationalSum(PenaltyFamily):
    """Rational diffusivities re-centered at prescribed gradient magnitudes.

    Each term is lam_k^2 / (lam_k^2 + (s - s_k)^2) for s >= s_k and zero
    below the shift, applying the diffusion process on separate gray-value
    scales; terms are averaged with equal weights.  The hard zero below s_k
    leaves a kink in the diffusivity, accepted as is.
    """

    terms: list  # of (lam_k, shift_k)
    tag = "nid2"

    def __post_init__(self):
        if not self.terms:
            raise ValueError("need at least one (threshold, shift) term")
        shifts = [sk for _, sk in self.terms]
        if any(l <= 0 for l, _ in self.terms) or any(sk < 0 for sk in shifts):
            raise ValueError("thresholds must be positive and shifts nonnegative")
        if any(b <= a for a, b in zip(shifts, shifts[1:])):
            raise ValueError("shifts must be strictly increasing")

    def penalty(self, s):
        # exact antiderivative of the diffusion rate in the s^2 variable,
        # zero at the activation point s_k^2 (continuous across the kink)
        s = _check_nonneg(s, "penalty argument")
        root = np.sqrt(s)
        out = np.zeros_like(root)
        for l, sk in self.terms:
            d = root - sk
            active = d >= 0.0
            da = np.where(active, d, 0.0)
            out += np.where(
                active,
                l ** 2 * np.log1p(da ** 2 / l ** 2) + 2.0 * sk * l * np.arctan(da / l),
                0.0,
            )
        return out / len(self.terms)

    def diffusion_rate(self, s2):
        s2 = _check_nonneg(s2, "diffusion argument")
        root = np.sqrt(s2)
        out = np.zeros_like(root)
        for l, sk in self.terms:
            d = root - sk
            out += np.where(d >= 0.0, l ** 2 / (l ** 2 + d * d), 0.0)
        return out / len(self.terms)

    def flux_derivative(self, s):
        s = _check_nonneg(s, "flux argument")
        out = np.zeros_like(np.asarray(s, dtype=float))
        for l, sk in self.terms:
            d = s - sk
            num = l ** 2 * ((l ** 2 + d * d) - 2.0 * s * d)
            out += np.where(d >= 0.0, num / (l ** 2 + d * d) ** 2, 0.0)
        return out / len(self.terms)


def _cumulative_simpson(y: np.ndarray, dx: float) -> np.ndarray:
    """Cumulative integral on a uniform grid, composite-Simpson accurate.

    Even prefixes use standard Simpson pairs; odd prefixes add the exact
    integral of the quadratic through the last three samples.
    """
    n = y.size
    out = np.zeros(n)
    if n >= 3:
        pair = dx / 3.0 * (y[:-2:2] + 4.0 * y[1:-1:2] + y[2::2])
        out[2::2] = np.cumsum(pair)
    if n >= 2:
        out[1] = dx / 12.0 * (5.0 * y[0] + 8.0 * y[1] - y[2]) if n >= 3 else dx / 2.0 * (y[0] + y[1])
        if n >= 3:
            out[3::2] = out[2:-1:2] + dx / 12.0 * (-y[1:-2:2] + 8.0 * y[2:-1:2] + 5.0 * y[3::2])
    return out


@dataclass
class TabulatedFlux(PenaltyFamily):
    """Family built from a tabulated flux derivative on a uniform s-grid.

    The flux is recovered by cumulative Simpson quadrature of the samples,
    interpolated by a cubic Hermite spline (the samples *are* its exact
    node derivatives); penalty and diffusion rate are derived from the
    spline so that p' = diffusion_rate holds by construction.  Beyond the
    table the flux is held constant.
    """

    s_nodes: np.ndarray
    psi_prime: np.ndarray
    psi: np.ndarray = field(init=False)
    tag = "nid3"

    def __post_init__(self):
        self.s_nodes = np.asarray(self.s_nodes, dtype=float)
        self.psi_prime = np.asarray(self.psi_prime, dtype=float)
        if self.s_nodes.size < 2 or self.s_nodes.size != self.psi_prime.size:
            raise ValueError("pattern needs >= 2 matching (s, flux-derivative) samples")
        if self.s_nodes[0] != 0.0:
            raise ValueError("pattern must start at s = 0")
        steps = np.diff(self.s_nodes)
        if not np.allclose(steps, steps[0], rtol=1e-9) or steps[0] <= 0:
            raise ValueError("pattern grid must be uniform and increasing")
        if not np.all(np.isfinite(self.psi_prime)):
            raise ValueError("pattern contains non-finite samples")

        psi = _cumulative_simpson(self.psi_prime, float(steps[0]))
        psi[np.abs(psi) < 1e-14 * max(np.abs(psi).max(), 1.0)] = 0.0
        if np.any(psi < 0.0):
            raise ValueError(
                "pattern integrates to a negative flux; the diffusion rate must stay positive"
            )
        self.psi = psi
        self._spline = CubicHermiteSpline(self.s_nodes, psi, self.psi_prime)
        self._spline_d = self._spline.derivative()
        self._antideriv = self._spline.antiderivative()
        self._smax = float(self.s_nodes[-1])
        self._psi_end = float(psi[-1])
        self._p_end = 2.0 * float(self._antideriv(self._smax))

    def flux(self, s):
        s = _check_nonneg(s, "flux argument")
        return np.where(s <= self._smax, self._spline(np.minimum(s, self._smax)), self._psi_end)

    def flux_derivative(self, s):
        s = _check_nonneg(s, "flux argument")
        return np.where(s <= self._smax, self._spline_d(np.minimum(s, self._smax)), 0.0)

    def diffusion_rate(self, s2):
        s2 = _check_nonneg(s2, "diffusion argument")
        root = np.sqrt(s2)
        safe = np.maximum(root, 1e-8)
        return np.where(root < 1e-8, self.psi_prime[0], self.flux(safe) / safe)

    def penalty(self, s):
        # p(s) = 2 * integral of flux up to sqrt(s); constant-flux tail
        s = _check_nonneg(s, "penalty argument")
        root = np.sqrt(s)
        inside = 2.0 * self._antideriv(np.minimum(root, self._smax))
        tail = self._p_end + 2.0 * self._psi_end * (root - self._smax)
        return np.where(root <= self._smax, inside, tail)

    def diffusion_intervals(self) -> list[tuple[float, float, str]]:
        """Contiguous s-ranges of forward (flux' > 0) / backward (flux' < 0) diffusion."""
        signs = np.sign(self.psi_prime)
        intervals = []
        start = 0
        for k in range(1, signs.size + 1):
            if k == signs.size or (signs[k] != signs[start] and signs[k] != 0):
                if signs[start] != 0:
                    kind = "forward" if signs[start] > 0 else "backward"
                    intervals.append((float(self.s_nodes[start]), float(self.s_nodes[k - 1]), kind))
                start = k
        return intervals


def build_nid3(pattern: np.ndarray) -> TabulatedFlux:
    """Construct the tabulated family from a (m, 2) array of (s, flux') samples."""
    pattern = np.asarray(pattern, dtype=float)
    if pattern.ndim != 2 or pattern.shape[1] != 2:
        raise ValueError("pattern must be an (m, 2) array of (s, flux-derivative) rows")
    return TabulatedFlux(pattern[:, 0], pattern[:, 1])


# module-level function forms over the family objects

def penalty(fam: PenaltyFamily, s):
    return fam.penalty(s)


def diffusion_rate(fam: PenaltyFamily, s2):
    return fam.diffusion_rate(s2)


def flux(fam: PenaltyFamily, s):
    return fam.flux(s)


def flux_derivative(fam: PenaltyFamily, s):
    return fam.flux_derivative(s)


# ---------------------------------------------------------------------------
# Gaussian smoothing and the smoothed gradient operator pair


@dataclass
class GaussianKernel:
    """Truncated, renormalized discrete Gaussian; sigma in domain units.

    ``sigma = 0`` degenerates to the identity kernel, so the smoothed
    gradient reduces to the plain finite-difference gradient.
    """

    sigma: float
    radius: int
    axis_weights: np.ndarray

    def __post_init__(self):
        self.axis_weights = np.asarray(self.axis_weights, dtype=float)
        if self.axis_weights.size != 2 * self.radius + 1:
            raise ValueError("kernel size must be 2 * radius + 1")

    @property
    def values(self) -> np.ndarray:
        """Normalized 2-D kernel (outer product of the 1-D weights)."""
        return np.outer(self.axis_weights, self.axis_weights)

    @classmethod
    def build(cls, sigma: float, grid: GridSpec) -> "GaussianKernel":
        """Truncate at ceil(4 sigma / h) pixels per side, then renormalize."""
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if sigma == 0.0:
            return cls(0.0, 0, np.array([1.0]))
        h = grid.h
        radius = int(np.ceil(4.0 * sigma / h))
        if radius >= grid.n:
            raise ValueError(
                f"kernel radius {radius} does not fit an n={grid.n} grid; reduce sigma"
            )
        offsets = np.arange(-radius, radius + 1) * h
        w = np.exp(-(offsets ** 2) / (2.0 * sigma ** 2))
        return cls(float(sigma), radius, w / w.sum())

    @classmethod
    def delta(cls) -> "GaussianKernel":
        return cls(0.0, 0, np.array([1.0]))


def _fold_indices(n: int, r: int) -> np.ndarray:
    u = np.arange(-r, n + r)
    return np.where(u < 0, -u - 1, np.where(u >= n, 2 * n - 1 - u, u))


def _convolve_sym(values: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Separable correlation with symmetric (reflected) boundary handling."""
    if kernel.radius == 0:
        return values
    out = ndi.correlate1d(values, kernel.axis_weights, axis=0, mode="reflect")
    return ndi.correlate1d(out, kernel.axis_weights, axis=1, mode="reflect")


def _convolve_sym_adjoint(values: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Exact transpose of :func:`_convolve_sym`: full correlation then fold."""
    if kernel.radius == 0:
        return values
    r = kernel.radius
    out = values
    for axis in (0, 1):
        n = out.shape[axis]
        pad = [(0, 0), (0, 0)]
        pad[axis] = (r, r)
        z = np.pad(out, pad, mode="constant")
        full = ndi.correlate1d(z, kernel.axis_weights[::-1], axis=axis, mode="constant")
        idx = _fold_indices(n, r)
        folded = np.zeros_like(out)
        if axis == 0:
            np.add.at(folded, idx, full)
        else:
            np.add.at(folded.T, idx, full.T)
        out = folded
    return out


def smoothed_gradient(f: Image, kernel: GaussianKernel) -> VectorField:
    """Gradient of the Gaussian-convolved image."""
    return grad_fd(Image(f.grid, _convolve_sym(f.values, kernel)))


def smoothed_gradient_adjoint(v: VectorField, kernel: GaussianKernel) -> Image:
    """Exact adjoint of :func:`smoothed_gradient` under the weighted inner products."""
    divish = grad_fd_adjoint(v)
    return Image(v.grid, _convolve_sym_adjoint(divish.values, kernel))
