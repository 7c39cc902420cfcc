"""Regularized least-squares functionals and their gradients.

Three functionals share one evaluation core:

* the diffusion-regularized functional
  ``0.5 ||A f - g||^2 + sum_k gamma_k * integral p_k(|grad_sigma_k f|^2)
  + alpha/2 ||f||^2``;
* the smoothed-TV functional (same shape with the square-root penalty and
  no gradient smoothing);
* the adaptive blend ``(1 - omega(n)) * T_nid(zeta(n) f) + omega(n) * T_tv(f)``
  that moves from TV-dominated early iterations to diffusion-dominated
  late ones.

Gradients are the exact Riesz representers of the directional derivatives
under the h^2-weighted image inner product; the penalty term contributes
``2 * gamma_k * grad_sigma* (p_k'(|grad_sigma f|^2) grad_sigma f)``, with
the chain-rule factor ``zeta`` included for the scaled blend component.
All of them pass central finite-difference consistency checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffusion import AcarVogelTV, GaussianKernel, PenaltyFamily, smoothed_gradient, smoothed_gradient_adjoint
from .grids import Image, VectorField, inner
from .radon import ProjectionMatrix, Sinogram, back_project, forward_project, sino_inner


@dataclass
class NidTerm:
    """One regularization term: weight, gradient-smoothing width, family."""

    gamma: float
    sigma: float
    family: PenaltyFamily

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("term weight must be nonnegative")
        if self.sigma <= 0:
            raise ValueError("smoothing width must be positive")


@dataclass
class NidConfig:
    terms: list[NidTerm]
    alpha: float

    def __post_init__(self):
        if not self.terms:
            raise ValueError("need at least one regularization term")
        if self.alpha <= 0:
            raise ValueError("coercivity weight alpha must be positive")


@dataclass
class TvConfig:
    beta: float
    eps: float
    alpha: float = 0.0

    def __post_init__(self):
        if self.beta <= 0 or self.eps <= 0:
            raise ValueError("tv weight beta and smoothing eps must be positive")
        if self.alpha < 0:
            raise ValueError("coercivity weight alpha must be nonnegative")


@dataclass
class AnidSchedule:
    """Sigmoid switch omega and flux-scale schedule zeta.

    omega(n) = floor + (1 - floor) / (1 + exp(a (n - n0))) decreases from ~1
    toward ``floor`` around the midpoint; a positive floor keeps a fraction
    of the first regularizer active for good (the adaptive convergence
    guarantee in fact assumes omega stays bounded away from zero).  zeta
    follows the same sigmoid, rescaled to run from zeta0 at n = 0 down to 1.
    ``warmup`` is the index past which the per-step descent condition is
    expected (and audited) to hold.
    """

    midpoint: float = 300.0
    steepness: float = 0.02
    zeta0: float = 1.0
    floor: float = 0.0
    warmup: int = 0

    def __post_init__(self):
        if self.steepness <= 0:
            raise ValueError("steepness must be positive")
        if self.zeta0 <= 0:
            raise ValueError("zeta0 must be positive")
        if not 0.0 <= self.floor < 1.0:
            raise ValueError("omega floor must lie in [0, 1)")

    def _sigmoid(self, n: int) -> float:
        return 1.0 / (1.0 + np.exp(self.steepness * (n - self.midpoint)))

    def omega(self, n: int) -> float:
        return self.floor + (1.0 - self.floor) * self._sigmoid(n)

    def zeta(self, n: int) -> float:
        if self.zeta0 == 1.0:
            return 1.0
        return 1.0 + (self.zeta0 - 1.0) * self._sigmoid(n) / self._sigmoid(0)


class _Evaluator:
    """Value/gradient core shared by the NID and TV functionals."""

    def __init__(self, A: ProjectionMatrix, g: Sinogram, terms, alpha: float):
        self.A = A
        self.g = g
        self.alpha = alpha
        self.grid = A.grid
        # (weight, kernel, family) triples with kernels prebuilt per grid
        self.terms = [
            (gamma, GaussianKernel.build(sigma, self.grid), family)
            for gamma, sigma, family in terms
        ]

    def residual(self, f: Image) -> Sinogram:
        return Sinogram(self.g.geometry, forward_project(self.A, f).values - self.g.values)

    def value(self, f: Image, residual: Sinogram | None = None) -> float:
        r = residual if residual is not None else self.residual(f)
        total = 0.5 * sino_inner(r, r)
        h2 = self.grid.h ** 2
        for gamma, kernel, family in self.terms:
            if gamma == 0.0:
                continue
            mag2 = smoothed_gradient(f, kernel).magnitude_squared()
            total += gamma * h2 * float(np.sum(family.penalty(mag2)))
        total += 0.5 * self.alpha * inner(f, f)
        return total

    def gradient(self, f: Image, residual: Sinogram | None = None) -> Image:
        r = residual if residual is not None else self.residual(f)
        out = back_project(self.A, r).values
        for gamma, kernel, family in self.terms:
            if gamma == 0.0:
                continue
            sg = smoothed_gradient(f, kernel)
            w = 2.0 * gamma * family.diffusion_rate(sg.magnitude_squared())
            flux_field = VectorField(self.grid, w * sg.d1, w * sg.d2)
            out += smoothed_gradient_adjoint(flux_field, kernel).values
        if self.alpha != 0.0:
            out += self.alpha * f.values
        return Image(self.grid, out)


class NidProblem:
    """Bound functional T(f) for a fixed (A, g, config); reusable kernels."""

    def __init__(self, A: ProjectionMatrix, g: Sinogram, cfg: NidConfig):
        self._ev = _Evaluator(A, g, [(t.gamma, t.sigma, t.family) for t in cfg.terms], cfg.alpha)

    def value(self, f: Image) -> float:
        return self._ev.value(f)

    def gradient(self, f: Image) -> Image:
        return self._ev.gradient(f)


class TvProblem:
    """Smoothed-TV functional bound to (A, g, config); zero-width kernel."""

    def __init__(self, A: ProjectionMatrix, g: Sinogram, cfg: TvConfig):
        self._ev = _Evaluator(A, g, [], cfg.alpha)
        self._ev.terms = [(cfg.beta, GaussianKernel.delta(), AcarVogelTV(cfg.eps))]

    def value(self, f: Image) -> float:
        return self._ev.value(f)

    def gradient(self, f: Image) -> Image:
        return self._ev.gradient(f)


class AnidProblem:
    """Iteration-indexed blend of the TV and (scaled) NID functionals.

    ``nid_for`` may be a callable ``n -> NidConfig`` for families that change
    along the iteration; a plain config is treated as static.  At the blend
    endpoints (omega exactly 1, or omega exactly 0 with zeta exactly 1) the
    unused component is skipped entirely, so those runs reproduce the pure
    TV / NID evaluations bit for bit.
    """

    def __init__(self, A, g, nid_for, tv_cfg: TvConfig, schedule: AnidSchedule):
        self.A = A
        self.g = g
        self.schedule = schedule
        self.tv = TvProblem(A, g, tv_cfg)
        if callable(nid_for):
            self._nid_for = nid_for
            self._static_nid = None
        else:
            self._static_nid = NidProblem(A, g, nid_for)
            self._nid_for = None
        self._cache_n = None
        self._cache_problem = None

    def nid_problem(self, n: int) -> NidProblem:
        if self._static_nid is not None:
            return self._static_nid
        if self._cache_n != n:
            self._cache_problem = NidProblem(self.A, self.g, self._nid_for(n))
            self._cache_n = n
        return self._cache_problem

    def scaled_nid_value(self, f: Image, n: int) -> float:
        """T_nid at the zeta(n)-scaled image: the n-th blend component."""
        zeta = self.schedule.zeta(n)
        return self.nid_problem(n).value(Image(f.grid, zeta * f.values))

    def components(self, f: Image, n: int) -> tuple[float, float]:
        return self.scaled_nid_value(f, n), self.tv.value(f)

    def value(self, f: Image, n: int) -> float:
        omega = self.schedule.omega(n)
        if omega == 1.0:
            return self.tv.value(f)
        if omega == 0.0 and self.schedule.zeta(n) == 1.0:
            return self.nid_problem(n).value(f)
        nid_part, tv_part = self.components(f, n)
        return (1.0 - omega) * nid_part + omega * tv_part

    def gradient(self, f: Image, n: int) -> Image:
        omega = self.schedule.omega(n)
        zeta = self.schedule.zeta(n)
        if omega == 1.0:
            return self.tv.gradient(f)
        if omega == 0.0 and zeta == 1.0:
            return self.nid_problem(n).gradient(f)
        scaled = Image(f.grid, zeta * f.values)
        nid_grad = self.nid_problem(n).gradient(scaled)
        out = (1.0 - omega) * zeta * nid_grad.values
        if omega != 0.0:
            out = out + omega * self.tv.gradient(f).values
        return Image(f.grid, out)


# module-level function forms of the bound problems

def nid_value(f: Image, g: Sinogram, A: ProjectionMatrix, cfg: NidConfig) -> float:
    return NidProblem(A, g, cfg).value(f)


def nid_gradient(f: Image, g: Sinogram, A: ProjectionMatrix, cfg: NidConfig) -> Image:
    return NidProblem(A, g, cfg).gradient(f)


def tv_value(f: Image, g: Sinogram, A: ProjectionMatrix, cfg: TvConfig) -> float:
    return TvProblem(A, g, cfg).value(f)


def tv_gradient(f: Image, g: Sinogram, A: ProjectionMatrix, cfg: TvConfig) -> Image:
    return TvProblem(A, g, cfg).gradient(f)


def anid_value(f, n, g, A, nid_cfg, tv_cfg, schedule: AnidSchedule) -> float:
    return AnidProblem(A, g, nid_cfg, tv_cfg, schedule).value(f, n)


def anid_gradient(f, n, g, A, nid_cfg, tv_cfg, schedule: AnidSchedule) -> Image:
    return AnidProblem(A, g, nid_cfg, tv_cfg, schedule).gradient(f, n)
