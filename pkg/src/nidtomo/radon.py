"""Discrete Radon transform, its adjoint and filtered backprojection.

A ray is parametrized as ``s * theta + q * theta_perp`` with
``theta = (cos t, sin t)`` and ``theta_perp = (-sin t, cos t)``; the
projection matrix entry for (ray, pixel) is the exact Euclidean length of
the intersection, computed by marching the ray across the pixel grid lines.

Angles are uniform on [0, pi) (pi excluded), detector offsets uniform on
[-1, 1] inclusive.  The sinogram inner product carries the cell weight
``dtheta * ds``, and :func:`back_project` is scaled so forward and backward
projection are exact adjoints under the weighted inner products.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .grids import DimensionError, GridSpec, Image


@dataclass(frozen=True)
class SinogramGeometry:
    """p angles uniform in [0, pi), q detector offsets uniform in [-1, 1]."""

    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 2:
            raise ValueError(f"need p >= 1 and q >= 2, got p={self.p}, q={self.q}")

    @property
    def angles(self) -> np.ndarray:
        return np.arange(self.p) * (np.pi / self.p)

    @property
    def offsets(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.q)

    @property
    def dtheta(self) -> float:
        return np.pi / self.p

    @property
    def ds(self) -> float:
        return 2.0 / (self.q - 1)

    @property
    def cell_weight(self) -> float:
        return self.dtheta * self.ds


@dataclass
class Sinogram:
    geometry: SinogramGeometry
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.geometry.p, self.geometry.q):
            raise DimensionError(
                f"sinogram shape {self.values.shape} does not match geometry "
                f"(p={self.geometry.p}, q={self.geometry.q})"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sinogram contains non-finite entries")

    @classmethod
    def zeros(cls, geometry: SinogramGeometry) -> "Sinogram":
        return cls(geometry, np.zeros((geometry.p, geometry.q)))


def sino_inner(a: Sinogram, b: Sinogram) -> float:
    """Cell-weighted inner product dtheta * ds * sum(a * b)."""
    if a.geometry != b.geometry:
        raise DimensionError("sinogram geometry mismatch")
    return a.geometry.cell_weight * float(np.vdot(a.values, b.values))


def sino_norm(a: Sinogram) -> float:
    return float(np.sqrt(max(sino_inner(a, a), 0.0)))


@dataclass
class ProjectionMatrix:
    """Sparse (p*q) x n^2 matrix of ray/pixel intersection lengths."""

    grid: GridSpec
    geometry: SinogramGeometry
    matrix: sp.csr_matrix


def _ray_pixels(cos_t: float, sin_t: float, s: float, n: int, h: float):
    """Pixel indices and chord lengths for one ray; empty arrays on a miss."""
    # clip the ray parameter q to the box [-1, 1]^2 (slab method)
    empty = np.array([], dtype=np.int64), np.array([])
    lo, hi = -np.inf, np.inf
    for origin, direction in ((s * cos_t, -sin_t), (s * sin_t, cos_t)):
        if abs(direction) < 1e-14:
            if not -1.0 <= origin <= 1.0:
                return empty
        else:
            qa = (-1.0 - origin) / direction
            qb = (1.0 - origin) / direction
            lo = max(lo, min(qa, qb))
            hi = min(hi, max(qa, qb))
    if not hi > lo + 1e-14:
        return empty

    # parameters where the ray crosses grid lines x1 = -1 + k*h, x2 = -1 + k*h
    bounds = -1.0 + h * np.arange(n + 1)
    cuts = [np.array([lo, hi])]
    if abs(sin_t) >= 1e-14:
        cuts.append((s * cos_t - bounds) / sin_t)
    if abs(cos_t) >= 1e-14:
        cuts.append((bounds - s * sin_t) / cos_t)
    qs = np.concatenate(cuts)
    qs = np.sort(qs[(qs >= lo) & (qs <= hi)])

    lengths = np.diff(qs)
    keep = lengths > 1e-13
    if not np.any(keep):
        return empty
    mids = 0.5 * (qs[:-1] + qs[1:])[keep]
    lengths = lengths[keep]

    x1 = s * cos_t - mids * sin_t
    x2 = s * sin_t + mids * cos_t
    cols = np.clip(np.floor((x1 + 1.0) / h), 0, n - 1).astype(np.int64)
    rows = np.clip(np.floor((1.0 - x2) / h), 0, n - 1).astype(np.int64)
    return rows * n + cols, lengths


def build_projection_matrix(grid: GridSpec, geom: SinogramGeometry) -> ProjectionMatrix:
    """Assemble the intersection-length matrix, one row per ray (angle, offset).

    Rays that miss [-1, 1]^2 give empty rows.  Duplicate (ray, pixel) dust
    from grid-corner crossings is summed away by the sparse constructor.
    """
    n, h = grid.n, grid.h
    angles, offsets = geom.angles, geom.offsets
    row_idx, col_idx, vals = [], [], []
    for j, t in enumerate(angles):
        cos_t, sin_t = float(np.cos(t)), float(np.sin(t))
        for l, s in enumerate(offsets):
            pix, lengths = _ray_pixels(cos_t, sin_t, float(s), n, h)
            if pix.size:
                row_idx.append(np.full(pix.size, j * geom.q + l, dtype=np.int64))
                col_idx.append(pix)
                vals.append(lengths)
    if row_idx:
        coo = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(row_idx), np.concatenate(col_idx))),
            shape=(geom.p * geom.q, n * n),
        )
    else:
        coo = sp.coo_matrix((geom.p * geom.q, n * n))
    return ProjectionMatrix(grid, geom, coo.tocsr())


def forward_project(A: ProjectionMatrix, f: Image) -> Sinogram:
    if f.grid != A.grid:
        raise DimensionError("image grid does not match projection matrix")
    g = A.matrix @ f.values.ravel()
    return Sinogram(A.geometry, g.reshape(A.geometry.p, A.geometry.q))


def back_project(A: ProjectionMatrix, g: Sinogram) -> Image:
    """Adjoint of :func:`forward_project` under the weighted inner products.

    The transpose product is scaled by (dtheta * ds) / h^2 so that
    <A f, g>_sino = <f, A* g>_image holds exactly.
    """
    if g.geometry != A.geometry:
        raise DimensionError("sinogram geometry does not match projection matrix")
    scale = A.geometry.cell_weight / A.grid.h ** 2
    f = A.matrix.T @ g.values.ravel()
    return Image(A.grid, scale * f.reshape(A.grid.n, A.grid.n))


def shepp_logan_filter(freqs: np.ndarray, cutoff: float) -> np.ndarray:
    """Low-pass weights sinc(pi * freq / (2 * cutoff)) inside |freq| <= cutoff."""
    if cutoff <= 0:
        raise ValueError(f"filter cutoff must be positive, got {cutoff}")
    freqs = np.asarray(freqs, dtype=float)
    # np.sinc(x) = sin(pi x) / (pi x), so np.sinc(f / (2 g)) = sinc(pi f / (2 g))
    return np.where(np.abs(freqs) <= cutoff, np.sinc(freqs / (2.0 * cutoff)), 0.0)


def nyquist_cutoff(geom: SinogramGeometry) -> float:
    """Detector Nyquist limit as an angular frequency."""
    return np.pi / geom.ds


def filter_sinogram(g: Sinogram, cutoff: float | None = None) -> Sinogram:
    """Apply the ramp * low-pass filter along the detector axis.

    Rows are zero-padded to the next power of two >= 2q to limit circular
    wraparound; frequencies are angular, and the 1/(2 pi) factor makes the
    filtered sinogram the exact integrand of the backprojection formula.
    """
    geom = g.geometry
    if cutoff is None:
        cutoff = nyquist_cutoff(geom)
    nfft = 1 << int(np.ceil(np.log2(2 * geom.q)))
    sigma = 2.0 * np.pi * np.fft.fftfreq(nfft, d=geom.ds)
    weights = shepp_logan_filter(sigma, cutoff) * np.abs(sigma) / (2.0 * np.pi)
    spectrum = np.fft.fft(g.values, n=nfft, axis=1)
    filtered = np.fft.ifft(spectrum * weights[None, :], axis=1).real[:, : geom.q]
    return Sinogram(geom, filtered)


def fbp_reconstruct(
    g: Sinogram,
    grid: GridSpec,
    cutoff: float | None = None,
    matrix: ProjectionMatrix | None = None,
) -> Image:
    """Filtered backprojection with the sinc low-pass filter.

    Builds the projection matrix for the backprojection step unless one is
    supplied.
    """
    if matrix is None:
        matrix = build_projection_matrix(grid, g.geometry)
    elif matrix.grid != grid or matrix.geometry != g.geometry:
        raise DimensionError("supplied projection matrix does not match inputs")
    return back_project(matrix, filter_sinogram(g, cutoff))
