"""Square pixel grids on [-1, 1]^2, discrete fields and difference operators.

Conventions used throughout the package:

* the image domain is the square [-1, 1] x [-1, 1], sampled by ``n x n``
  pixels of width ``h = 2 / n``;
* row index ``i`` runs along the x2 axis (row 0 is the top of the image,
  x2 = 1 - h/2), column index ``j`` runs along the x1 axis;
* all inner products carry the ``h**2`` quadrature weight, so discrete
  functional values approximate their continuous counterparts.

The forward-difference gradient and the matching divergence below are exact
adjoints of each other (up to sign) under these inner products, which the
descent solvers rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    """Operands live on different grids or have inconsistent shapes."""


@dataclass(frozen=True)
class GridSpec:
    """n x n pixel grid covering [-1, 1]^2 with pixel width h = 2/n."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"grid needs at least 2 pixels per side, got n={self.n}")

    @property
    def h(self) -> float:
        return 2.0 / self.n

    def pixel_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(x1, x2) center coordinates; x1 indexed by column, x2 by row."""
        h = self.h
        x1 = -1.0 + (np.arange(self.n) + 0.5) * h
        x2 = 1.0 - (np.arange(self.n) + 0.5) * h
        return x1, x2


@dataclass
class Image:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise DimensionError(
                f"image shape {self.values.shape} does not match grid n={self.grid.n}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("image contains non-finite entries")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Image":
        return cls(grid, np.zeros((grid.n, grid.n)))

    @classmethod
    def full(cls, grid: GridSpec, value: float) -> "Image":
        return cls(grid, np.full((grid.n, grid.n), float(value)))


@dataclass
class VectorField:
    """Per-pixel 2-vector field; ``d1``/``d2`` are the x1/x2 components."""

    grid: GridSpec
    d1: np.ndarray
    d2: np.ndarray

    def __post_init__(self):
        shape = (self.grid.n, self.grid.n)
        self.d1 = np.asarray(self.d1, dtype=float)
        self.d2 = np.asarray(self.d2, dtype=float)
        if self.d1.shape != shape or self.d2.shape != shape:
            raise DimensionError("vector field components do not match grid")
        if not (np.all(np.isfinite(self.d1)) and np.all(np.isfinite(self.d2))):
            raise ValueError("vector field contains non-finite entries")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VectorField":
        z = np.zeros((grid.n, grid.n))
        return cls(grid, z, z.copy())

    def magnitude_squared(self) -> np.ndarray:
        return self.d1 * self.d1 + self.d2 * self.d2


def _require_same_grid(*grids: GridSpec) -> None:
    if any(g != grids[0] for g in grids[1:]):
        raise DimensionError(f"grid mismatch: {grids}")


def inner(a: Image, b: Image) -> float:
    """Riemann-sum L2 inner product: h^2 * sum(a * b)."""
    _require_same_grid(a.grid, b.grid)
    return a.grid.h ** 2 * float(np.vdot(a.values, b.values))


def norm(a: Image) -> float:
    return float(np.sqrt(max(inner(a, a), 0.0)))


def field_inner(u: VectorField, v: VectorField) -> float:
    """h^2-weighted inner product of vector fields (both components)."""
    _require_same_grid(u.grid, v.grid)
    return u.grid.h ** 2 * float(np.vdot(u.d1, v.d1) + np.vdot(u.d2, v.d2))


def grad_fd(f: Image) -> VectorField:
    """Forward-difference gradient with zero padding at the far boundary.

    Component 1: (f[i, j+1] - f[i, j]) / h for j < n-1, zero in the last
    column.  Component 2: (f[i-1, j] - f[i, j]) / h for i > 0, zero in the
    first row (rows run top-down, so this differences toward increasing x2).
    """
    h = f.grid.h
    v = f.values
    d1 = np.zeros_like(v)
    d2 = np.zeros_like(v)
    d1[:, :-1] = (v[:, 1:] - v[:, :-1]) / h
    d2[1:, :] = (v[:-1, :] - v[1:, :]) / h
    return VectorField(f.grid, d1, d2)


def div_weighted(w: Image, gfield: VectorField) -> Image:
    """Pixelwise-weighted divergence matched to :func:`grad_fd`.

    Returns (w/h) * (u1[i,j] - u1[i,j-1]) + (w/h) * (u2[i,j] - u2[i+1,j]),
    with out-of-range neighbours treated as zero.
    """
    _require_same_grid(w.grid, gfield.grid)
    h = w.grid.h
    u1, u2 = gfield.d1, gfield.d2
    out = np.zeros_like(u1)
    out += u1
    out[:, 1:] -= u1[:, :-1]
    out += u2
    out[:-1, :] -= u2[1:, :]
    out *= w.values / h
    return Image(w.grid, out)


def grad_fd_adjoint(gfield: VectorField) -> Image:
    """Exact transpose of :func:`grad_fd` under the weighted inner products.

    Coincides with ``-div_weighted(1, gfield)`` whenever the field carries
    the structural zeros of a :func:`grad_fd` output (last column of d1,
    first row of d2); for arbitrary fields those entries are ignored, which
    is what makes the identity <grad f, v> = <f, adjoint(v)> exact.
    """
    h = gfield.grid.h
    u1, u2 = gfield.d1, gfield.d2
    out = np.zeros_like(u1)
    # transpose of the d1 stencil: u1[:, n-1] never contributes
    out[:, 1:] += u1[:, :-1]
    out[:, :-1] -= u1[:, :-1]
    # transpose of the d2 stencil: u2[0, :] never contributes
    out[:-1, :] += u2[1:, :]
    out[1:, :] -= u2[1:, :]
    out /= h
    return Image(gfield.grid, out)
