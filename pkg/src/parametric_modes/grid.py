"""Uniform dimensionless frequency grids and weighted kernel algebra.

Continuous kernels ``h(W, W')`` are stored as their samples on grid points.
Integrals over a frequency variable become sums weighted by trapezoid
quadrature weights.  ``symmetrize`` maps a sampled kernel to the matrix
``sqrt(w_i) K_ij sqrt(w_j)``; that change of variables turns L2 inner products
into plain Euclidean ones, so SVDs and operator identities can be evaluated
with ordinary dense linear algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GridError(ValueError):
    """Invalid grid range or point count."""


class DimensionError(ValueError):
    """Kernel or vector shape does not match its grids."""


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid with trapezoid weights.

    ``n == 1`` is reserved for the single-point grid built by
    :meth:`single_point`, whose lone weight is set explicitly.
    """

    omega_min: float
    omega_max: float
    n: int
    point_weight: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.omega_min) and math.isfinite(self.omega_max)):
            raise GridError(f"grid bounds must be finite, got [{self.omega_min}, {self.omega_max}]")
        if self.n == 1 and self.point_weight is not None:
            if not self.point_weight > 0:
                raise GridError(f"single-point weight must be positive, got {self.point_weight}")
            return
        if self.n < 2:
            raise GridError(f"grid needs n >= 2 points, got {self.n}")
        if not self.omega_max > self.omega_min:
            raise GridError(f"omega_max ({self.omega_max}) must exceed omega_min ({self.omega_min})")

    @classmethod
    def single_point(cls, omega: float = 0.0, weight: float = 1.0) -> "FrequencyGrid":
        return cls(float(omega), float(omega), 1, float(weight))

    @property
    def spacing(self) -> float:
        if self.n == 1:
            return float(self.point_weight)
        return (self.omega_max - self.omega_min) / (self.n - 1)

    @cached_property
    def points(self) -> np.ndarray:
        if self.n == 1:
            return np.array([self.omega_min])
        return np.linspace(self.omega_min, self.omega_max, self.n)

    @cached_property
    def weights(self) -> np.ndarray:
        if self.n == 1:
            return np.array([self.point_weight])
        w = np.full(self.n, self.spacing)
        w[0] = w[-1] = 0.5 * self.spacing
        return w

    @cached_property
    def sqrt_weights(self) -> np.ndarray:
        return np.sqrt(self.weights)

    def inner(self, u: np.ndarray, v: np.ndarray) -> complex:
        """Weighted inner product ``sum_i w_i conj(u_i) v_i``."""
        return complex(np.sum(self.weights * np.conj(u) * v))

    def norm(self, u: np.ndarray) -> float:
        return float(np.sqrt(np.sum(self.weights * np.abs(u) ** 2)))

    def to_dict(self) -> dict:
        d = {"omega_min": self.omega_min, "omega_max": self.omega_max, "n": self.n}
        if self.point_weight is not None:
            d["point_weight"] = self.point_weight
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencyGrid":
        return cls(float(d["omega_min"]), float(d["omega_max"]), int(d["n"]),
                   None if d.get("point_weight") is None else float(d["point_weight"]))


def make_grid(omega_min: float, omega_max: float, n: int) -> FrequencyGrid:
    return FrequencyGrid(float(omega_min), float(omega_max), int(n))


@dataclass(frozen=True)
class KernelMatrix:
    """Kernel ``K(W, W')`` sampled on ``row_grid x col_grid``."""

    values: np.ndarray
    row_grid: FrequencyGrid
    col_grid: FrequencyGrid

    def __post_init__(self):
        shape = (self.row_grid.n, self.col_grid.n)
        if np.shape(self.values) != shape:
            raise DimensionError(f"kernel shape {np.shape(self.values)} does not match grids {shape}")


def weighted_apply(K: KernelMatrix, v: np.ndarray) -> np.ndarray:
    """Quadrature of ``int dW' K(W, W') v(W')`` at every row point."""
    v = np.asarray(v)
    if v.shape != (K.col_grid.n,):
        raise DimensionError(f"vector of length {v.shape} cannot be applied to kernel with {K.col_grid.n} columns")
    return K.values @ (K.col_grid.weights * v)


def weighted_compose(left: np.ndarray, right: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """Matrix of ``int dW'' L(W, W'') R(W'', W')`` with the inner variable on ``grid``."""
    if left.shape[1] != grid.n or right.shape[0] != grid.n:
        raise DimensionError(f"cannot contract {left.shape} with {right.shape} over a grid of {grid.n} points")
    return left @ (grid.weights[:, None] * right)


def symmetrize(K: KernelMatrix) -> np.ndarray:
    return K.row_grid.sqrt_weights[:, None] * K.values * K.col_grid.sqrt_weights[None, :]


def desymmetrize(M: np.ndarray, row_grid: FrequencyGrid, col_grid: FrequencyGrid) -> KernelMatrix:
    values = M / row_grid.sqrt_weights[:, None] / col_grid.sqrt_weights[None, :]
    return KernelMatrix(values, row_grid, col_grid)
