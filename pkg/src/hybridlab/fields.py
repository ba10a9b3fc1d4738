"""Grids and nodal fields on the unit square.

Every field stores its values as a read-only ``(n_y, n_x)`` array, row-major
with ``y`` as the outer index, so ``values[j, i]`` sits at ``(i*h_x, j*h_y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


def _frozen(arr, shape=None, name="values"):
    out = np.array(arr, dtype=np.float64, copy=True)
    if shape is not None:
        out = np.broadcast_to(out, shape).copy()
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform node grid on ``[0, 1]^2`` with ``n_x * n_y`` nodes."""

    nx: int
    ny: int

    def __post_init__(self):
        if int(self.nx) < 3 or int(self.ny) < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")
        object.__setattr__(self, "nx", int(self.nx))
        object.__setattr__(self, "ny", int(self.ny))

    @classmethod
    def square(cls, n: int) -> Grid:
        return cls(n, n)

    @property
    def hx(self) -> float:
        return 1.0 / (self.nx - 1)

    @property
    def hy(self) -> float:
        return 1.0 / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.linspace(0.0, 1.0, self.nx)
        y = np.linspace(0.0, 1.0, self.ny)
        X, Y = np.meshgrid(x, y)
        X.setflags(write=False)
        Y.setflags(write=False)
        return X, Y

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
        m.setflags(write=False)
        return m

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    @cached_property
    def boundary_indices(self) -> np.ndarray:
        """Flat (row-major) indices of the boundary nodes, ascending."""
        idx = np.flatnonzero(self.boundary_mask)
        idx.setflags(write=False)
        return idx

    @cached_property
    def interior_indices(self) -> np.ndarray:
        idx = np.flatnonzero(~self.boundary_mask)
        idx.setflags(write=False)
        return idx

    @cached_property
    def distance_to_boundary(self) -> np.ndarray:
        X, Y = self.coords
        d = np.minimum(np.minimum(X, 1.0 - X), np.minimum(Y, 1.0 - Y))
        d.setflags(write=False)
        return d

    @cached_property
    def trapezoid_weights(self) -> np.ndarray:
        wx = np.full(self.nx, self.hx)
        wx[[0, -1]] *= 0.5
        wy = np.full(self.ny, self.hy)
        wy[[0, -1]] *= 0.5
        w = np.outer(wy, wx)
        w.setflags(write=False)
        return w

    def bands(self, delta: float) -> BoundaryBands:
        return BoundaryBands.build(self, delta)


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values, self.grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> ScalarField:
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> ScalarField:
        X, Y = grid.coords
        return cls(grid, np.broadcast_to(fn(X, Y), grid.shape))

    def with_values(self, values) -> ScalarField:
        return ScalarField(self.grid, values)

    def trace(self) -> BoundaryTrace:
        return BoundaryTrace(self.grid, self.values.ravel()[self.grid.boundary_indices])

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._coerce(other))

    def __rsub__(self, other):
        return self.with_values(self._coerce(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_values(self.values / self._coerce(other))

    def __neg__(self):
        return self.with_values(-self.values)

    def __repr__(self):
        return (f"ScalarField({self.grid.nx}x{self.grid.ny}, "
                f"min={self.values.min():.4g}, max={self.values.max():.4g})")


@dataclass(frozen=True, eq=False)
class MatrixField:
    """Symmetric 2x2 matrix per node, stored as the planes a11, a12, a22."""

    grid: Grid
    a11: np.ndarray
    a12: np.ndarray
    a22: np.ndarray

    def __post_init__(self):
        for name in ("a11", "a12", "a22"):
            object.__setattr__(self, name, _frozen(getattr(self, name), self.grid.shape, name))

    @classmethod
    def isotropic(cls, a) -> MatrixField:
        """``a * I`` from a ScalarField."""
        zero = np.zeros(a.grid.shape)
        return cls(a.grid, a.values, zero, a.values)

    @classmethod
    def identity(cls, grid: Grid, scale: float = 1.0) -> MatrixField:
        one = np.full(grid.shape, float(scale))
        return cls(grid, one, np.zeros(grid.shape), one)

    @classmethod
    def diagonal(cls, grid: Grid, d1, d2) -> MatrixField:
        return cls(grid, d1, np.zeros(grid.shape), d2)

    @classmethod
    def rotated(cls, d1: ScalarField, d2: ScalarField, angle: float) -> MatrixField:
        """``R diag(d1, d2) R^T`` for a rotation by a constant angle."""
        c, s = np.cos(angle), np.sin(angle)
        a11 = c * c * d1.values + s * s * d2.values
        a22 = s * s * d1.values + c * c * d2.values
        a12 = c * s * (d1.values - d2.values)
        return cls(d1.grid, a11, a12, a22)

    @property
    def is_scalar(self) -> bool:
        return bool(np.all(self.a12 == 0.0) and np.array_equal(self.a11, self.a22))

    def scalar(self) -> ScalarField:
        if not self.is_scalar:
            raise ValueError("matrix field is not a multiple of the identity")
        return ScalarField(self.grid, self.a11)

    def eigenvalues(self) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise (smallest, largest) eigenvalues."""
        mean = 0.5 * (self.a11 + self.a22)
        rad = np.hypot(0.5 * (self.a11 - self.a22), self.a12)
        return mean - rad, mean + rad


def as_matrix_field(a) -> MatrixField:
    if isinstance(a, MatrixField):
        return a
    if isinstance(a, ScalarField):
        return MatrixField.isotropic(a)
    raise TypeError(f"expected ScalarField or MatrixField, got {type(a).__name__}")


@dataclass(frozen=True, eq=False)
class BoundaryTrace:
    """One value per boundary node, ordered like ``grid.boundary_indices``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        n_b = len(self.grid.boundary_indices)
        if vals.ndim == 0:
            vals = np.full(n_b, float(vals))
        if vals.shape != (n_b,):
            raise ValueError(f"boundary trace needs {n_b} values, got {vals.shape}")
        object.__setattr__(self, "values", _frozen(vals))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> BoundaryTrace:
        return cls(grid, np.full(len(grid.boundary_indices), float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> BoundaryTrace:
        return ScalarField.from_function(grid, fn).trace()

    def extend(self, interior: float = 0.0) -> np.ndarray:
        """Full-grid array equal to the trace on the boundary, ``interior`` inside."""
        out = np.full(self.grid.size, float(interior))
        out[self.grid.boundary_indices] = self.values
        return out.reshape(self.grid.shape)

    def __mul__(self, c):
        return BoundaryTrace(self.grid, self.values * c)

    __rmul__ = __mul__

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True, eq=False)
class BoundaryBands:
    """Node masks for the boundary strip ``dist <= delta`` and the core ``dist >= delta``."""

    grid: Grid
    delta: float
    near: np.ndarray = field(repr=False)
    far: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, grid: Grid, delta: float) -> BoundaryBands:
        if not delta > 0:
            raise ValueError("band width must be positive")
        d = grid.distance_to_boundary
        tol = 1e-12
        return cls(grid, float(delta), d <= delta + tol, d >= delta - tol)
