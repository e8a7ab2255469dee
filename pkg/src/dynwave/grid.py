"""Uniform grids on [0, 1], sampled functions, norms and one-sided stencils."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .errors import DomainError

MIN_CELLS = 4


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, 1] into ``n_cells`` cells."""

    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < MIN_CELLS:
            raise DomainError(f"n_cells must be an integer >= {MIN_CELLS}, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_cells + 1) * self.h

    def weights(self) -> np.ndarray:
        """Composite trapezoid weights."""
        w = np.full(self.n_cells + 1, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        values = np.asarray(func(self.nodes), dtype=float)
        if values.ndim == 0:
            values = np.full(self.n_cells + 1, float(values))
        return GridFunction(self, values)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n_cells + 1))


class GridFunction:
    """Samples ``u(x_i)`` of a real function at the nodes of a grid.

    The endpoint samples double as trace values.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float)
        if arr.shape != (grid.n_cells + 1,):
            raise DomainError(
                f"expected {grid.n_cells + 1} samples, got array of shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise DomainError("grid function has non-finite samples")
        arr.setflags(write=False)
        self.grid = grid
        self.values = arr

    def __repr__(self):
        return f"GridFunction(N={self.grid.n_cells}, max|u|={np.max(np.abs(self.values)):.3g})"

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise DomainError("grid functions live on different grids")
            return other.values
        return np.asarray(other, dtype=float)

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, c):
        return GridFunction(self.grid, self.values * self._coerce(c))

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    @property
    def at0(self) -> float:
        return float(self.values[0])

    @property
    def at1(self) -> float:
        return float(self.values[-1])


@dataclass(frozen=True)
class BoundaryPair:
    """Element of the two-point boundary space (values or fluxes at x=0 and x=1)."""

    at0: float
    at1: float

    def __post_init__(self):
        a0, a1 = float(self.at0), float(self.at1)
        if not (np.isfinite(a0) and np.isfinite(a1)):
            raise DomainError(f"boundary pair must be finite, got ({a0}, {a1})")
        object.__setattr__(self, "at0", a0)
        object.__setattr__(self, "at1", a1)

    @classmethod
    def of(cls, values) -> "BoundaryPair":
        a0, a1 = values
        return cls(a0, a1)

    def as_array(self) -> np.ndarray:
        return np.array([self.at0, self.at1])

    def __add__(self, other: "BoundaryPair") -> "BoundaryPair":
        return BoundaryPair(self.at0 + other.at0, self.at1 + other.at1)

    def __sub__(self, other: "BoundaryPair") -> "BoundaryPair":
        return BoundaryPair(self.at0 - other.at0, self.at1 - other.at1)

    def __mul__(self, c: float) -> "BoundaryPair":
        return BoundaryPair(self.at0 * c, self.at1 * c)

    __rmul__ = __mul__


def lp_norm(f: GridFunction, p: float = 2.0) -> float:
    """Trapezoid approximation of ``(int_0^1 |f|^p)^(1/p)``."""
    if not (np.isfinite(p) and p >= 1):
        raise DomainError(f"Lebesgue exponent must lie in [1, inf), got {p}")
    vals = f.values
    if not np.all(np.isfinite(vals)):
        raise DomainError("non-finite samples")
    if p == 1:
        return float(np.dot(f.grid.weights(), np.abs(vals)))
    # scale first so large samples do not overflow |f|^p
    scale = np.max(np.abs(vals))
    if scale == 0.0:
        return 0.0
    integral = np.dot(f.grid.weights(), np.abs(vals / scale) ** p)
    return float(scale * integral ** (1.0 / p))


def derivative(f: GridFunction) -> np.ndarray:
    """Centered differences inside, second-order one-sided at the endpoints."""
    return np.gradient(f.values, f.grid.h, edge_order=2)


def sobolev_seminorm(f: GridFunction) -> float:
    """L2 norm of the discrete derivative of ``f``."""
    return lp_norm(GridFunction(f.grid, derivative(f)), 2.0)


def one_sided_derivative(f: GridFunction, endpoint: Literal["left", "right"]) -> float:
    """Second-order one-sided derivative at an endpoint; exact on quadratics."""
    u, h = f.values, f.grid.h
    if endpoint == "left":
        return float((-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h))
    if endpoint == "right":
        return float((3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h))
    raise DomainError(f"endpoint must be 'left' or 'right', got {endpoint!r}")
