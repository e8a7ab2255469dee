"""Exact cosine and sine kernels of the Dirichlet second derivative on (0, 1).

Both kernels act through the odd, 2-periodic extension of a grid function.
Shifts that are integer multiples of the grid spacing are evaluated by index
arithmetic and are exact; other shifts fall back to linear interpolation.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .grid import BoundaryPair, GridFunction, lp_norm

# relative slack when deciding that t / h is an integer
_ALIGN_TOL = 1e-9


class ExtendedFunction:
    """Odd, 2-periodic extension of a grid function together with its antiderivative.

    The antiderivative ``F(x) = int_0^x f`` is extended evenly; it is 2-periodic
    because the odd extension integrates to zero over a period.

    On the jump set {0, +-1} (nonzero traces) the extension takes the value of
    ``f`` itself, i.e. arguments are reduced into (-1, 1].
    """

    def __init__(self, base: GridFunction):
        self.base = base
        self.antiderivative = cumulative_trapezoid(base.values, dx=base.grid.h, initial=0.0)
        n = base.grid.n_cells
        # one period sampled on indices -n+1 .. n, stored at offset n-1
        idx = np.arange(-n + 1, n + 1)
        self._odd = np.where(idx >= 0, base.values[np.abs(idx)], -base.values[np.abs(idx)])
        self._even_anti = self.antiderivative[np.abs(idx)]

    @property
    def grid(self):
        return self.base.grid

    def _lookup(self, table: np.ndarray, y: np.ndarray, parity: int) -> np.ndarray:
        n = self.grid.n_cells
        k = y * n
        k_round = np.rint(k)
        if np.all(np.abs(k - k_round) <= _ALIGN_TOL * np.maximum(1.0, np.abs(k))):
            i = k_round.astype(np.int64)
            # reduce into (-n, n]
            r = n - np.mod(n - i, 2 * n)
            return table[r + n - 1]
        # reduce into (-1, 1] and interpolate on the period table
        z = 1.0 - np.mod(1.0 - y, 2.0)
        xs = np.arange(-n + 1, n + 1) / n
        # wrap-around cell (-1, -1 + h): right limit at -1 is parity * value at 1
        xs = np.concatenate(([-1.0], xs))
        vals = np.concatenate(([parity * table[-1]], table))
        return np.interp(z, xs, vals)

    def __call__(self, x) -> np.ndarray:
        return self._lookup(self._odd, np.asarray(x, dtype=float), -1)

    def primitive(self, x) -> np.ndarray:
        """Even, periodic antiderivative evaluated at ``x``."""
        return self._lookup(self._even_anti, np.asarray(x, dtype=float), 1)


def extend_eval(e: ExtendedFunction, x: float) -> float:
    return float(e(np.asarray([x]))[0])


def _as_extended(f) -> ExtendedFunction:
    return f if isinstance(f, ExtendedFunction) else ExtendedFunction(f)


def cosine_apply(f, t: float) -> GridFunction:
    """``(f~(x + t) + f~(x - t)) / 2`` at every node."""
    e = _as_extended(f)
    x = e.grid.nodes
    return GridFunction(e.grid, 0.5 * (e(x + t) + e(x - t)))


def sine_apply(f, t: float) -> GridFunction:
    """``(1/2) int_{x-t}^{x+t} f~(s) ds`` at every node."""
    e = _as_extended(f)
    x = e.grid.nodes
    return GridFunction(e.grid, 0.5 * (e.primitive(x + t) - e.primitive(x - t)))


def cosine_velocity(f, t: float) -> GridFunction:
    """Time derivative of ``cosine_apply(f, t)``.

    Uses the even extension of a second-order nodal derivative of ``f``.
    """
    e = _as_extended(f)
    grid = e.grid
    df = np.gradient(e.base.values, grid.h, edge_order=2)
    # derivative of an odd function is even: reuse the even table machinery
    n = grid.n_cells
    idx = np.arange(-n + 1, n + 1)
    table = df[np.abs(idx)]
    x = grid.nodes
    return GridFunction(grid, 0.5 * (e._lookup(table, x + t, 1) - e._lookup(table, x - t, 1)))


def boundary_flux_sine(f, t: float, alpha0: float, alpha1: float) -> BoundaryPair:
    """Flux operator applied to the sine kernel: ``(a0 f~(t), -a1 f~(1 - t))``."""
    e = _as_extended(f)
    vals = e(np.array([t, 1.0 - t]))
    return BoundaryPair(alpha0 * vals[0], -alpha1 * vals[1])


def miyadera_integral(f: GridFunction, alpha0: float, alpha1: float, norm_ord: float = 1) -> float:
    """Trapezoid quadrature of ``int_0^1 |B S(s) f| ds`` over the grid nodes.

    ``norm_ord`` selects the norm on the two-point boundary space; the default
    l1 norm gives ``(|a0| + |a1|) * ||f||_1`` exactly.
    """
    e = _as_extended(f)
    s = e.grid.nodes
    first = alpha0 * e(s)
    second = -alpha1 * e(1.0 - s)
    pointwise = np.linalg.norm(np.vstack([first, second]), ord=norm_ord, axis=0)
    return float(np.dot(e.grid.weights(), pointwise))


def miyadera_constant(alpha0: float, alpha1: float) -> float:
    return abs(alpha0) + abs(alpha1)


def miyadera_bound(f: GridFunction, alpha0: float, alpha1: float) -> float:
    """Right-hand side ``(|a0| + |a1|) ||f||_1``."""
    return miyadera_constant(alpha0, alpha1) * lp_norm(f, 1.0)
