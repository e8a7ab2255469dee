"""Dirichlet lifting operators: boundary data -> profiles in ker(lambda - A).

Closed forms are available for the pure second derivative; the discrete
solver handles the full stencil ``u'' + q u' + r u`` on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import DomainError, SingularityError
from .grid import BoundaryPair, Grid, GridFunction, lp_norm

POLE_RADIUS = 1e-8
# a lifted profile this much larger than its boundary data means lambda sits on a discrete eigenvalue
_AMPLIFICATION_LIMIT = 1e10


@dataclass(frozen=True)
class DirichletEvaluation:
    lam: float
    boundary: BoundaryPair
    profile: GridFunction


def check_dirichlet_pole(lam: float, radius: float = POLE_RADIUS) -> None:
    """Raise if ``lam`` is within ``radius`` of a Dirichlet eigenvalue -k^2 pi^2."""
    if lam >= 0:
        return
    k = max(1, round(np.sqrt(-lam) / np.pi))
    for kk in (k - 1, k, k + 1):
        if kk >= 1 and abs(lam + (kk * np.pi) ** 2) < radius:
            raise SingularityError(
                f"lambda={lam!r} is within {radius:g} of the Dirichlet eigenvalue -({kk} pi)^2"
            )


def _sinh_ratio(mu: float, s: np.ndarray) -> np.ndarray:
    """``sinh(mu s) / sinh(mu)`` without overflow for large ``mu``."""
    return np.exp(mu * (s - 1.0)) * np.expm1(-2.0 * mu * s) / np.expm1(-2.0 * mu)


def closed_form_profile(lam: float, y: BoundaryPair, s: np.ndarray) -> np.ndarray:
    """Pure second-derivative lifting ``D_lam y`` evaluated at points ``s``."""
    s = np.asarray(s, dtype=float)
    if lam > 0:
        mu = np.sqrt(lam)
        return y.at0 * _sinh_ratio(mu, 1.0 - s) + y.at1 * _sinh_ratio(mu, s)
    if lam == 0:
        return y.at0 * (1.0 - s) + y.at1 * s
    check_dirichlet_pole(lam)
    sigma = np.sqrt(-lam)
    return (y.at0 * np.sin(sigma * (1.0 - s)) + y.at1 * np.sin(sigma * s)) / np.sin(sigma)


def dirichlet_closed_form(lam: float, y: BoundaryPair, grid: Grid) -> DirichletEvaluation:
    """Closed-form lifting for ``q = r = 0``; sinh, linear or sin branch by the sign of ``lam``."""
    profile = closed_form_profile(lam, y, grid.nodes)
    # pin endpoint samples to the data (lifting property)
    profile[0], profile[-1] = y.at0, y.at1
    return DirichletEvaluation(lam, y, GridFunction(grid, profile))


def _coefficient(c: Optional[GridFunction], grid: Grid) -> np.ndarray:
    if c is None:
        return np.zeros(grid.n_cells + 1)
    if c.grid != grid:
        raise DomainError("coefficient sampled on a different grid")
    return c.values


def interior_stencil(grid: Grid, q: Optional[GridFunction] = None, r: Optional[GridFunction] = None):
    """Coefficients of ``A_h u = u'' + q u' + r u`` at every node.

    Returns ``(lower, diag, upper)`` so that
    ``(A_h u)_i = lower_i u_{i-1} + diag_i u_i + upper_i u_{i+1}``.
    """
    h = grid.h
    qv, rv = _coefficient(q, grid), _coefficient(r, grid)
    lower = 1.0 / h**2 - qv / (2.0 * h)
    upper = 1.0 / h**2 + qv / (2.0 * h)
    diag = -2.0 / h**2 + rv
    return lower, diag, upper


def discrete_dirichlet(
    lam: float,
    y: BoundaryPair,
    grid: Grid,
    q: Optional[GridFunction] = None,
    r: Optional[GridFunction] = None,
) -> DirichletEvaluation:
    """Solve ``(lam - A_h) u = 0`` at interior nodes with ``u_0, u_N`` given by ``y``."""
    n = grid.n_cells
    lower, diag, upper = interior_stencil(grid, q, r)
    m = n - 1
    ab = np.zeros((3, m))
    ab[0, 1:] = -upper[1 : n - 1]
    ab[1, :] = lam - diag[1:n]
    ab[2, :-1] = -lower[2:n]
    rhs = np.zeros(m)
    rhs[0] += lower[1] * y.at0
    rhs[-1] += upper[n - 1] * y.at1
    try:
        interior = solve_banded((1, 1), ab, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(f"lambda={lam!r} is a discrete Dirichlet eigenvalue") from exc
    scale = max(abs(y.at0), abs(y.at1))
    if not np.all(np.isfinite(interior)) or (
        scale > 0 and np.max(np.abs(interior)) > _AMPLIFICATION_LIMIT * scale
    ):
        raise SingularityError(f"lambda={lam!r} is (numerically) a discrete Dirichlet eigenvalue")
    profile = np.concatenate(([y.at0], interior, [y.at1]))
    return DirichletEvaluation(lam, y, GridFunction(grid, profile))


def l1_sphere_directions(n_directions: int, seed: int = 0) -> np.ndarray:
    """Points on the l1 unit circle: the four vertices plus seeded random directions."""
    if n_directions < 8:
        raise DomainError(f"n_directions must be >= 8, got {n_directions}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * np.pi, n_directions - 4)
    c, s = np.cos(theta), np.sin(theta)
    rand = np.column_stack([c, s]) / (np.abs(c) + np.abs(s))[:, None]
    vertices = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    return np.vstack([vertices, rand])


def dirichlet_norm(lam: float, p: float, grid: Grid, n_directions: int = 16, seed: int = 0) -> float:
    """Sampled operator norm of ``D_lam`` from (R^2, l1) into L^p(0, 1)."""
    if not lam > 0:
        raise DomainError(f"dirichlet_norm needs lambda > 0, got {lam}")
    s = grid.nodes
    left = closed_form_profile(lam, BoundaryPair(1.0, 0.0), s)
    right = closed_form_profile(lam, BoundaryPair(0.0, 1.0), s)
    best = 0.0
    for y0, y1 in l1_sphere_directions(n_directions, seed):
        best = max(best, lp_norm(GridFunction(grid, y0 * left + y1 * right), p))
    return best


def decay_exponent_fit(
    p: float,
    lam_grid: Sequence[float],
    grid: Grid,
    n_directions: int = 16,
    seed: int = 0,
) -> float:
    """Least-squares slope of ``log ||D_lam||`` against ``log lam``.

    The slope approaches ``-1/(2p)`` as ``lam -> +inf``.
    """
    lams = np.asarray(lam_grid, dtype=float)
    if lams.size < 3:
        raise DomainError(f"need at least 3 lambda values, got {lams.size}")
    if np.any(lams <= 0) or np.any(np.diff(lams) <= 0):
        raise DomainError("lambda grid must be positive and strictly increasing")
    if np.log10(lams[-1] / lams[0]) < 3.0 - 1e-12:
        raise DomainError("lambda grid must span at least three decades")
    norms = [dirichlet_norm(lam, p, grid, n_directions, seed) for lam in lams]
    slope, _ = np.polyfit(np.log(lams), np.log(norms), 1)
    return float(slope)
