"""Coupled operator matrices for the wave equation with dynamical boundary conditions.

Two couplings are supported:

* ``trace``: the boundary unknowns are the endpoint values ``u(0), u(1)`` and
  evolve by ``x_j'' = alpha_j u'(j) + beta_j x_j``.
* ``normal_derivative``: the boundary unknowns are the outward fluxes
  ``delta_0 = -u'(0)``, ``delta_1 = u'(1)`` (acoustic-type conditions).

In both cases the flux at an endpoint is imposed through a ghost node, which
keeps the boundary closure second order and, in trace mode, makes the
semi-discrete system conserve the discrete energy for ``alpha = (1, -1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Literal, Optional, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .dirichlet import check_dirichlet_pole, discrete_dirichlet, interior_stencil
from .errors import DomainError, NumericalError, SingularityError
from .grid import BoundaryPair, Grid, GridFunction

Coupling = Literal["trace", "normal_derivative"]
Coefficient = Union[None, float, Callable[[np.ndarray], np.ndarray], GridFunction]

MAX_DENSE_DIM = 2000
CHAR_POLE_RADIUS = 1e-8


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients of the coupled problem.

    ``q_coef`` and ``r_coef`` may be ``None`` (zero), a constant, a callable of
    ``x`` or a :class:`GridFunction`; they are sampled with :meth:`q_on` and
    :meth:`r_on`. ``damp_c*`` multiply the endpoint velocity of ``u`` and
    ``damp_ct*`` the boundary velocity; ``ac_*`` are the acoustic-mode
    coefficients at the two endpoints.
    """

    coupling: Coupling = "trace"
    lp_exponent: float = 2.0
    q_coef: Coefficient = None
    r_coef: Coefficient = None
    alpha0: float = 0.0
    alpha1: float = 0.0
    beta0: float = 0.0
    beta1: float = 0.0
    damp_c0: float = 0.0
    damp_c1: float = 0.0
    damp_ct0: float = 0.0
    damp_ct1: float = 0.0
    ac_p0: float = 0.0
    ac_p1: float = 0.0
    ac_q0: float = 0.0
    ac_q1: float = 0.0
    ac_r0: float = 0.0
    ac_r1: float = 0.0

    def __post_init__(self):
        if self.coupling not in ("trace", "normal_derivative"):
            raise DomainError(f"unknown coupling {self.coupling!r}")
        if not (math.isfinite(self.lp_exponent) and self.lp_exponent >= 1):
            raise DomainError(f"lp_exponent must lie in [1, inf), got {self.lp_exponent}")
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("coupling", "q_coef", "r_coef"):
                continue
            if not math.isfinite(float(v)):
                raise DomainError(f"{f.name} must be finite, got {v}")
        for name in ("q_coef", "r_coef"):
            v = getattr(self, name)
            if isinstance(v, (int, float)) and not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v}")

    @property
    def is_trace(self) -> bool:
        return self.coupling == "trace"

    def _sample(self, coef: Coefficient, grid: Grid) -> Optional[GridFunction]:
        if coef is None:
            return None
        if isinstance(coef, GridFunction):
            if coef.grid != grid:
                raise DomainError("coefficient sampled on a different grid")
            return coef
        if callable(coef):
            return grid.sample(coef)
        return GridFunction(grid, np.full(grid.n_cells + 1, float(coef)))

    def q_on(self, grid: Grid) -> Optional[GridFunction]:
        return self._sample(self.q_coef, grid)

    def r_on(self, grid: Grid) -> Optional[GridFunction]:
        return self._sample(self.r_coef, grid)

    def has_pure_second_derivative(self, grid: Grid) -> bool:
        """True when ``q = r = 0`` on ``grid``."""
        return all(
            c is None or not np.any(c.values) for c in (self.q_on(grid), self.r_on(grid))
        )

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class DofMap:
    mode: Coupling
    n_nodes: int
    boundary: tuple  # indices of the boundary unknowns (x_0, x_1) or (delta_0, delta_1)
    interior: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense position-to-acceleration map ``u'' = M u`` on the coupled unknowns.

    Trace mode orders the unknowns as the nodes ``0..N``; the endpoint nodes
    are the boundary dofs. Normal-derivative mode appends ``delta_0, delta_1``
    after the nodes. ``boundary_scale`` is the factor ``1 / (1 + kappa_j)``
    applied to forces acting on the trace-mode boundary rows.
    """

    grid: Grid
    spec: ProblemSpec
    entries: np.ndarray = field(repr=False)
    dof_map: DofMap
    kappa: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def boundary_scale(self) -> np.ndarray:
        return 1.0 / np.array([1.0 + self.kappa[0], 1.0 - self.kappa[1]])

    def interior_block(self) -> np.ndarray:
        i = self.dof_map.interior
        return self.entries[np.ix_(i, i)]


def closure_kappa(spec: ProblemSpec, grid: Grid) -> np.ndarray:
    """Ghost-node factors ``kappa_j`` linking the endpoint flux to the boundary acceleration."""
    h = grid.h
    q = spec.q_on(grid)
    q0, qn = (0.0, 0.0) if q is None else (q.values[0], q.values[-1])
    den0, den1 = 2.0 - h * q0, 2.0 + h * qn
    if den0 == 0 or den1 == 0:
        raise DomainError("first-order coefficient makes the boundary closure singular")
    kappa = np.array([spec.alpha0 * h / den0, spec.alpha1 * h / den1])
    if abs(1.0 + kappa[0]) < 1e-12 or abs(1.0 - kappa[1]) < 1e-12:
        raise DomainError("boundary coupling makes the ghost-node closure singular")
    return kappa


def assemble(spec: ProblemSpec, grid: Grid) -> OperatorMatrix:
    """Assemble the coupled operator matrix on ``grid``."""
    if not isinstance(spec, ProblemSpec):
        raise DomainError("assemble expects a ProblemSpec")
    n, h = grid.n_cells, grid.h
    lower, diag, upper = interior_stencil(grid, spec.q_on(grid), spec.r_on(grid))
    r = spec.r_on(grid)
    r0, rn = (0.0, 0.0) if r is None else (r.values[0], r.values[-1])
    interior = np.arange(1, n)

    if spec.is_trace:
        m = np.zeros((n + 1, n + 1))
        m[interior, interior - 1] = lower[1:n]
        m[interior, interior] = diag[1:n]
        m[interior, interior + 1] = upper[1:n]
        kappa = closure_kappa(spec, grid)
        k0, k1 = kappa
        # (1 + k0) x0'' = k0 (2 (u1 - u0) / h^2 + r0 u0) + beta0 u0
        m[0, 0] = (k0 * (-2.0 / h**2 + r0) + spec.beta0) / (1.0 + k0)
        m[0, 1] = k0 * 2.0 / h**2 / (1.0 + k0)
        # (1 - k1) x1'' = -k1 (2 (u_{N-1} - u_N) / h^2 + r_N u_N) + beta1 u_N
        m[n, n] = (-k1 * (-2.0 / h**2 + rn) + spec.beta1) / (1.0 - k1)
        m[n, n - 1] = -k1 * 2.0 / h**2 / (1.0 - k1)
        dof = DofMap("trace", n + 1, (0, n), interior)
    else:
        m = np.zeros((n + 3, n + 3))
        nodes = np.arange(n + 1)
        m[interior, interior - 1] = lower[1:n]
        m[interior, interior + 1] = upper[1:n]
        m[nodes, nodes] = diag
        d0, d1 = n + 1, n + 2
        # ghost u_{-1} = u_1 + 2 h delta_0 from u'(0) = -delta_0
        m[0, 1] = lower[0] + upper[0]
        m[0, d0] = 2.0 * h * lower[0]
        # ghost u_{N+1} = u_{N-1} + 2 h delta_1 from u'(1) = delta_1
        m[n, n - 1] = lower[n] + upper[n]
        m[n, d1] = 2.0 * h * upper[n]
        m[d0, d0] = spec.ac_q0
        m[d1, d1] = spec.ac_q1
        kappa = np.zeros(2)
        dof = DofMap("normal_derivative", n + 1, (d0, d1), interior)
    return OperatorMatrix(grid, spec, m, dof, kappa)


def eigs(m) -> np.ndarray:
    """All eigenvalues of a dense matrix, sorted by real part (then imaginary part)."""
    a = m.entries if isinstance(m, OperatorMatrix) else np.asarray(m, dtype=float)
    if a.shape[0] > MAX_DENSE_DIM:
        raise DomainError(f"dense eigensolve limited to dim <= {MAX_DENSE_DIM}, got {a.shape[0]}")
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        # LAPACK geev does not expose its iteration count, only the failing index
        raise NumericalError(f"QR iteration did not converge: {exc}") from exc
    order = np.lexsort((vals.imag, vals.real))
    return vals[order]


def dirichlet_spectrum(n: int, grid: Grid) -> np.ndarray:
    """Closed-form eigenvalues ``-(4/h^2) sin^2(k pi h / 2)``, k = 1..n, of the second difference."""
    k = np.arange(1, n + 1)
    return -(4.0 / grid.h**2) * np.sin(k * np.pi * grid.h / 2.0) ** 2


def _endpoint_fluxes(profile: np.ndarray, lam: float, grid: Grid, spec: ProblemSpec) -> np.ndarray:
    """Ghost-node fluxes ``u'(0), u'(1)`` of a profile in ker(lam - A_h)."""
    h = grid.h
    q, r = spec.q_on(grid), spec.r_on(grid)
    q0, qn = (0.0, 0.0) if q is None else (q.values[0], q.values[-1])
    r0, rn = (0.0, 0.0) if r is None else (r.values[0], r.values[-1])
    u = profile
    p0 = 2.0 * (u[1] - u[0]) / h**2 + r0 * u[0]
    pn = 2.0 * (u[-2] - u[-1]) / h**2 + rn * u[-1]
    g0 = (p0 - lam * u[0]) / (2.0 / h - q0)
    g1 = (lam * u[-1] - pn) / (2.0 / h + qn)
    return np.array([g0, g1])


def _guard(lam: float, spec: ProblemSpec, grid: Grid) -> None:
    if spec.has_pure_second_derivative(grid):
        check_dirichlet_pole(lam)


def dirichlet_columns(lam: float, spec: ProblemSpec, grid: Grid) -> np.ndarray:
    """Discrete ``D_lam e_0`` and ``D_lam e_1`` as the columns of an (N+1) x 2 array."""
    q, r = spec.q_on(grid), spec.r_on(grid)
    cols = [
        discrete_dirichlet(lam, BoundaryPair(*e), grid, q, r).profile.values
        for e in ((1.0, 0.0), (0.0, 1.0))
    ]
    return np.column_stack(cols)


def b_lambda(lam: float, spec: ProblemSpec, grid: Grid) -> np.ndarray:
    """Boundary symbol ``B~ + B D_lam`` as a 2x2 matrix (trace mode)."""
    if not spec.is_trace:
        raise DomainError("b_lambda is defined for the trace coupling")
    _guard(lam, spec, grid)
    cols = dirichlet_columns(lam, spec, grid)
    alpha = np.array([spec.alpha0, spec.alpha1])
    out = np.empty((2, 2))
    for j in range(2):
        out[:, j] = alpha * _endpoint_fluxes(cols[:, j], lam, grid, spec)
    out += np.diag([spec.beta0, spec.beta1])
    return out


def _cot_terms(lam: float):
    """``(sqrt(lam) coth sqrt(lam), sqrt(lam) / sinh sqrt(lam))`` continued to real ``lam``."""
    if lam > 0:
        mu = math.sqrt(lam)
        if mu < 1e-8:
            return 1.0 + lam / 3.0, 1.0 - lam / 6.0
        e = -math.expm1(-2.0 * mu)
        return mu * (2.0 - e) / e, 2.0 * mu * math.exp(-mu) / e
    if lam == 0:
        return 1.0, 1.0
    sigma = math.sqrt(-lam)
    k = round(sigma / math.pi)
    if k >= 1 and abs(sigma - k * math.pi) < CHAR_POLE_RADIUS:
        raise SingularityError(f"lambda={lam!r} is a pole of the characteristic function (k={k})")
    return sigma * math.cos(sigma) / math.sin(sigma), sigma / math.sin(sigma)


def analytic_b_lambda(lam: float, alpha0: float, alpha1: float, beta0: float, beta1: float) -> np.ndarray:
    """Boundary symbol of the pure second derivative from the closed-form lifting."""
    c, s = _cot_terms(lam)
    return np.array(
        [[beta0 - alpha0 * c, alpha0 * s], [-alpha1 * s, beta1 + alpha1 * c]]
    )


def char_eval(lam: float, beta0: float, beta1: float) -> float:
    """Left-hand side of the characteristic equation for ``alpha = (1, -1)``, ``q = r = 0``."""
    c, _ = _cot_terms(lam)
    bsum = beta0 + beta1
    return lam * lam + lam * (1.0 + 2.0 * c - bsum) - bsum * c + beta0 * beta1


def char_roots(
    beta0: float,
    beta1: float,
    lam_min: float,
    lam_max: float,
    pole_margin: float = 1e-6,
    xtol: float = 1e-10,
) -> np.ndarray:
    """Real roots of the characteristic equation in ``[lam_min, lam_max]`` (``lam_max <= 0``).

    The interval is split at the poles ``-k^2 pi^2``; each piece is scanned with
    step at most ``0.01 pi^2`` and sign changes are refined with Brent's method.
    """
    if not lam_min < lam_max <= 0:
        raise DomainError(f"need lam_min < lam_max <= 0, got [{lam_min}, {lam_max}]")
    kmax = int(math.floor(math.sqrt(-lam_min) / math.pi)) + 1
    poles = [-(k * math.pi) ** 2 for k in range(1, kmax + 1)]
    cuts = sorted([p for p in poles if lam_min < p < lam_max])
    edges = [lam_min] + cuts + [lam_max]
    step_max = 0.01 * math.pi**2
    f = lambda lam: char_eval(lam, beta0, beta1)

    roots = []
    for a, b in zip(edges[:-1], edges[1:]):
        # margin is relative so it stays outside the char_eval pole guard
        a_in = a + pole_margin * abs(a) if a in cuts else a
        b_in = b - pole_margin * abs(b) if b in cuts else b
        if a_in >= b_in:
            continue
        n = max(20, int(math.ceil((b_in - a_in) / step_max)))
        xs = np.linspace(a_in, b_in, n + 1)
        vals = np.array([f(x) for x in xs])
        for i in range(n):
            if vals[i] == 0.0:
                roots.append(xs[i])
            elif vals[i] * vals[i + 1] < 0:
                roots.append(brentq(f, xs[i], xs[i + 1], xtol=xtol))
        if vals[-1] == 0.0:
            roots.append(xs[-1])
    roots = np.sort(np.asarray(roots, dtype=float))
    if roots.size:
        keep = np.concatenate(([True], np.diff(roots) > 10 * xtol))
        roots = roots[keep]
    return roots


def _block_split(m: OperatorMatrix):
    i = m.dof_map.interior
    b = np.array(m.dof_map.boundary)
    a = m.entries
    return a[np.ix_(i, i)], a[np.ix_(i, b)], a[np.ix_(b, i)], a[np.ix_(b, b)]


def row_symbol(lam: float, spec: ProblemSpec, grid: Grid) -> np.ndarray:
    """Boundary symbol in the row normalization of the assembled matrix.

    The assembled boundary rows carry the ghost-node mass factor
    ``1 + kappa``; the symbol seen by those rows is
    ``(b_lambda + kappa lam) / (1 + kappa)`` row by row.
    """
    kappa = closure_kappa(spec, grid)
    b = b_lambda(lam, spec, grid)
    b[0] = (b[0] + np.array([kappa[0] * lam, 0.0])) / (1.0 + kappa[0])
    b[1] = (b[1] - np.array([0.0, kappa[1] * lam])) / (1.0 - kappa[1])
    return b


def factorization_residual(lam: float, spec: ProblemSpec, grid: Grid) -> float:
    """Max-norm defect of ``M - lam = A_lam L_lam`` in decoupled coordinates.

    ``L_lam = [[I, -D_lam], [0, I]]`` and
    ``A_lam = [[A_0 - lam, 0], [B, B_lam - lam]]`` with ``D_lam`` from the
    tridiagonal Dirichlet solve and ``B_lam`` from :func:`row_symbol`.
    """
    if not spec.is_trace:
        raise DomainError("the factorization is stated for the trace coupling")
    _guard(lam, spec, grid)
    m = assemble(spec, grid)
    a00, a0x, bi, bx = _block_split(m)
    ni = a00.shape[0]
    d = dirichlet_columns(lam, spec, grid)[m.dof_map.interior, :]
    sym = row_symbol(lam, spec, grid)

    eye_i, eye_b = np.eye(ni), np.eye(2)
    big_l = np.block([[eye_i, -d], [np.zeros((2, ni)), eye_b]])
    big_a = np.block([[a00 - lam * eye_i, np.zeros((ni, 2))], [bi, sym - lam * eye_b]])
    lhs = np.block([[a00 - lam * eye_i, a0x], [bi, bx - lam * eye_b]])
    return float(np.max(np.abs(lhs - big_a @ big_l)))


def periodicity_condition_check(
    roots: Sequence[float], gamma: float, tol: float, admit_zero: bool = False
) -> bool:
    """True iff every root is within ``tol`` of ``-(2 pi / gamma)^2 n^2`` for an integer n.

    ``n`` ranges over the positive integers, or also 0 when ``admit_zero``.
    """
    if not gamma > 0:
        raise DomainError(f"period must be positive, got {gamma}")
    base = (2.0 * math.pi / gamma) ** 2
    nmin = 0 if admit_zero else 1
    for rho in roots:
        n0 = round(math.sqrt(max(-rho, 0.0) / base))
        candidates = [n for n in (n0 - 1, n0, n0 + 1) if n >= nmin]
        if not any(abs(rho + base * n * n) <= tol for n in candidates):
            return False
    return True


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    checked_eigenvalues: np.ndarray
    match_residuals: np.ndarray
    discrete_residuals: np.ndarray
    char_roots: np.ndarray
    root_distances: np.ndarray
    gamma_periodic: Optional[float] = None

    @property
    def max_residual(self) -> float:
        return float(np.max(self.match_residuals)) if self.match_residuals.size else 0.0


def spectral_equivalence_check(
    spec: ProblemSpec,
    grid: Grid,
    window: tuple = (-50.0, 0.0),
    gap: float = 0.5,
    root_floor: float = -0.05,
    gamma_tol: float = 1e-6,
    max_k: int = 10,
    admit_zero: bool = False,
) -> SpectralReport:
    """Compare the real spectrum of the assembled matrix with ``det(lam - B_lam) = 0``.

    Eigenvalues inside ``window`` and farther than ``gap`` from ``-pi^2 N^2`` are
    checked against the closed-form symbol (``match_residuals``) and against
    the discrete symbol (``discrete_residuals``). For ``alpha = (1, -1)`` the
    characteristic roots in ``[window[0], root_floor]`` are also located and
    matched back to the spectrum.
    """
    if not spec.is_trace:
        raise DomainError("spectral equivalence is stated for the trace coupling")
    ev = eigs(assemble(spec, grid))
    scale = np.maximum(1.0, np.abs(ev))
    real = ev[np.abs(ev.imag) <= 1e-9 * scale].real
    lo, hi = window
    kk = np.arange(1, int(math.sqrt(max(-lo, 0.0)) / math.pi) + 3)
    sigma0 = -(kk * math.pi) ** 2
    dist = np.array([np.min(np.abs(l - sigma0)) for l in real]) if real.size else np.array([])
    checked = real[(real >= lo) & (real <= hi) & (dist > gap)]

    pure = spec.has_pure_second_derivative(grid)
    match, discrete = [], []
    for lam in checked:
        if pure:
            b = analytic_b_lambda(lam, spec.alpha0, spec.alpha1, spec.beta0, spec.beta1)
            match.append(abs(np.linalg.det(lam * np.eye(2) - b)))
        discrete.append(abs(np.linalg.det(row_symbol(lam, spec, grid) - lam * np.eye(2))))

    roots = np.array([])
    distances = np.array([])
    gamma = None
    if pure and spec.alpha0 == 1.0 and spec.alpha1 == -1.0:
        roots = char_roots(spec.beta0, spec.beta1, lo, min(root_floor, hi))
        distances = np.array([np.min(np.abs(real - r)) for r in roots]) if real.size else np.full(roots.size, np.inf)
        for k in range(1, max_k + 1):
            if roots.size and periodicity_condition_check(roots, 2.0 * k, gamma_tol, admit_zero):
                gamma = 2.0 * k
                break
    return SpectralReport(
        eigenvalues=ev,
        checked_eigenvalues=checked,
        match_residuals=np.asarray(match),
        discrete_residuals=np.asarray(discrete),
        char_roots=roots,
        root_distances=distances,
        gamma_periodic=gamma,
    )
