"""Time integration of the coupled second-order system and trajectory diagnostics.

The integrator is kick-drift-kick Stormer-Verlet on (positions; velocities).
Velocity-dependent boundary forces are split trapezoidally: explicit in the
first half kick, implicit in the second, which keeps the scheme second order
and time-symmetric when the damping vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.fft
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .dalembert import ExtendedFunction, cosine_apply, cosine_velocity, sine_apply
from .dirichlet import dirichlet_closed_form
from .errors import BlowUpError, DomainError, PreconditionError
from .grid import BoundaryPair, Grid, GridFunction, lp_norm, one_sided_derivative
from .spectral import OperatorMatrix, ProblemSpec, assemble

TRACE_TOL = 1e-10
# acoustic flux compatibility is checked against a second-order stencil
ACOUSTIC_TOL_FACTOR = 50.0
SMOOTH_FLOOR = 1e-12
# sine coefficients of a datum whose odd extension has a kink decay like k^-3
ROUGH_EXPONENT = -4.0


@dataclass(frozen=True)
class PhaseState:
    """Displacement ``u``, velocity ``v`` and the boundary pair with its velocity.

    In trace mode ``x`` holds the endpoint values of ``u``; in acoustic mode it
    holds the outward fluxes ``delta``.
    """

    u: GridFunction
    v: GridFunction
    x: BoundaryPair
    xdot: BoundaryPair
    mode: str = "trace"

    def __post_init__(self):
        if self.mode == "trace":
            gap = abs(self.u.at0 - self.x.at0) + abs(self.u.at1 - self.x.at1)
            if gap > 1e-12:
                raise DomainError(f"trace state violates u(0), u(1) = x (gap {gap:.3g})")

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass
class Trajectory:
    """Samples of a solution: ``times[k]`` with state arrays and energies.

    ``positions`` and ``velocities`` are (n_samples, dim) arrays in the dof
    ordering of the operator matrix.
    """

    grid: Grid
    mode: str
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    energies: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    def u(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.positions[k, : self.grid.n_cells + 1])

    def v(self, k: int) -> GridFunction:
        return GridFunction(self.grid, self.velocities[k, : self.grid.n_cells + 1])

    def state(self, k: int) -> PhaseState:
        return _state_from_arrays(self.grid, self.mode, self.positions[k], self.velocities[k])

    @property
    def states(self) -> list:
        return [self.state(k) for k in range(len(self))]

    @property
    def sample_dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def l2_norms(self) -> np.ndarray:
        return np.array([lp_norm(self.u(k), 2.0) for k in range(len(self))])


def _state_from_arrays(grid: Grid, mode: str, pos: np.ndarray, vel: np.ndarray) -> PhaseState:
    n = grid.n_cells
    u = GridFunction(grid, pos[: n + 1])
    v = GridFunction(grid, vel[: n + 1])
    if mode == "trace":
        return PhaseState(u, v, BoundaryPair(pos[0], pos[n]), BoundaryPair(vel[0], vel[n]), mode)
    return PhaseState(u, v, BoundaryPair(pos[n + 1], pos[n + 2]), BoundaryPair(vel[n + 1], vel[n + 2]), mode)


def _state_to_arrays(s: PhaseState):
    if s.mode == "trace":
        return s.u.values.copy(), s.v.values.copy()
    return (
        np.concatenate((s.u.values, s.x.as_array())),
        np.concatenate((s.v.values, s.xdot.as_array())),
    )


def init_state(
    f: GridFunction,
    g: Optional[GridFunction],
    h: BoundaryPair,
    j: BoundaryPair,
    spec: ProblemSpec,
) -> PhaseState:
    """Validate initial data against the coupling and build the initial phase state.

    Trace mode requires ``f(0), f(1) = h`` and ``g(0), g(1) = j``. Acoustic
    mode requires ``h = (-f'(0), f'(1))`` to second order and places no
    condition on the velocity traces.
    """
    grid = f.grid
    g = grid.zeros() if g is None else g
    if spec.is_trace:
        for name, fn, pair in (("f", f, h), ("g", g, j)):
            for side, val, want in (("0", fn.at0, pair.at0), ("1", fn.at1, pair.at1)):
                if abs(val - want) > TRACE_TOL:
                    raise PreconditionError(
                        f"compatibility violated: {name}({side}) = {val:.12g} but boundary datum is {want:.12g}"
                    )
        return PhaseState(f, g, BoundaryPair(f.at0, f.at1), BoundaryPair(g.at0, g.at1), "trace")
    tol = ACOUSTIC_TOL_FACTOR * grid.h**2 * max(1.0, float(np.max(np.abs(f.values))))
    fluxes = (-one_sided_derivative(f, "left"), one_sided_derivative(f, "right"))
    for side, val, want in (("0", fluxes[0], h.at0), ("1", fluxes[1], h.at1)):
        if abs(val - want) > tol:
            raise PreconditionError(
                f"compatibility violated: outward flux of f at {side} is {val:.6g} but delta({side}) = {want:.6g}"
            )
    return PhaseState(f, g, h, j, "normal_derivative")


class _Stepper:
    """Pre-factored leapfrog update for a fixed (matrix, dt) pair."""

    def __init__(self, m: OperatorMatrix, dt: float):
        self.m = m
        self.dt = dt
        self.a = sp.csr_matrix(m.entries)
        self.damp = damping_matrix(m)
        self.damped = self.damp.nnz > 0
        if self.damped:
            lhs = sp.identity(m.dim, format="csc") - 0.5 * dt * self.damp.tocsc()
            self._solve = splu(lhs.tocsc()).solve

    def __call__(self, u: np.ndarray, v: np.ndarray):
        dt = self.dt
        kick = v + 0.5 * dt * (self.a @ u)
        if self.damped:
            kick += 0.5 * dt * (self.damp @ v)
        u_new = u + dt * kick
        rhs = kick + 0.5 * dt * (self.a @ u_new)
        v_new = self._solve(rhs) if self.damped else rhs
        return u_new, v_new


def damping_matrix(m: OperatorMatrix) -> sp.csr_matrix:
    """Velocity-to-acceleration couplings acting on the boundary rows."""
    spec, n = m.spec, m.grid.n_cells
    rows, cols, vals = [], [], []
    if spec.is_trace:
        scale = m.boundary_scale
        for k, (node, c, ct) in enumerate(((0, spec.damp_c0, spec.damp_ct0), (n, spec.damp_c1, spec.damp_ct1))):
            # u'(j) and x'_j coincide on the coupled domain
            if c + ct != 0:
                rows.append(node), cols.append(node), vals.append((c + ct) * scale[k])
    else:
        d0, d1 = m.dof_map.boundary
        for d, node, p, r in ((d0, 0, spec.ac_p0, spec.ac_r0), (d1, n, spec.ac_p1, spec.ac_r1)):
            if p != 0:
                rows.append(d), cols.append(node), vals.append(p)
            if r != 0:
                rows.append(d), cols.append(d), vals.append(r)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m.dim, m.dim))


def _check_dt(dt: float, grid: Grid) -> None:
    if not math.isfinite(dt) or dt == 0:
        raise DomainError(f"time step must be finite and nonzero, got {dt}")
    if abs(dt) > 0.5 * grid.h * (1 + 1e-12):
        raise PreconditionError(f"|dt| = {abs(dt):.3g} exceeds the stability limit 0.5 h = {0.5 * grid.h:.3g}")


def step_leapfrog(
    s: PhaseState, dt: float, spec: ProblemSpec, m: Optional[OperatorMatrix] = None
) -> PhaseState:
    """One kick-drift-kick step; negative ``dt`` integrates backwards."""
    grid = s.grid
    _check_dt(dt, grid)
    m = assemble(spec, grid) if m is None else m
    u, v = _state_to_arrays(s)
    u, v = _Stepper(m, dt)(u, v)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise BlowUpError(1)
    return _state_from_arrays(grid, s.mode, u, v)


def energy(s: PhaseState, spec: ProblemSpec) -> float:
    """Quadratic energy of a trace-mode state.

    ``E = 1/2 ||v||^2 + 1/2 |x'|^2 + 1/2 int |u'|^2 - 1/2 int r |u|^2 - 1/2 beta_j |u(j)|^2``
    with trapezoid quadrature and the derivative taken on cell midpoints.
    For ``alpha = (1, -1)`` and ``q = 0`` this is exactly conserved by the
    semi-discrete system.
    """
    grid = s.grid
    w = grid.weights()
    u, v = s.u.values, s.v.values
    kinetic = 0.5 * np.dot(w, v * v) + 0.5 * (s.xdot.at0**2 + s.xdot.at1**2)
    du = np.diff(u) / grid.h
    potential = 0.5 * grid.h * np.dot(du, du)
    r = spec.r_on(grid)
    if r is not None:
        potential -= 0.5 * np.dot(w, r.values * u * u)
    potential -= 0.5 * (spec.beta0 * u[0] ** 2 + spec.beta1 * u[-1] ** 2)
    return float(kinetic + potential)


def interior_energy(s: PhaseState) -> float:
    """``1/2 ||v||^2 + 1/2 int |u'|^2``; used for acoustic-mode trajectories."""
    grid = s.grid
    du = np.diff(s.u.values) / grid.h
    return float(0.5 * np.dot(grid.weights(), s.v.values**2) + 0.5 * grid.h * np.dot(du, du))


def _energy_of(grid, mode, spec, pos, vel) -> float:
    st = _state_from_arrays(grid, mode, pos, vel)
    return energy(st, spec) if mode == "trace" else interior_energy(st)


def simulate(
    spec: ProblemSpec,
    grid: Grid,
    f: GridFunction,
    g: Optional[GridFunction],
    h: BoundaryPair,
    j: BoundaryPair,
    T: float,
    dt: Optional[float] = None,
    stride: int = 1,
) -> Trajectory:
    """Integrate to time ``T`` and sample every ``stride`` steps.

    ``dt`` defaults to ``h / 2``; it is shrunk slightly if needed so that an
    integer number of steps lands exactly on ``T``.
    """
    if not T > 0:
        raise DomainError(f"final time must be positive, got {T}")
    state = init_state(f, g, h, j, spec)
    dt = 0.5 * grid.h if dt is None else dt
    _check_dt(dt, grid)
    n_steps = int(math.ceil(T / dt - 1e-9))
    dt = T / n_steps
    m = assemble(spec, grid)
    stepper = _Stepper(m, dt)
    u, v = _state_to_arrays(state)
    mode = state.mode

    n_samples = n_steps // stride + 1
    pos = np.empty((n_samples, u.size))
    vel = np.empty((n_samples, u.size))
    pos[0], vel[0] = u, v
    k = 1
    for step in range(1, n_steps + 1):
        u, v = stepper(u, v)
        if not (np.isfinite(u).all() and np.isfinite(v).all()):
            raise BlowUpError(step)
        if step % stride == 0:
            pos[k], vel[k] = u, v
            k += 1
    times = np.arange(n_samples) * stride * dt
    energies = np.array([_energy_of(grid, mode, spec, pos[i], vel[i]) for i in range(n_samples)])
    return Trajectory(grid, mode, times, pos, vel, energies)


def _lift0(y: BoundaryPair, grid: Grid) -> GridFunction:
    return dirichlet_closed_form(0.0, y, grid).profile


def closed_form_trace_solution(
    f: GridFunction,
    g: Optional[GridFunction],
    h: BoundaryPair,
    j: BoundaryPair,
    t: float,
    grid: Optional[Grid] = None,
) -> PhaseState:
    """Exact solution for vanishing boundary couplings (``alpha = beta = 0``, ``q = r = 0``).

    ``u(t) = C(t)(f - D0 h) + D0 h + S(t)(g - D0 j) + t D0 j`` and ``x(t) = h + t j``,
    where ``D0`` is the linear harmonic lifting.
    """
    grid = f.grid if grid is None else grid
    g = grid.zeros() if g is None else g
    for side, val, want in (("0", f.at0, h.at0), ("1", f.at1, h.at1)):
        if abs(val - want) > TRACE_TOL:
            raise PreconditionError(
                f"compatibility violated: f({side}) = {val:.12g} but h = {want:.12g}"
            )
    d0h, d0j = _lift0(h, grid), _lift0(j, grid)
    e_f = ExtendedFunction(f - d0h)
    e_g = ExtendedFunction(g - d0j)
    x_t = h + t * j
    u = cosine_apply(e_f, t) + d0h + sine_apply(e_g, t) + t * d0j
    v = cosine_velocity(e_f, t) + cosine_apply(e_g, t) + d0j
    # endpoints carry the boundary motion exactly
    u_vals = u.values.copy()
    u_vals[0], u_vals[-1] = x_t.at0, x_t.at1
    return PhaseState(GridFunction(grid, u_vals), v, x_t, j, "trace")


def closed_form_trajectory(
    f: GridFunction,
    g: Optional[GridFunction],
    h: BoundaryPair,
    j: BoundaryPair,
    times: Sequence[float],
    spec: Optional[ProblemSpec] = None,
) -> Trajectory:
    """Sample :func:`closed_form_trace_solution` at ``times``."""
    spec = ProblemSpec() if spec is None else spec
    grid = f.grid
    states = [closed_form_trace_solution(f, g, h, j, t, grid) for t in times]
    pos = np.array([s.u.values for s in states])
    vel = np.array([s.v.values for s in states])
    energies = np.array([energy(s, spec) for s in states])
    return Trajectory(grid, "trace", np.asarray(times, dtype=float), pos, vel, energies)


def inhomogeneous_bc_solution(
    psi: BoundaryPair,
    xi: BoundaryPair,
    f: GridFunction,
    g: Optional[GridFunction],
    t: float,
    grid: Optional[Grid] = None,
    j: Optional[BoundaryPair] = None,
) -> PhaseState:
    """Solution with boundary values moving as ``x(t) = psi t + xi``.

    ``j``, if given, must agree with ``psi``; the problem is the closed-form
    trace solution with ``h = xi`` and boundary velocity ``psi``.
    """
    if j is not None and (j.at0, j.at1) != (psi.at0, psi.at1):
        raise PreconditionError(f"boundary velocity {j} differs from psi {psi}")
    return closed_form_trace_solution(f, g, xi, psi, t, grid)


def _sample_offset(traj: Trajectory, duration: float) -> int:
    dt = traj.sample_dt
    if dt <= 0:
        raise DomainError("trajectory has fewer than two samples")
    k = int(round(duration / dt))
    if abs(k * dt - duration) > 1e-9 * max(1.0, duration):
        raise DomainError(f"duration {duration} is not a multiple of the sample spacing {dt}")
    return k


def periodicity_defect(traj: Trajectory, period: float) -> float:
    """``max_t0 ||u(t0 + period) - u(t0)||_2 / ||u(0)||_2`` over the available ``t0``."""
    k = _sample_offset(traj, period)
    if k >= len(traj) or k <= 0:
        raise DomainError(f"trajectory covers {traj.times[-1]:.6g} < period {period}")
    ref = lp_norm(traj.u(0), 2.0)
    ref = ref if ref > 0 else 1.0
    n = traj.grid.n_cells + 1
    worst = 0.0
    for i in range(len(traj) - k):
        diff = GridFunction(traj.grid, traj.positions[i + k, :n] - traj.positions[i, :n])
        worst = max(worst, lp_norm(diff, 2.0))
    return worst / ref


def recurrence_defect(traj: Trajectory, window: tuple) -> float:
    """``min_{t in window} (||u(t) - u(0)|| + ||v(t) - v(0)||) / (||u(0)|| + ||v(0)||)``."""
    a, b = window
    idx = np.nonzero((traj.times >= a - 1e-12) & (traj.times <= b + 1e-12))[0]
    if idx.size == 0:
        raise DomainError(f"window {window} contains no samples")
    u0, v0 = traj.u(0), traj.v(0)
    ref = lp_norm(u0, 2.0) + lp_norm(v0, 2.0)
    ref = ref if ref > 0 else 1.0
    best = min(lp_norm(traj.u(k) - u0, 2.0) + lp_norm(traj.v(k) - v0, 2.0) for k in idx)
    return best / ref


def sine_coefficient_exponent(u: GridFunction, kmax: Optional[int] = None, floor: float = SMOOTH_FLOOR) -> float:
    """Least-squares slope of ``log |c_k|`` against ``log k`` for the discrete sine series.

    Only ``k <= N/4`` and coefficients above ``floor * max |c|`` enter the fit;
    ``-inf`` is returned when fewer than three coefficients survive.
    """
    n = u.grid.n_cells
    kmax = n // 4 if kmax is None else kmax
    c = np.abs(scipy.fft.dst(u.values[1:-1], type=1)) / n
    k = np.arange(1, c.size + 1)
    c, k = c[:kmax], k[:kmax]
    top = np.max(c) if c.size else 0.0
    keep = c > floor * top if top > 0 else np.zeros_like(c, dtype=bool)
    if np.count_nonzero(keep) < 3:
        return -math.inf
    slope, _ = np.polyfit(np.log(k[keep]), np.log(c[keep]), 1)
    return float(slope)


def smoothness_diagnostic(traj: Trajectory, indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """Sine-coefficient decay exponent of ``u(t)`` at the requested samples (default all)."""
    indices = range(len(traj)) if indices is None else indices
    return np.array([sine_coefficient_exponent(traj.u(k)) for k in indices])


def smoothness_preserved(exponents: Sequence[float], tol: float = 1.0) -> bool:
    """True when no exponent is more than ``tol`` shallower than the initial one."""
    e = np.asarray(exponents, dtype=float)
    return bool(np.all(e <= e[0] + tol))


def roughness_flags(exponents: Sequence[float], threshold: float = ROUGH_EXPONENT) -> np.ndarray:
    """True where the decay exponent is shallower than ``threshold``."""
    return np.asarray(exponents, dtype=float) > threshold
