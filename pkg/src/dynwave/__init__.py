"""Wave equation on (0, 1) with dynamical boundary conditions: kernels, liftings, spectra, time stepping."""

from .config import RunConfig, parse_config
from .dalembert import (
    ExtendedFunction,
    boundary_flux_sine,
    cosine_apply,
    extend_eval,
    miyadera_bound,
    miyadera_integral,
    sine_apply,
)
from .dirichlet import (
    DirichletEvaluation,
    decay_exponent_fit,
    dirichlet_closed_form,
    dirichlet_norm,
    discrete_dirichlet,
)
from .errors import (
    BlowUpError,
    ConfigError,
    DomainError,
    DynwaveError,
    NumericalError,
    PreconditionError,
    SingularityError,
)
from .evolve import (
    PhaseState,
    Trajectory,
    closed_form_trace_solution,
    energy,
    inhomogeneous_bc_solution,
    init_state,
    periodicity_defect,
    recurrence_defect,
    simulate,
    roughness_flags,
    smoothness_diagnostic,
    smoothness_preserved,
    step_leapfrog,
)
from .grid import BoundaryPair, Grid, GridFunction, lp_norm, sobolev_seminorm
from .presets import ExperimentResult, run_preset
from .spectral import (
    OperatorMatrix,
    ProblemSpec,
    assemble,
    b_lambda,
    char_eval,
    char_roots,
    eigs,
    factorization_residual,
    periodicity_condition_check,
    spectral_equivalence_check,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
