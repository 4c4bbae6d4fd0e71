"""Numerical laboratory for a singularly perturbed damped wave equation and its parabolic limit."""

__version__ = "0.1.0"

from .errors import AuditFailure, ConfigurationError, DivergenceError, SolverError
from .grid import CoefficientField, Grid, build_grid, make_coefficients
from .operator import (
    DENSE_CAP,
    DiscreteOperator,
    build_operator,
    fractional_norm,
    inner_h1,
    inner_hminus1,
    inner_l2,
    lambda1,
    norm_h1,
    norm_hminus1,
    norm_l2,
)
from .cutoff import cutoff_field, ramp
from .nonlinearity import (
    CubicNonlinearity,
    TabulatedNonlinearity,
    cubic,
    dissipativity_audit,
    estimate_embedding_constants,
    growth_audit,
    tabulated,
    zero,
)
from .dynamics import (
    HyperbolicState,
    ParabolicState,
    Trajectory,
    find_equilibrium,
    gamma_lift,
    integrate,
    integrate_ensemble,
    slow_velocity,
    step,
)
from .energy import (
    F_eps,
    F_zero,
    V_lower,
    identity_ladder,
    tilde_V,
    uniform_bound_report,
)
from .tails import tail_energy, tail_fit, tail_profile
from .attractor import (
    AttractorApproximation,
    EnsembleSpec,
    SweepConfig,
    approximate_attractor,
    eps_sweep,
    hausdorff,
    sample_ensemble,
    semidistance,
)
