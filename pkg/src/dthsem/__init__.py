"""Regularized symplectic-energy-momentum integration in extended phase space."""

from .core import Branch, EventKind, ExtendedState, StepResult, Trajectory, apply_J, midpoint
from .singularity import PsiEval, poisson_bracket, psi, psi_from_derivatives, psi_grad
from .stepper import (
    BracketLost,
    CrossingMode,
    DegenerateJacobian,
    IntegrationError,
    NoConvergence,
    NoRoot,
    SolverConfig,
    SolverError,
    integrate,
    integrate_reverse,
    solve_midpoint_state,
)
from .systems import (
    DomainError,
    SystemDefinition,
    extended_grad,
    extended_H,
    extended_hess,
    harmonic_oscillator,
    kepler_2d,
    lift,
    pendulum,
)

__version__ = "0.1.0"
