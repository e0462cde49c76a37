"""Independent checks of discrete trajectories.

Everything here re-derives its numbers from states and the system
definition instead of trusting values cached on :class:`StepResult`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import StepResult, Trajectory, apply_J
from .singularity import poisson_bracket, psi, psi_grad
from .stepper import (
    SolverConfig,
    SolverError,
    integrate,
    integrate_reverse,
    prepare_initial_state,
    step_ghost,
)
from .systems import DomainError, SystemDefinition, extended_grad, extended_H

Observable = tuple  # (name, value_fn(z), grad_fn(z) or None)


class DiagnosticError(RuntimeError):
    """A diagnostic could not be evaluated; ``component`` names the perturbed
    coordinate when the failure came from a finite-difference run."""

    def __init__(self, message: str, component: int | None = None):
        super().__init__(message)
        self.component = component


def one_step_action(step: StepResult) -> float:
    """``0.5 * dq_ext . dp_ext`` over the extended coordinates."""
    dq = step.z_end.qext - step.z_start.qext
    dp = step.z_end.pext - step.z_start.pext
    return 0.5 * float(np.dot(dq, dp))


def _j_matrix(m: int) -> np.ndarray:
    return np.block([[np.zeros((m, m)), np.eye(m)], [-np.eye(m), np.zeros((m, m))]])


def flow_jacobian(sys: SystemDefinition, z0, num_steps: int, cfg: SolverConfig | None = None,
                  fd_step: float = 1e-6) -> np.ndarray:
    """Central-difference ``dz_N/dz_0`` over all extended coordinates.

    Every perturbed run must follow the same branch sequence as the base
    run; otherwise the map is not differentiable across the perturbation and
    :class:`DiagnosticError` is raised.
    """
    cfg = cfg or SolverConfig()
    z = prepare_initial_state(sys, z0, cfg)
    dim = z.size
    if num_steps == 0:
        return np.eye(dim)
    try:
        base = integrate(sys, z, num_steps, cfg)
    except (SolverError, DomainError) as exc:
        raise DiagnosticError(f"unperturbed run failed: {exc}") from exc
    pattern = [s.branch for s in base.steps]
    M = np.empty((dim, dim))
    for j in range(dim):
        ends = []
        for sgn in (1.0, -1.0):
            zp = z.copy()
            zp[j] += sgn * fd_step
            try:
                tr = integrate(sys, zp, num_steps, cfg)
            except (SolverError, DomainError) as exc:
                raise DiagnosticError(f"perturbed run on component {j} failed: {exc}", j) from exc
            if [s.branch for s in tr.steps] != pattern:
                raise DiagnosticError(f"perturbing component {j} changed the branch sequence", j)
            ends.append(tr.z_final.z)
        M[:, j] = (ends[0] - ends[1]) / (2.0 * fd_step)
    return M


def symplecticity_check(sys: SystemDefinition, z0, num_steps: int, cfg: SolverConfig | None = None,
                        fd_step: float = 1e-6) -> float:
    """``max |M^T J M - J|`` for the finite-difference flow Jacobian ``M``."""
    M = flow_jacobian(sys, z0, num_steps, cfg, fd_step)
    Jm = _j_matrix(M.shape[0] // 2)
    return float(np.max(np.abs(M.T @ Jm @ M - Jm)))


def reversibility_check(sys: SystemDefinition, z0, num_steps: int,
                        cfg: SolverConfig | None = None) -> float:
    """Integrate forward, then backward from ``z_N``; return ``max |z0' - z0|``."""
    cfg = cfg or SolverConfig()
    z = prepare_initial_state(sys, z0, cfg)
    if num_steps == 0:
        return 0.0
    fwd = integrate(sys, z, num_steps, cfg)
    back = integrate_reverse(sys, fwd.z_final, num_steps, cfg)
    return float(np.max(np.abs(back.z_final.z - z)))


@dataclass
class ConservationReport:
    """Energy residuals at midpoints and observable drift at vertices.

    ``table`` has one row per step: ``k``, ``H_mid`` and one column per
    observable holding its value at ``z_{k+1}``.
    """

    max_abs_H_mid: float
    max_rel_drift: dict[str, float] = field(default_factory=dict)
    max_bracket_H: dict[str, float] = field(default_factory=dict)
    table: list[dict[str, float]] = field(default_factory=list)


def conservation_report(sys: SystemDefinition, traj: Trajectory,
                        observables: Sequence[Observable] = ()) -> ConservationReport:
    """Re-evaluate ``Hcal`` at every midpoint and track observables at vertices.

    Drift is relative to the value at ``z_0`` (absolute when that value is
    zero).  When an observable comes with a gradient, the largest
    ``|{O, Hcal}|`` over midpoints is recorded as well.
    """
    table = []
    h_max = 0.0
    drift = {name: 0.0 for name, *_ in observables}
    brackets = {name: 0.0 for name, _, g in observables if g is not None}
    refs = {}
    if traj.steps:
        z0 = traj.steps[0].z_start.z
        refs = {name: float(f(z0)) for name, f, _ in observables}
    for k, step in enumerate(traj.steps):
        zbar = 0.5 * (step.z_start.z + step.z_end.z)
        h = extended_H(sys, zbar)
        h_max = max(h_max, abs(h))
        row = {"k": k, "H_mid": h}
        for name, f, g in observables:
            v = float(f(step.z_end.z))
            row[name] = v
            ref = refs[name]
            drift[name] = max(drift[name], abs(v - ref) / (abs(ref) if ref != 0 else 1.0))
            if g is not None:
                b = poisson_bracket(np.asarray(g(zbar)), extended_grad(sys, zbar))
                brackets[name] = max(brackets[name], abs(b))
        table.append(row)
    return ConservationReport(h_max, drift, brackets, table)


def angular_momentum_2d() -> Observable:
    """``L = x p_y - y p_x`` for a planar system laid out as ``(x, y, t, px, py, prho)``."""

    def value(z):
        return z[0] * z[4] - z[1] * z[3]

    def grad(z):
        g = np.zeros_like(z)
        g[0], g[1], g[3], g[4] = z[4], -z[3], -z[1], z[0]
        return g

    return ("L", value, grad)


def time_momentum() -> Observable:
    """The momentum ``prho`` conjugate to time."""

    def grad(z):
        g = np.zeros_like(z)
        g[-1] = 1.0
        return g

    return ("prho", lambda z: z[-1], grad)


def _physical(sys: SystemDefinition, v: np.ndarray) -> np.ndarray:
    n = sys.n
    return np.concatenate([v[:n], v[n + 1:2 * n + 1]])


def _line_angle(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    ua, ub = a / na, b / nb
    ang = 2.0 * np.arctan2(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub))
    # segments are lines: a negative step runs antiparallel to the flow
    return float(min(ang, np.pi - ang))


def tangency_check(sys: SystemDefinition, step: StepResult, remove_constraint: bool = False) -> float:
    """Angle between the physical part of ``dz`` and of ``J Hcal_z(zbar)``.

    With ``remove_constraint`` the ``mu J psi_z(zbar)`` contribution is
    subtracted from ``dz`` first, which restores parallelism on regularized
    steps.
    """
    zbar = 0.5 * (step.z_start.z + step.z_end.z)
    dz = step.delta
    if remove_constraint and step.mu != 0.0:
        dz = dz - step.mu * apply_J(psi_grad(sys, zbar).grad)
    flow = apply_J(extended_grad(sys, zbar))
    return _line_angle(_physical(sys, dz), _physical(sys, flow))


def tangency_side(sys: SystemDefinition, step: StepResult, psi_k: float = 0.0) -> int:
    """Side of ``psi = psi_k`` on which the segment touches its energy level set.

    The tangency point is the midpoint, so this is the sign of
    ``psi(zbar) - psi_k``.
    """
    zbar = 0.5 * (step.z_start.z + step.z_end.z)
    return int(np.sign(psi(sys, zbar) - psi_k))


def reverse_ghost_segment(sys: SystemDefinition, step: StepResult,
                          cfg: SolverConfig | None = None) -> StepResult:
    """Apply the ghost rule backward in time from the end of ``step``.

    For a ghost crossing drawn forward in time this returns the segment the
    same rule draws when the crossing is approached from the other side.
    """
    cfg = cfg or SolverConfig()
    direction = -1 if step.lam >= 0 else 1
    return step_ghost(sys, step.z_end.z, cfg, direction, abs(step.lam) or None)


def crossing_steps(sys: SystemDefinition, traj: Trajectory, psi_k: float = 0.0) -> list[int]:
    """Indices of steps whose end vertices lie on opposite sides of ``psi = psi_k``."""
    out = []
    for k, s in enumerate(traj.steps):
        a = psi(sys, s.z_start.z) - psi_k
        b = psi(sys, s.z_end.z) - psi_k
        if a * b <= 0:
            out.append(k)
    return out
