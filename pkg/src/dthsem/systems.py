"""Hamiltonian systems and their lift to extended phase space.

A system supplies ``H(t, q, p)`` and its derivatives in the physical ordering
``(q_1..q_n, t, p_1..p_n)``, which is the extended ordering with the trailing
``prho`` dropped.  The extended Hamiltonian is ``prho + H``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import ExtendedState, StructureError, _as_vector


class DomainError(ValueError):
    """The state lies outside the region where the Hamiltonian is defined."""


@dataclass(frozen=True)
class SystemDefinition:
    """Hamiltonian ``H(t, q, p)`` with gradient, Hessian and an optional
    third-derivative contraction ``(t, q, p, v) -> sum_jk H_ijk v_j v_k``.

    Gradients and Hessians use the ``(q, t, p)`` ordering of length ``2n + 1``.
    """

    n: int
    eval_H: Callable
    grad_H: Callable
    hess_H: Callable
    third_contraction: Optional[Callable] = None
    name: str = "custom"

    def split(self, z: np.ndarray):
        n = self.n
        return z[n], z[:n], z[n + 1 : 2 * n + 1]


def _vec(sys: SystemDefinition, z) -> np.ndarray:
    z = _as_vector(z)
    if z.shape != (2 * (sys.n + 1),):
        raise StructureError(f"{sys.name} expects a state of length {2 * (sys.n + 1)}, got {z.shape}")
    return z


def extended_H(sys: SystemDefinition, z) -> float:
    z = _vec(sys, z)
    t, q, p = sys.split(z)
    return float(z[-1] + sys.eval_H(t, q, p))


def extended_grad(sys: SystemDefinition, z) -> np.ndarray:
    z = _vec(sys, z)
    t, q, p = sys.split(z)
    out = np.empty(z.size)
    out[:-1] = sys.grad_H(t, q, p)
    out[-1] = 1.0
    return out


def extended_hess(sys: SystemDefinition, z) -> np.ndarray:
    z = _vec(sys, z)
    t, q, p = sys.split(z)
    m = z.size
    out = np.zeros((m, m))
    out[:-1, :-1] = sys.hess_H(t, q, p)
    return out


def extended_third(sys: SystemDefinition, z, v) -> np.ndarray:
    """``w_i = sum_jk Hcal_{ijk} v_j v_k``; the ``prho`` slot never contributes."""
    if sys.third_contraction is None:
        raise NotImplementedError(f"{sys.name} has no third-derivative contraction")
    z = _vec(sys, z)
    v = np.asarray(v, dtype=float)
    t, q, p = sys.split(z)
    out = np.zeros(z.size)
    out[:-1] = sys.third_contraction(t, q, p, v[:-1])
    return out


def lift(sys: SystemDefinition, q, p, t: float = 0.0, prho: float | None = None,
         h0: float = 0.0) -> ExtendedState:
    """Build an extended state.  Without an explicit ``prho`` it is set so that
    the extended Hamiltonian equals ``h0``."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if q.size != sys.n or p.size != sys.n:
        raise StructureError(f"{sys.name} has n={sys.n}; got q of size {q.size}, p of size {p.size}")
    if prho is None:
        prho = h0 - float(sys.eval_H(t, q, p))
    return ExtendedState.from_physical(q, p, t, prho)


# ---------------------------------------------------------------- built-ins


def pendulum() -> SystemDefinition:
    """``H = p^2/2 - cos q``."""

    def H(t, q, p):
        return 0.5 * p[0] * p[0] - np.cos(q[0])

    def grad(t, q, p):
        return np.array([np.sin(q[0]), 0.0, p[0]])

    def hess(t, q, p):
        return np.array([[np.cos(q[0]), 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]])

    def third(t, q, p, v):
        return np.array([-np.sin(q[0]) * v[0] * v[0], 0.0, 0.0])

    return SystemDefinition(1, H, grad, hess, third, name="pendulum")


def harmonic_oscillator() -> SystemDefinition:
    """``H = (p^2 + q^2)/2``."""

    def H(t, q, p):
        return 0.5 * (p[0] * p[0] + q[0] * q[0])

    def grad(t, q, p):
        return np.array([q[0], 0.0, p[0]])

    hess_const = np.diag([1.0, 0.0, 1.0])

    def hess(t, q, p):
        return hess_const.copy()

    def third(t, q, p, v):
        return np.zeros(3)

    return SystemDefinition(1, H, grad, hess, third, name="harmonic")


KEPLER_MIN_RADIUS = 1e-12


def kepler_2d() -> SystemDefinition:
    """Planar Kepler one-body problem ``H = |p|^2/2 - 1/|x|``."""

    def radius(q):
        r = float(np.hypot(q[0], q[1]))
        if r < KEPLER_MIN_RADIUS:
            raise DomainError(f"Kepler state at radius {r:g} is inside the collision cutoff")
        return r

    def H(t, q, p):
        return 0.5 * (p[0] * p[0] + p[1] * p[1]) - 1.0 / radius(q)

    def grad(t, q, p):
        r3 = radius(q) ** 3
        return np.array([q[0] / r3, q[1] / r3, 0.0, p[0], p[1]])

    def hess(t, q, p):
        r = radius(q)
        x = q[:2]
        V = np.eye(2) / r**3 - 3.0 * np.outer(x, x) / r**5
        out = np.zeros((5, 5))
        out[:2, :2] = V
        out[3, 3] = out[4, 4] = 1.0
        return out

    def third(t, q, p, v):
        r = radius(q)
        x = q[:2]
        a = v[:2]
        xa = x @ a
        w = -3.0 * (2.0 * a * xa + x * (a @ a)) / r**5 + 15.0 * x * xa * xa / r**7
        return np.array([w[0], w[1], 0.0, 0.0, 0.0])

    return SystemDefinition(2, H, grad, hess, third, name="kepler")


SYSTEMS = {"pendulum": pendulum, "harmonic": harmonic_oscillator, "kepler": kepler_2d}
