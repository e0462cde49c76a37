"""The singularity indicator psi and its gradient.

``psi(z) = u^T Hcal_zz u`` with ``u = J Hcal_z``.  Where psi vanishes the
energy-constrained midpoint step loses local uniqueness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import StructureError, _as_vector, apply_J
from .systems import SystemDefinition, _vec, extended_grad, extended_hess, extended_third

_FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)


@dataclass(frozen=True)
class PsiEval:
    value: float
    grad: np.ndarray
    grad_is_exact: bool


def psi_from_derivatives(grad, hess) -> float:
    """``u^T hess u`` with ``u = J grad``, for any extended Hamiltonian given
    by its gradient and Hessian at a point."""
    u = apply_J(grad)
    return float(u @ np.asarray(hess, dtype=float) @ u)


def psi(sys: SystemDefinition, z) -> float:
    z = _vec(sys, z)
    return psi_from_derivatives(extended_grad(sys, z), extended_hess(sys, z))


def psi_grad_fd(sys: SystemDefinition, z) -> np.ndarray:
    """Central differences of psi with step ``max(1, |z|_inf) * eps^(1/3)``."""
    z = _vec(sys, z).astype(float)
    h = max(1.0, float(np.max(np.abs(z)))) * _FD_STEP
    out = np.empty(z.size)
    for i in range(z.size):
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        out[i] = (psi(sys, zp) - psi(sys, zm)) / (2.0 * h)
    return out


def psi_grad(sys: SystemDefinition, z, force_fd: bool = False) -> PsiEval:
    """psi and its gradient.

    With third derivatives available the gradient is
    ``T3(u, u) + 2 A J^T A u`` where ``A = Hcal_zz``; otherwise finite
    differences are used.
    """
    z = _vec(sys, z)
    A = extended_hess(sys, z)
    u = apply_J(extended_grad(sys, z))
    Au = A @ u
    value = float(u @ Au)
    if sys.third_contraction is None or force_fd:
        return PsiEval(value, psi_grad_fd(sys, z), False)
    # J^T = -J
    grad = extended_third(sys, z, u) - 2.0 * (A @ apply_J(Au))
    return PsiEval(value, grad, True)


def poisson_bracket(grad_f, grad_g) -> float:
    """``[f, g] = f_z^T J g_z``."""
    gf, gg = _as_vector(grad_f), _as_vector(grad_g)
    if gf.shape != gg.shape:
        raise StructureError(f"gradient shapes differ: {gf.shape} vs {gg.shape}")
    return float(gf @ apply_J(gg))
