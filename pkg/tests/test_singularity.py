import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dthsem import ExtendedState, extended_grad, extended_hess, lift, poisson_bracket, psi, psi_grad
from dthsem.core import StructureError
from dthsem.diagnostics import angular_momentum_2d
from dthsem.singularity import psi_from_derivatives, psi_grad_fd
from dthsem.systems import SystemDefinition

from oracles import fd_gradient, pendulum_psi, pendulum_psi_grad, random_symplectic

angles = st.floats(-2 * np.pi, 2 * np.pi, allow_nan=False)
momenta = st.floats(-5, 5, allow_nan=False)


def Z(*v):
    return ExtendedState.from_vector(v)


def test_psi_examples(pend, osc):
    assert psi(pend, Z(0, 0, 2, 0)) == pytest.approx(4.0, abs=1e-15)
    assert psi(pend, Z(np.pi, 0, 0, 0)) == pytest.approx(0.0, abs=1e-30)
    assert psi(osc, Z(3, 0, 4, 0)) == 25.0


@given(angles, momenta, st.floats(-10, 10), st.floats(-10, 10))
def test_pendulum_psi_closed_form(pend, q, p, t, rho):
    assert psi(pend, Z(q, t, p, rho)) == pytest.approx(pendulum_psi(q, p), abs=1e-13 * (1 + p * p))


@given(angles, momenta)
def test_pendulum_psi_grad_closed_form(pend, q, p):
    ev = psi_grad(pend, Z(q, 0.3, p, -1.0))
    assert ev.grad_is_exact
    np.testing.assert_allclose(ev.grad, pendulum_psi_grad(q, p), atol=1e-12 * (1 + p * p))


def test_psi_grad_examples(pend, osc):
    np.testing.assert_allclose(psi_grad(pend, Z(np.pi / 2, 0, 1, 0)).grad, [-1, 0, 0, 0], atol=1e-15)
    np.testing.assert_array_equal(psi_grad(osc, Z(1.5, 0, -2, 0)).grad, [3, 0, -4, 0])


def test_quadratic_system_third_term_vanishes(osc):
    from dthsem.systems import extended_third

    assert not extended_third(osc, np.array([1.0, 2, 3, 4]), np.array([5.0, 6, 7, 8])).any()


def _kepler_state(rng):
    r, th = rng.uniform(0.5, 2.0), rng.uniform(0, 2 * np.pi)
    return np.array([r * np.cos(th), r * np.sin(th), rng.normal(), *rng.normal(size=2), rng.normal()])


def test_analytic_and_fd_gradients_agree(pend, kep, rng):
    for _ in range(100):
        zp = np.array([rng.uniform(-3, 3), rng.normal(), rng.normal(scale=2), rng.normal()])
        zk = _kepler_state(rng)
        for sys, z in ((pend, zp), (kep, zk)):
            exact = psi_grad(sys, z).grad
            fd = psi_grad(sys, z, force_fd=True)
            assert not fd.grad_is_exact
            scale = max(1.0, np.max(np.abs(exact)))
            np.testing.assert_allclose(fd.grad, exact, atol=1e-5 * scale)


def test_fd_fallback_for_user_system():
    # Duffing-type oscillator without a hand-coded third derivative
    def H(t, q, p):
        return 0.5 * p[0] ** 2 + 0.25 * q[0] ** 4

    def grad(t, q, p):
        return np.array([q[0] ** 3, 0.0, p[0]])

    def hess(t, q, p):
        return np.diag([3 * q[0] ** 2, 0.0, 1.0])

    sys = SystemDefinition(1, H, grad, hess, name="quartic")
    z = np.array([0.8, 0.0, -0.5, 0.1])
    ev = psi_grad(sys, z)
    assert not ev.grad_is_exact
    np.testing.assert_allclose(ev.grad, fd_gradient(lambda x: psi(sys, x), z, h=1e-5), rtol=1e-6)
    np.testing.assert_allclose(psi_grad_fd(sys, z), ev.grad)


def test_psi_independent_of_t_and_prho(pend, kep, rng):
    for _ in range(20):
        z = _kepler_state(rng)
        g = psi_grad(kep, z).grad
        assert abs(g[2]) <= 1e-14 and g[5] == 0.0
        z2 = z.copy()
        z2[[2, 5]] += rng.normal(size=2)
        assert psi(kep, z2) == psi(kep, z)


def test_poisson_bracket_examples(rng):
    assert poisson_bracket([1, 0, 0, 0], [0, 0, 1, 0]) == 1.0
    g = rng.normal(size=6)
    assert abs(poisson_bracket(g, g)) <= 1e-14
    with pytest.raises(StructureError):
        poisson_bracket([1, 0], [1, 0, 0, 0])


def test_kepler_angular_momentum_commutes_with_energy(kep, rng):
    _, L, dL = angular_momentum_2d()
    for _ in range(100):
        z = _kepler_state(rng)
        assert abs(poisson_bracket(dL(z), extended_grad(kep, z))) <= 1e-12


def test_angular_momentum_commutes_with_psi(kep, rng):
    _, L, dL = angular_momentum_2d()
    for _ in range(100):
        z = _kepler_state(rng)
        assert abs(poisson_bracket(dL(z), psi_grad(kep, z).grad)) <= 1e-9


def test_psi_invariant_under_linear_symplectic_maps(kep, rng):
    from oracles import J_matrix

    for _ in range(20):
        T = random_symplectic(3, rng)
        assert np.max(np.abs(T.T @ J_matrix(3) @ T - J_matrix(3))) <= 1e-12
        for _ in range(20):
            Zs = np.linalg.solve(T, _kepler_state(rng))  # so that T Z is a valid Kepler state
            w = T @ Zs
            gK = T.T @ extended_grad(kep, w)
            AK = T.T @ extended_hess(kep, w) @ T
            ref = psi(kep, w)
            assert abs(psi_from_derivatives(gK, AK) - ref) <= 1e-9 * max(1.0, abs(ref))
