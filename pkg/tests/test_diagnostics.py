import numpy as np
import pytest

from dthsem import Branch, ExtendedState, SolverConfig, StepResult, extended_H, integrate, lift, midpoint, psi
from dthsem.diagnostics import (
    DiagnosticError,
    angular_momentum_2d,
    conservation_report,
    crossing_steps,
    flow_jacobian,
    one_step_action,
    reverse_ghost_segment,
    reversibility_check,
    symplecticity_check,
    tangency_check,
    tangency_side,
    time_momentum,
)

from oracles import J_matrix

CFG = SolverConfig()
GHOST = SolverConfig(crossing_mode="ForceGhost")


def _seg(a, b):
    a, b = ExtendedState.from_vector(a), ExtendedState.from_vector(b)
    return StepResult(a, b, midpoint(a, b), 0.0, 0.0, Branch.NORMAL, 1.0, 0.0)


def test_one_step_action_examples(osc):
    assert one_step_action(_seg([1, 0, 2, 0], [1, 0, 2, 0])) == 0.0
    assert one_step_action(_seg([0, 0, 0, 0], [2, 0, 3, 0])) == 3.0
    step = integrate(osc, ExtendedState.from_vector([1.0, 0, 0, -0.49]), 1, CFG).steps[0]
    assert one_step_action(step) == pytest.approx(0.5 * 7 / 625, abs=1e-14)


def test_symplecticity_trivial_and_oscillator(osc):
    z0 = ExtendedState.from_vector([1.0, 0, 0, -0.3])
    assert symplecticity_check(osc, z0, 0) == 0.0
    assert symplecticity_check(osc, z0, 50, CFG, 1e-6) <= 1e-6


def test_flow_jacobian_structure(osc):
    z0 = ExtendedState.from_vector([1.0, 0, 0, -0.3])
    M = flow_jacobian(osc, z0, 3, CFG, 1e-7)
    # shifting t0 shifts t_N and nothing else; prho is conserved
    np.testing.assert_allclose(M[:, 1], [0, 1, 0, 0], atol=1e-8)
    np.testing.assert_allclose(M[3], [0, 0, 0, 1], atol=1e-8)
    assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-6)
    assert np.array_equal(flow_jacobian(osc, z0, 0), np.eye(4))


def test_symplecticity_truncation_scaling(osc):
    z0 = ExtendedState.from_vector([1.0, 0, 0, -0.49])
    coarse = symplecticity_check(osc, z0, 5, CFG, 1e-5)
    fine = symplecticity_check(osc, z0, 5, CFG, 5e-6)
    assert coarse / fine == pytest.approx(4.0, rel=0.1)


def test_symplecticity_failure_names_component(osc):
    z0 = ExtendedState.from_vector([1.0, 0, 0, -0.49])
    with pytest.raises(DiagnosticError) as info:
        symplecticity_check(osc, z0, 3, CFG, 0.05)
    assert info.value.component is not None
    assert f"component {info.value.component}" in str(info.value)


def test_reversibility(pend):
    z0 = lift(pend, [0.0], [1.0])
    assert reversibility_check(pend, z0, 0) == 0.0
    assert reversibility_check(pend, z0, 100, CFG) <= 1e-12
    assert reversibility_check(pend, lift(pend, [0.0], [3.0]), 40, CFG) <= 1e-8


def test_conservation_report_kepler(kep):
    tr = integrate(kep, lift(kep, [1.0, 0.0], [0.0, 1.2]), 300, CFG)
    rep = conservation_report(kep, tr, [angular_momentum_2d(), time_momentum()])
    assert rep.max_abs_H_mid <= CFG.outer_tol
    assert rep.max_rel_drift["L"] <= 1e-10
    assert rep.max_rel_drift["prho"] == 0.0
    assert rep.max_bracket_H["L"] <= 1e-12
    assert len(rep.table) == 300
    # reported maxima are the true maxima of the table
    assert rep.max_abs_H_mid == max(abs(r["H_mid"]) for r in rep.table)
    L0 = tr.steps[0].z_start.z[0] * tr.steps[0].z_start.z[4] - tr.steps[0].z_start.z[1] * tr.steps[0].z_start.z[3]
    assert rep.max_rel_drift["L"] == max(abs(r["L"] - L0) / abs(L0) for r in rep.table)


def test_conservation_report_recomputes_energy(pend):
    tr = integrate(pend, lift(pend, [0.0], [1.0]), 20, CFG)
    bad = StepResult(**{**tr.steps[0].__dict__, "h_mid": 123.0})
    tr.steps[0] = bad
    rep = conservation_report(pend, tr, [time_momentum()])
    assert rep.max_abs_H_mid <= CFG.outer_tol
    assert rep.max_rel_drift["prho"] == 0.0


def test_tangency_normal_and_regularized(pend):
    tr = integrate(pend, lift(pend, [0.0], [3.0]), 60, CFG)
    for s in tr.steps:
        if s.mu == 0.0:
            assert tangency_check(pend, s) <= 1e-8
    reg = [s for s in tr.steps if s.branch is Branch.REGULARIZED]
    assert reg
    for s in reg:
        assert tangency_check(pend, s) > 1e-6
        assert tangency_check(pend, s, remove_constraint=True) <= 1e-8


def test_ghost_rule_backward_flips_tangency_side(pend):
    tr = integrate(pend, lift(pend, [0.0], [3.0]), 20, GHOST)
    ghost = next(s for s in tr.steps if s.branch is Branch.GHOST)
    back = reverse_ghost_segment(pend, ghost, GHOST)
    assert back.branch is Branch.GHOST and back.lam < 0
    assert abs(extended_H(pend, back.z_mid)) <= GHOST.outer_tol
    assert tangency_side(pend, ghost) == -tangency_side(pend, back) != 0
    # the backward ghost segment does not land on the forward segment's start
    assert np.max(np.abs(back.z_end.z - ghost.z_start.z)) > 1e-3


def test_crossing_steps(pend):
    tr = integrate(pend, lift(pend, [0.0], [3.0]), 60, CFG)
    idx = crossing_steps(pend, tr)
    assert idx
    for k in idx:
        s = tr.steps[k]
        assert psi(pend, s.z_start) * psi(pend, s.z_end) <= 0
