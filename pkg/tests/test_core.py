import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dthsem import Branch, ExtendedState, StepResult, Trajectory, apply_J, midpoint
from dthsem.core import EventKind, J_times, StructureError

from oracles import J_matrix

finite = st.floats(-1e6, 1e6, allow_nan=False)


def even_vectors(min_half=1, max_half=4):
    return st.integers(min_half, max_half).flatmap(lambda m: arrays(float, 2 * m, elements=finite))


def test_apply_J_examples():
    np.testing.assert_array_equal(apply_J([1, 0, 0, 0]), [0, 0, -1, 0])
    np.testing.assert_array_equal(apply_J([0, 0, 1, 0]), [1, 0, 0, 0])
    np.testing.assert_array_equal(apply_J(apply_J([1, 2, 3, 4])), [-1, -2, -3, -4])


def test_apply_J_rejects_odd_length():
    with pytest.raises(StructureError):
        apply_J([1.0, 2.0, 3.0])


@given(even_vectors())
def test_apply_J_matches_dense_matrix(v):
    np.testing.assert_array_equal(apply_J(v), J_matrix(v.size // 2) @ v)


@given(even_vectors())
def test_apply_J_is_isometry(v):
    assert np.linalg.norm(apply_J(v)) == pytest.approx(np.linalg.norm(v), rel=1e-15, abs=0)


@given(st.integers(1, 4).flatmap(lambda m: st.tuples(arrays(float, 2 * m, elements=finite),
                                                       arrays(float, 2 * m, elements=finite))))
def test_J_is_skew(uv):
    u, v = uv
    lhs, rhs = apply_J(u) @ v, -(u @ apply_J(v))
    assert lhs == pytest.approx(rhs, abs=1e-9 * (1 + np.abs(u) @ np.abs(v)))


def test_J_times_matches_dense():
    A = np.arange(36.0).reshape(6, 6)
    np.testing.assert_array_equal(J_times(A), J_matrix(3) @ A)


def test_midpoint_examples():
    z = ExtendedState.from_vector([0.3, 1.0, -2.0, 4.0])
    assert midpoint(z, z) == z
    m = midpoint(ExtendedState.from_vector([0, 0, 0, 0]), ExtendedState.from_vector([2, 4, 6, 8]))
    np.testing.assert_array_equal(m.z, [1, 2, 3, 4])


@given(st.integers(2, 4).flatmap(lambda m: st.tuples(arrays(float, 2 * m, elements=finite),
                                                       arrays(float, 2 * m, elements=finite))))
def test_midpoint_symmetric(ab):
    a, b = (ExtendedState.from_vector(x) for x in ab)
    assert midpoint(a, b) == midpoint(b, a)


def test_midpoint_dimension_mismatch():
    with pytest.raises(StructureError):
        midpoint(ExtendedState.from_vector([0, 0, 0, 0]), ExtendedState.from_vector(np.zeros(6)))


def test_extended_state_layout():
    z = ExtendedState.from_physical([1.0, 2.0], [3.0, 4.0], t=5.0, prho=6.0)
    np.testing.assert_array_equal(z.z, [1, 2, 5, 3, 4, 6])
    assert z.n == 2 and z.t == 5.0 and z.prho == 6.0
    np.testing.assert_array_equal(z.q, [1, 2])
    np.testing.assert_array_equal(z.p, [3, 4])


def test_extended_state_is_immutable_and_validated():
    z = ExtendedState.from_vector([1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        z.qext[0] = 9.0
    with pytest.raises(StructureError):
        ExtendedState([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        ExtendedState.from_vector([np.nan, 0, 0, 0])
    assert hash(z) == hash(ExtendedState.from_vector([1.0, 2.0, 3.0, 4.0]))


def _step(a, b, lam=0.1):
    a, b = ExtendedState.from_vector(a), ExtendedState.from_vector(b)
    return StepResult(a, b, midpoint(a, b), lam, 0.0, Branch.NORMAL, 1.0, 0.0)


def test_trajectory_vertices_and_log():
    tr = Trajectory()
    tr.steps.append(_step([0, 0, 0, 0], [1, 1, 1, 1]))
    tr.log(EventKind.CROSSING_DETECTED)
    tr.steps.append(_step([1, 1, 1, 1], [2, 2, 2, 2]))
    assert tr.events == [(1, EventKind.CROSSING_DETECTED)]
    np.testing.assert_array_equal(tr.vertices()[:, 0], [0, 1, 2])
    assert tr.z_final.z[0] == 2
    np.testing.assert_array_equal(tr.steps[0].delta, [1, 1, 1, 1])


def test_empty_trajectory_final_state():
    z = ExtendedState.from_vector([1.0, 0.0, 0.0, 0.0])
    assert Trajectory(initial=z).z_final == z
    with pytest.raises(ValueError):
        Trajectory().z_final
