import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jelsurvey.elsolve import el_weights, solve_lambda_scalar, solve_lambda_vector, zero_in_hull
from jelsurvey.errors import BoundaryViolation, InfeasibleConstraint, InputError, SingularJacobian


def random_instance(rng, n, k=1):
    w = rng.uniform(0.1, 5.0, n)
    w /= w.sum()
    u = rng.standard_t(4, size=(n, k)) * rng.uniform(0.1, 10)
    u -= rng.uniform(0.2, 0.8) * u.max(axis=0) + rng.uniform(0.2, 0.8) * u.min(axis=0) - u.mean(axis=0) * 0
    return w, u


def test_two_point_closed_form():
    sol = solve_lambda_scalar([0.5, 0.5], [-1.0, 3.0])
    assert sol.lam[0] == pytest.approx(1 / 3, abs=1e-12)
    np.testing.assert_allclose(sol.p, [0.75, 0.25], atol=1e-12)
    assert sol.converged


def test_already_satisfied_constraint():
    w = np.array([0.25, 0.25, 0.5])
    u = np.array([-2.0, 4.0, -1.0])
    sol = solve_lambda_scalar(w, u)
    assert sol.lam[0] == 0.0
    np.testing.assert_array_equal(sol.p, w)
    vec = solve_lambda_vector(w, np.column_stack([u, [1.0, 1.0, -1.0]]))
    np.testing.assert_array_equal(vec.lam, 0.0)


def test_infeasible_scalar():
    with pytest.raises(InfeasibleConstraint):
        solve_lambda_scalar([0.5, 0.5], [1.0, 2.0])
    with pytest.raises(InfeasibleConstraint):
        solve_lambda_scalar([0.5, 0.5], [0.0, 2.0])


def test_infeasible_vector_half_space():
    rng = np.random.default_rng(0)
    u = rng.normal(size=(30, 2))
    u[:, 0] = np.abs(u[:, 0]) + 0.1
    with pytest.raises(InfeasibleConstraint):
        solve_lambda_vector(np.full(30, 1 / 30), u)
    u3 = rng.normal(size=(30, 3))
    u3[:, 2] = np.abs(u3[:, 2]) + 0.1
    with pytest.raises(InfeasibleConstraint):
        solve_lambda_vector(np.full(30, 1 / 30), u3)


def test_singular_jacobian():
    u = np.column_stack([np.linspace(-1, 1, 10), 2 * np.linspace(-1, 1, 10)])
    with pytest.raises(SingularJacobian):
        solve_lambda_vector(np.full(10, 0.1), u)


def test_weights_must_be_normalized():
    with pytest.raises(InputError):
        solve_lambda_scalar([1.0, 1.0], [-1.0, 1.0])


def test_el_weights():
    w = np.array([0.5, 0.5])
    np.testing.assert_array_equal(el_weights(w, 0.0, [-1.0, 3.0]), w)
    np.testing.assert_allclose(el_weights(w, 1 / 3, [-1.0, 3.0]), [0.75, 0.25])
    with pytest.raises(BoundaryViolation):
        el_weights(w, 1.0, [-1.0, 3.0])


def test_scalar_solver_property_1000_instances():
    rng = np.random.default_rng(123)
    for _ in range(1000):
        n = int(rng.integers(2, 200))
        w, u = random_instance(rng, n)
        u = u[:, 0]
        if not (u.min() < 0 < u.max()):
            continue
        sol = solve_lambda_scalar(w, u)
        lam = sol.lam[0]
        assert -1 / u.max() < lam < -1 / u.min()
        assert abs(np.sum(w * u / (1 + lam * u))) <= 1e-10
        assert abs(sol.p.sum() - 1) <= 1e-8
        assert abs(sol.p @ u) <= 1e-8
        assert np.all(sol.p > 0)


def test_scalar_solver_near_hull_boundary():
    # zero sits barely inside the hull: lambda is close to -1/min(u)
    w = np.full(50, 1 / 50)
    u = np.concatenate([[-1e-6], np.linspace(1, 5, 49)])
    u = u - 0.0
    w = np.concatenate([[0.999], np.full(49, 0.001 / 49)])
    sol = solve_lambda_scalar(w, u)
    assert abs(sol.p @ u) <= 1e-8 and abs(sol.p.sum() - 1) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(5, 80))
def test_vector_k1_agrees_with_scalar(seed, n):
    rng = np.random.default_rng(seed)
    w, u = random_instance(rng, n)
    if not (u.min() < 0 < u.max()):
        return
    a = solve_lambda_scalar(w, u[:, 0])
    b = solve_lambda_vector(w, u)
    assert b.lam[0] == pytest.approx(a.lam[0], abs=1e-9, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(8, 120), st.integers(2, 3))
def test_vector_solver_self_consistency(seed, n, k):
    rng = np.random.default_rng(seed)
    w, u = random_instance(rng, n, k)
    u = u - (w @ u) * rng.uniform(0.0, 0.9)
    if not zero_in_hull(u) or k == 3 and not np.all((u.min(axis=0) < 0) & (u.max(axis=0) > 0)):
        return
    try:
        sol = solve_lambda_vector(w, u)
    except InfeasibleConstraint:
        assert k == 3
        return
    assert np.all(1 + u @ sol.lam > 0)
    assert abs(sol.p.sum() - 1) <= 1e-8
    assert np.abs(sol.p @ u).max() <= 1e-8


def test_warm_start_is_used():
    rng = np.random.default_rng(4)
    w, u = random_instance(rng, 60, 2)
    cold = solve_lambda_vector(w, u)
    warm = solve_lambda_vector(w, u, lam0=cold.lam)
    assert warm.iterations <= 2
    np.testing.assert_allclose(warm.lam, cold.lam, atol=1e-10)


def test_zero_in_hull_two_dimensions():
    square = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float)
    assert zero_in_hull(square)
    assert not zero_in_hull(square + 2)
    assert not zero_in_hull(np.array([[1.0, 0.0], [-1.0, 0.0]]))
