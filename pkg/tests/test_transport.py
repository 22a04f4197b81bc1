import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linprog

from arw.transport import (
    CertificationError,
    MarginalMismatch,
    certify_plan,
    check_dual,
    solve_transport,
)


def linprog_value(mu, nu, C):
    m1, m2 = C.shape
    A = []
    for i in range(m1):
        row = np.zeros((m1, m2))
        row[i] = 1
        A.append(row.ravel())
    for j in range(m2):
        col = np.zeros((m1, m2))
        col[:, j] = 1
        A.append(col.ravel())
    res = linprog(C.ravel(), A_eq=np.array(A), b_eq=np.concatenate([mu, nu]), bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def normalized(v):
    return v / v.sum()


masses = st.integers(1, 6).flatmap(
    lambda m: arrays(np.float64, m, elements=st.floats(0.0, 1.0)).filter(lambda a: a.sum() > 1e-3)
)


@given(masses, masses, st.data())
def test_matches_linprog(mu, nu, data):
    mu, nu = normalized(mu), normalized(nu)
    C = data.draw(arrays(np.float64, (mu.size, nu.size), elements=st.floats(-5.0, 10.0)))
    plan = solve_transport(mu, nu, C)
    assert plan.value == pytest.approx(linprog_value(mu, nu, C), abs=1e-9)
    assert np.allclose(plan.plan.sum(1), mu, atol=1e-12) and np.allclose(plan.plan.sum(0), nu, atol=1e-12)
    assert (plan.plan >= 0).all()
    chk = check_dual(mu, nu, C, plan.u, plan.v, plan.plan, plan.value)
    assert chk.ok()
    assert plan.dual_value == pytest.approx(plan.value, abs=1e-9)


@given(masses)
def test_identity_plan_for_equal_marginals(mu):
    mu = normalized(mu)
    m = mu.size
    C = np.abs(np.subtract.outer(np.arange(m), np.arange(m))).astype(float)
    plan = solve_transport(mu, mu, C)
    assert plan.value == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(plan.plan, np.diag(mu), atol=1e-12)


def test_two_point_case_equals_tv_times_cost():
    # both atoms at cost 0 on the diagonal, cost c off it: value = c * TV
    mu, nu = np.array([0.7, 0.3]), np.array([0.2, 0.8])
    C = np.array([[0.0, 3.0], [3.0, 0.0]])
    assert solve_transport(mu, nu, C).value == pytest.approx(3.0 * 0.5, abs=1e-12)


def test_support_labels():
    plan = solve_transport([1.0], [0.5, 0.5], np.array([[1.0, 2.0]]), rows=("a",), cols=("x", "y"))
    assert sorted(plan.support()) == [("a", "x", 0.5), ("a", "y", 0.5)]


def test_input_errors():
    with pytest.raises(MarginalMismatch):
        solve_transport([1.0], [0.5], np.zeros((1, 1)))
    with pytest.raises(ValueError):
        solve_transport([1.0], [1.0], np.zeros((2, 2)))
    with pytest.raises(ValueError):
        solve_transport([1.5, -0.5], [1.0], np.zeros((2, 1)))


def test_certificate_rejects_suboptimal_plan():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    bad = np.array([[0.0, 0.5], [0.5, 0.0]])  # anti-diagonal plan for equal marginals
    with pytest.raises(CertificationError):
        certify_plan(bad, C)


def test_check_dual_reports_violations():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    chk = check_dual([0.5, 0.5], [0.5, 0.5], C, np.array([1.0, 0.0]), np.array([0.5, 0.0]))
    assert chk.feasibility == pytest.approx(1.5) and not chk.ok()
