import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arw import zchain
from arw._accel import HAS_NUMBA, use_backend
from arw.dynamics import ArwKernel, make_rng
from arw.graph import star_graph
from arw.zchain import InvalidComparison, ZChainParams

from oracles import mp_stationary


def z_matrix(D, p, q):
    """One Z particle, written out from the move rules."""
    P = np.zeros((D + 1, D + 1))
    for d in range(D + 1):
        if d <= 1:
            P[d, 0] += q
            P[d, d + 1 if d < D else D] += 1 - q
        else:
            P[d, d - 1] += p
            P[d, min(d + 1, D)] += 1 - p
    return P


pq = st.tuples(st.floats(0.01, 0.6), st.floats(0.02, 1.0)).filter(lambda t: t[0] < t[1])


def test_p_example():
    p, q = zchain.compute_pq(3.0, 1 / 3, 2, 10)
    assert p == pytest.approx(1 / (math.e + 2), rel=1e-14)
    assert p == pytest.approx(0.21194, abs=1e-5)


@pytest.mark.parametrize("beta, delta, Delta, n", [(3.0, 1 / 3, 2, 10), (10.0, 0.2, 1, 7), (50.0, 0.1, 4, 100)])
def test_q_direct_formula(beta, delta, Delta, n):
    a = beta * (1 - delta) - beta / n
    q_ref = math.exp(a) / (math.exp(a) + math.exp(beta * delta) + Delta - 1)
    p_ref = 1 / (math.exp(beta * delta) + Delta)
    p, q = zchain.compute_pq(beta, delta, Delta, n)
    assert p == pytest.approx(p_ref, rel=1e-13) and q == pytest.approx(q_ref, rel=1e-13)


def test_large_beta_limits():
    p, q = zchain.compute_pq(200.0, 1 / 3, 2, 10)
    assert q > 0.999 and p < 0.001
    p, q = zchain.compute_pq(1e5, 0.25, 3, 50)  # log-space evaluation stays finite
    assert q == 1.0 and 0.0 <= p < 1e-100


def test_invalid_comparison():
    with pytest.raises(InvalidComparison):
        zchain.compute_pq(0.0, 1 / 3, 2, 10)
    with pytest.raises(ValueError):
        zchain.compute_pq(-1.0, 1 / 3, 2, 10)
    with pytest.raises(InvalidComparison):
        ZChainParams.from_pq(3, 0.5, 0.4)
    with pytest.raises(ValueError):
        ZChainParams(2, 0.1, 0.5, delta=0.6)
    with pytest.raises(ValueError):
        ZChainParams(0, 0.1, 0.5)


def test_for_graph_defaults():
    g = star_graph(5)
    params = ZChainParams.for_graph(g, 30.0, 40)
    assert params.D == 2 and params.Delta == 4 and params.delta == pytest.approx(1 / 6)


def test_single_particle_matrix_matches_rules():
    for D in range(1, 6):
        assert np.array_equal(zchain.single_particle_matrix(D, 0.2, 0.7), z_matrix(D, 0.2, 0.7))


def test_lambda_zero_small_d():
    assert zchain.lambda_zero(ZChainParams.from_pq(1, 0.2, 0.7)) == 0.7
    assert zchain.lambda_zero(ZChainParams.from_pq(2, 0.2, 0.7)) == pytest.approx(0.7 / (1 + 0.09 / 0.2), rel=1e-15)


@given(st.integers(1, 8), pq)
def test_closed_forms_vs_high_precision_solve(D, t):
    p, q = t
    params = ZChainParams.from_pq(D, p, q)
    ref = mp_stationary(z_matrix(D, p, q))
    lam = zchain.z_stationary(params)
    assert np.abs(lam - ref).max() <= 1e-12
    assert zchain.lambda_zero(params) == pytest.approx(ref[0], abs=1e-12)
    # balance equations
    assert np.abs(lam @ z_matrix(D, p, q) - lam).max() <= 1e-12
    if D == 2:
        assert zchain.lambda_zero_d2(p, q) == pytest.approx(zchain.lambda_zero(params), abs=1e-14)


def test_closed_form_at_r_equal_one():
    params = ZChainParams.from_pq(5, 0.5, 0.9)
    assert zchain.lambda_zero(params) == pytest.approx(mp_stationary(z_matrix(5, 0.5, 0.9))[0], abs=1e-12)


def test_degenerate_q_one():
    params = ZChainParams.from_pq(3, 0.1, 1.0)
    assert np.array_equal(zchain.z_stationary(params), [1, 0, 0, 0])
    t = zchain.simulate_z_hitting(params, 10, 1 / 3, make_rng(0), max_steps=5000)
    assert t == zchain.CENSORED


def test_expected_occupancy():
    params = ZChainParams.from_pq(1, 0.1, 0.9)
    assert zchain.expected_occupancy_zero(params, 100) == pytest.approx(90.0)
    with pytest.raises(ValueError):
        zchain.expected_occupancy_zero(params)


def test_concentration_threshold():
    r = zchain.concentration_threshold(2, 3, 50)
    assert r.lambda0 >= r.target
    delta = 1 / 6
    assert r.target == pytest.approx(1 - delta + delta / 4)
    below = zchain.lambda_zero(ZChainParams.from_model(2, r.beta * (1 - 1e-4), delta, 3, 50))
    assert below < r.target


def test_hitting_threshold():
    assert zchain.hitting_threshold(30, 1 / 3) == 20
    assert zchain.hitting_threshold(10, 0.25) == 7


def test_hitting_times_grow_superlinearly():
    logs = []
    for n in (20, 30, 40):
        params = ZChainParams.from_model(1, 6.0, 1 / 3, 1, n)
        h = zchain.hitting_times(params, n, 1 / 3, 50, seed=7, max_steps=10**7)
        assert (h >= 0).all()
        logs.append(math.log(np.median(h)))
    assert logs[2] - logs[1] > logs[1] - logs[0] > 0


def test_stationary_occupancy_within_hoeffding_band():
    n = 200
    params = ZChainParams.from_model(3, 12.0, 1 / 9, 2, n)
    mean = zchain.expected_occupancy_zero(params, n)
    band = 3 * math.sqrt(n) / 2
    occ = zchain.simulate_z_occupancy(params, n, 2_000_000, make_rng(3), stride=2000)
    tail = occ[len(occ) // 4:]
    assert abs(tail.mean() - mean) <= band / 10
    assert np.mean(np.abs(tail - mean) <= band) >= 0.97


def test_occupancy_start_and_stride():
    params = ZChainParams.from_pq(3, 0.2, 0.8)
    occ = zchain.simulate_z_occupancy(params, 10, 1000, make_rng(0), stride=100, start=[0, 0, 0, 10])
    assert occ.shape == (10,) and occ.max() <= 10


def test_coupled_dominance_on_star():
    g = star_graph(5)
    n = 30
    kernel = ArwKernel(g, n, 40.0)
    params = ZChainParams.for_graph(g, 40.0, n)
    run = zchain.coupled_dominance_run(kernel, 0, params, 20_000, seed=1)
    assert run.violations == 0 and run.steps > 0
    leaf = zchain.coupled_dominance_run(ArwKernel(g, n, 20.0), 1, ZChainParams.for_graph(g, 20.0, n), 5000, seed=2)
    assert leaf.violations == 0


def test_coupled_dominance_rejects_short_line():
    g = star_graph(5)
    params = ZChainParams.from_model(1, 30.0, 0.2, 4, 20)
    with pytest.raises(ValueError):
        zchain.coupled_dominance_run(ArwKernel(g, 20, 30.0), 1, params, 10)


def test_hitting_reproducible():
    params = ZChainParams.from_model(2, 5.0, 0.25, 3, 20)
    a = zchain.hitting_times(params, 20, 0.25, 5, seed=11)
    b = zchain.hitting_times(params, 20, 0.25, 5, seed=11)
    assert np.array_equal(a, b)


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
def test_backends_agree():
    params = ZChainParams.from_model(4, 8.0, 0.1, 3, 60)
    out = {}
    for name in ("numba", "numpy"):
        with use_backend(name):
            h = zchain.hitting_times(params, 60, 0.1, 4, seed=5, max_steps=200_000)
            occ = zchain.simulate_z_occupancy(params, 60, 100_000, make_rng(1), stride=37)
            out[name] = (h, occ)
    assert np.array_equal(out["numba"][0], out["numpy"][0])
    assert np.array_equal(out["numba"][1], out["numpy"][1])
