import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from arw import exact
from arw._accel import HAS_NUMBA, backend, use_backend
from arw.coupling import convex_ratio_max
from arw.dynamics import (
    NEG_INF,
    ArwKernel,
    absorbing_band,
    even_configuration,
    in_absorbing_set,
    make_rng,
    particle_move_distribution,
    replica_rngs,
    sample_step,
    sample_step_infinite_repulsion,
    simulate,
    step_distribution,
)
from arw.graph import complete_graph, cycle_graph, grid_graph, path_graph, star_graph
from arw.states import StateSpace

from oracles import naive_step_law

E = math.e


def test_move_distribution_beta_zero_is_exactly_uniform():
    g = star_graph(5)
    k = ArwKernel(g, 7, 0.0)
    x = (3, 1, 0, 2, 1)
    for i in range(g.k):
        if x[i]:
            d = particle_move_distribution(k, x, i)
            assert np.all(d.probabilities == 1.0 / (len(g.adjacency[i]) + 1))


def test_move_distribution_k2_beta2():
    d = particle_move_distribution(ArwKernel(complete_graph(2), 2, 2.0), (2, 0), 0).as_dict()
    assert d[0] == pytest.approx(E / (E + 1), abs=1e-14)
    assert d[1] == pytest.approx(1 / (E + 1), abs=1e-14)
    assert d[0] == pytest.approx(0.73106, abs=1e-5)


def test_move_distribution_empty_vertex():
    with pytest.raises(ValueError):
        particle_move_distribution(ArwKernel(complete_graph(2), 2, 1.0), (2, 0), 1)


def test_step_distribution_examples():
    law = step_distribution(ArwKernel(complete_graph(2), 2, 0.0), (1, 1))
    assert law == {(0, 2): 0.25, (1, 1): 0.5, (2, 0): 0.25}
    law = step_distribution(ArwKernel(complete_graph(2), 2, 2.0), (2, 0))
    assert set(law) == {(1, 1), (2, 0)}
    assert law[(2, 0)] == pytest.approx(E / (E + 1), abs=1e-14)
    assert law[(1, 1)] == pytest.approx(1 / (E + 1), abs=1e-14)


@pytest.mark.parametrize("g", [path_graph(4), star_graph(5), grid_graph(2, 3)])
@pytest.mark.parametrize("beta", [-7.0, 0.0, 3.0, 40.0])
def test_single_particle_is_uniform_walk(g, beta):
    for v in range(g.k):
        x = [0] * g.k
        x[v] = 1
        d = particle_move_distribution(ArwKernel(g, 1, beta), x, v)
        assert np.allclose(d.probabilities, 1.0 / (len(g.adjacency[v]) + 1), atol=1e-15)


def test_neg_inf_unique_minimizer():
    d = particle_move_distribution(ArwKernel(path_graph(3), 3, NEG_INF), (3, 0, 0), 0).as_dict()
    assert d == {0: 0.0, 1: 1.0}


def test_neg_inf_ties_include_self():
    # particle at 1 sees x(1)-1 = 1, x(0) = 1, x(2) = 2
    d = particle_move_distribution(ArwKernel(path_graph(3), 5, NEG_INF), (1, 2, 2), 1).as_dict()
    assert d == {1: 0.5, 0: 0.5, 2: 0.0}


@pytest.mark.parametrize("g", [complete_graph(4), path_graph(4), star_graph(4), cycle_graph(4)])
@pytest.mark.parametrize("beta", [-5.0, 0.0, 2.5, NEG_INF])
def test_row_stochastic_exhaustive(g, beta):
    for n in range(1, 9):
        kernel = ArwKernel(g, n, beta)
        for x in StateSpace(g.k, n):
            assert abs(sum(step_distribution(kernel, x).values()) - 1.0) <= 1e-12


@given(
    st.sampled_from([complete_graph(3), path_graph(4), star_graph(4)]),
    st.floats(-30, 30),
    st.booleans(),
    st.data(),
)
def test_step_distribution_matches_naive(g, beta, lazy, data):
    x = tuple(data.draw(st.lists(st.integers(0, 4), min_size=g.k, max_size=g.k).filter(lambda v: sum(v) > 0)))
    n = sum(x)
    ref = naive_step_law(g, n, beta, x, lazy)
    law = step_distribution(ArwKernel(g, n, beta, lazy), x)
    assert set(law) == set(ref)
    for y in ref:
        assert law[y] == pytest.approx(ref[y], rel=1e-12, abs=1e-15)


def test_huge_beta_no_overflow():
    law = step_distribution(ArwKernel(grid_graph(3, 3), 10, 5000.0), (10, 0, 0, 0, 0, 0, 0, 0, 0))
    assert law[(10, 0, 0, 0, 0, 0, 0, 0, 0)] == pytest.approx(1.0)
    assert all(np.isfinite(list(law.values())))


def test_convex_ratio_bound_exhaustive():
    for g in (complete_graph(3), path_graph(4), star_graph(4)):
        for beta in (-3.0, 0.5, 2.0):
            for n in (1, 3, 5):
                assert convex_ratio_max(ArwKernel(g, n, beta)) <= math.exp(abs(beta)) * (1 + 1e-12)


def test_kernel_validation():
    with pytest.raises(ValueError):
        ArwKernel(complete_graph(2), 0, 1.0)
    with pytest.raises(ValueError):
        ArwKernel(complete_graph(2), 2, math.inf)
    with pytest.raises(ValueError):
        ArwKernel(complete_graph(2), 2, math.nan)
    k = ArwKernel(complete_graph(3), 4, NEG_INF)
    assert k.infinite_repulsion and k.k == 3
    assert k.as_lazy().lazy and k.with_beta(1.0).beta == 1.0


def test_even_configuration_and_band():
    assert even_configuration(3, 7) == (3, 2, 2)
    assert absorbing_band(9, 20) == (2, 3)
    states = np.array([[3, 2, 2], [4, 2, 1]])
    assert list(in_absorbing_set(states, 7)) == [True, False]


def test_stay_frequency_k2():
    tr = simulate(ArwKernel(complete_graph(2), 2, 0.0), (1, 1), 10**6, make_rng(11))
    stays = np.all(tr.states[1:] == tr.states[:-1], axis=1).mean()
    assert abs(stays - 0.5) <= 0.002


@pytest.mark.parametrize("beta, lazy", [(1.5, False), (-2.0, True), (NEG_INF, False)])
def test_simulated_transitions_match_exact_row(beta, lazy):
    g = path_graph(3)
    kernel = ArwKernel(g, 4, beta, lazy)
    tr = simulate(kernel, (2, 1, 1), 200_000, make_rng(5))
    space = StateSpace(3, 4)
    ranks = space.rank_many(tr.states)
    src = np.bincount(ranks[:-1], minlength=len(space)).argmax()
    nxt = ranks[1:][ranks[:-1] == src]
    observed = np.bincount(nxt, minlength=len(space))
    expected_p = exact.build_matrix(kernel, space).dense()[src]
    support = expected_p > 0
    assert observed[~support].sum() == 0
    _, pval = chisquare(observed[support], expected_p[support] * observed.sum())
    assert pval > 1e-4


@given(st.sampled_from([grid_graph(2, 3), path_graph(5), star_graph(5), cycle_graph(5)]),
       st.integers(1, 25), st.integers(0, 2**32 - 1))
def test_neg_inf_monotone_and_absorbing(g, n, seed):
    rng = make_rng(seed)
    x0 = np.bincount(rng.integers(0, g.k, n), minlength=g.k)
    tr = simulate(ArwKernel(g, n, NEG_INF), x0, 3000, rng)
    mx, mn = tr.states.max(1), tr.states.min(1)
    assert np.all(np.diff(mx) <= 0) and np.all(np.diff(mn) >= 0)
    inside = in_absorbing_set(tr.states, n)
    if inside.any():
        assert inside[int(np.argmax(inside)):].all()
    assert np.all(tr.states.sum(1) == n)


def test_simulate_records_stride_and_conserves():
    tr = simulate(ArwKernel(grid_graph(3, 3), 30, 5.0), even_configuration(9, 30), 70_000, make_rng(1), stride=1000)
    assert list(tr.times[:3]) == [0, 1000, 2000] and tr.times[-1] == 70_000
    assert np.all(tr.states.sum(1) == 30)
    with pytest.raises(ValueError):
        simulate(ArwKernel(grid_graph(3, 3), 30, 5.0), even_configuration(9, 30), 10, make_rng(1), stride=0)


def test_seed_reproducible():
    k = ArwKernel(cycle_graph(5), 9, 2.0)
    a = simulate(k, even_configuration(5, 9), 5000, make_rng(42)).states
    b = simulate(k, even_configuration(5, 9), 5000, make_rng(42)).states
    c = simulate(k, even_configuration(5, 9), 5000, make_rng(43)).states
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_replica_streams_differ():
    r = replica_rngs(0, 3)
    draws = [g.random() for g in r]
    assert len(set(draws)) == 3
    assert [g.random() for g in replica_rngs(0, 3)] != [g.random() for g in replica_rngs(1, 3)]


def test_sample_step_is_one_step():
    k = ArwKernel(complete_graph(3), 5, 1.0)
    law = step_distribution(k, (3, 1, 1))
    rng = make_rng(0)
    for _ in range(50):
        assert sample_step(k, (3, 1, 1), rng) in law
    with pytest.raises(ValueError):
        sample_step_infinite_repulsion(k, (3, 1, 1), rng)
    kinf = ArwKernel(path_graph(3), 3, NEG_INF)
    assert sample_step_infinite_repulsion(kinf, (3, 0, 0), rng) in {(3, 0, 0), (2, 1, 0)}


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not installed")
@pytest.mark.parametrize("beta, lazy", [(0.0, False), (7.5, True), (-3.0, False), (NEG_INF, True)])
def test_backends_walk_identical_trajectories(beta, lazy):
    g = grid_graph(3, 4)
    kernel = ArwKernel(g, 23, beta, lazy)
    x0 = even_configuration(g.k, 23)
    runs = {}
    for name in ("numba", "numpy"):
        with use_backend(name):
            assert backend() == name
            runs[name] = simulate(kernel, x0, 70_000, make_rng(9), stride=7).states
    assert np.array_equal(runs["numba"], runs["numpy"])
