import itertools

import numpy as np
import pytest

from fecsim.aco import (LAYERS, AcoContext, AcoParams, PheromoneState, aco_run, aco_search, candidate_list,
                        default_graph, enumerate_tours, heuristic_info, length_to_ratio, load_length_table,
                        optimal_tour)
from fecsim.channel import ErrorClass


def test_heuristic_info():
    assert heuristic_info(2) == 0.5
    assert heuristic_info(1) == 1.0
    with pytest.raises(ValueError):
        heuristic_info(0)


def test_candidate_lists():
    g = default_graph()
    assert len(candidate_list(g, (0, 0))) == 3
    for i in range(3):
        assert len(candidate_list(g, (3, i))) == 5
    assert candidate_list(g, (4, 4)) == []


def test_graph_shape():
    g = default_graph()
    assert len(g.nodes) == 14
    assert len(enumerate_tours(g)) == 3 * 2 * 3 * 5


def test_tour_constraints_on_sampled_tours():
    g = default_graph()
    ctx = AcoContext("Medium", "P", 1, ErrorClass.SE)
    res = aco_search(g, ctx, AcoParams(ants=100, iterations=100), np.random.default_rng(0), keep_tours=True)
    assert len(res.tours_sampled) == 10_000
    for t in res.tours_sampled:
        assert t[0] == (0, 0)
        assert [n[0] for n in t] == list(range(len(LAYERS)))


def test_forced_tour_ignores_seed():
    g = default_graph()
    ctx = AcoContext("High", "I", 2, "ME")
    p = AcoParams(neighbor_steps=0)
    ratios = {aco_run(g, ctx, p, np.random.default_rng(s)) for s in range(5)}
    assert ratios == {1.0}


def test_seeded_determinism():
    g = default_graph()
    ctx = AcoContext("Low", "P", 0, "SSE")
    a = aco_search(g, ctx, AcoParams(), np.random.default_rng(7), keep_tours=True)
    b = aco_search(g, ctx, AcoParams(), np.random.default_rng(7), keep_tours=True)
    assert a == b and a.tours_sampled == b.tours_sampled


def all_contexts():
    return list(itertools.product(range(3), "PI", range(3)))


def test_severity_monotone_by_enumeration():
    g = default_graph()
    for m, ft, size in all_contexts():
        ratios = [length_to_ratio(g, g.tour_length(optimal_tour(g, AcoContext(m, ft, size, e))[0]))
                  for e in ErrorClass]
        assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_colony_finds_optimum():
    g = default_graph()
    p = AcoParams(iterations=50)
    for m, ft, size in all_contexts():
        for e in ErrorClass:
            ctx = AcoContext(m, ft, size, e)
            res = aco_search(g, ctx, p, np.random.default_rng(1))
            assert res.tour == optimal_tour(g, ctx, p)[0]


def test_ratio_range():
    g = default_graph()
    lo, hi = g.length_range
    assert length_to_ratio(g, lo) == 0.55
    assert length_to_ratio(g, hi) == 1.0


def test_pheromone_bounds():
    g = default_graph()
    p = AcoParams()
    state = PheromoneState.initial(g, p)
    tour = enumerate_tours(g)[0]
    for _ in range(50):
        state.deposit(tour, 5.0)
    assert max(state.tau.values()) == p.tau_max
    for step in range(1, 30):
        state.evaporate()
        assert min(state.tau.values()) >= p.tau_min
    assert set(state.tau.values()) == {p.tau_min}


def test_evaporation_geometric():
    g = default_graph()
    p = AcoParams(rho=0.5, tau0=1.0)
    state = PheromoneState.initial(g, p)
    state.evaporate()
    state.evaporate()
    assert set(state.tau.values()) == {0.25}


def test_params_validation():
    for kw in [dict(ants=0), dict(rho=1.0), dict(tau_min=2.0), dict(attenuation=0.0), dict(neighbor_steps=-1)]:
        with pytest.raises(ValueError):
            AcoParams(**kw)


def test_context_validation():
    with pytest.raises(ValueError):
        AcoContext("Low", "B", 0, "NE")
    with pytest.raises(ValueError):
        AcoContext("Low", "P", 3, "NE")
    assert AcoContext("low", "I", "large", "me").observed() == (0, 1, 2, 4)


def test_length_table_override(tmp_path):
    path = tmp_path / "lengths.yaml"
    path.write_text('"Motion.High -> FrameType.I": 2.5\n')
    g = load_length_table(path)
    assert g.lengths[((1, 2), (2, 1))] == 2.5
    path.write_text('"Motion.High -> Error.ME": 2.5\n')
    with pytest.raises(ValueError):
        load_length_table(path)
    path.write_text('"Nope -> FrameType.I": 1\n')
    with pytest.raises(ValueError):
        load_length_table(path)
