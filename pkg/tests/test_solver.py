import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_optimum, cycle_length, square
from rlkopt.kopt import MAX_K, Tour
from rlkopt.policy import Q_LEARNING, RLConfig, Strategy
from rlkopt.solver import (SINGLE_CHAIN, SolverConfig, choose_initial_tour, improvement_pass,
                           prepare, solve)
from rlkopt.tsplib import from_matrix, load_instance, random_instance, tour_length


def test_three_cities_have_one_tour():
    inst = from_matrix([[0, 3, 4], [3, 0, 5], [4, 5, 0]])
    res = solve(inst)
    assert res.best_length == 12
    assert sorted(res.best_tour.order.tolist()) == [0, 1, 2]
    prep = prepare(inst)
    t = choose_initial_tour(inst, prep.qtable, np.random.default_rng(0))
    t.validate()
    assert tour_length(inst, t) == 12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(4, 40))
def test_initial_tours_are_valid(seed, n):
    gen = np.random.default_rng(seed)
    inst = random_instance(n, gen)
    prep = prepare(inst)
    t = choose_initial_tour(inst, prep.qtable, gen)
    t.validate()
    # later trials lean on a best tour and the tour before it
    best, prev = Tour(gen.permutation(n)), Tour(gen.permutation(n))
    choose_initial_tour(inst, prep.qtable, gen, best, prev).validate()


def test_initial_tours_on_eil51_never_beat_the_optimum():
    inst = load_instance("eil51")
    qt = prepare(inst).qtable
    for seed in range(100):
        t = choose_initial_tour(inst, qt, np.random.default_rng(seed))
        t.validate()
        assert tour_length(inst, t) >= 426


def test_no_improvement_on_an_optimal_five_city_tour():
    gen = np.random.default_rng(5)
    for _ in range(10):
        inst = random_instance(5, gen)
        best = min((list((0,) + p) for p in itertools.permutations(range(1, 5))),
                   key=lambda o: cycle_length(inst.dist, o))
        assert cycle_length(inst.dist, best) == brute_force_optimum(inst)
        prep = prepare(inst)
        assert improvement_pass(Tour(best), prep.qtable, inst, prep.penalties, gen) is None


def test_crossed_four_city_tour_is_uncrossed():
    inst = square(100.0)
    prep = prepare(inst)
    t = Tour([0, 2, 1, 3])
    out = improvement_pass(t, prep.qtable, inst, prep.penalties, np.random.default_rng(1))
    assert out is not None
    out.validate()
    assert tour_length(inst, out) == 400
    assert tour_length(inst, t) > 400  # input untouched


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(6, 60),
       method=st.sampled_from([0, 1, 2, 3]))
def test_every_applied_move_keeps_a_shorter_valid_tour(seed, n, method):
    gen = np.random.default_rng(seed)
    inst = random_instance(n, gen)
    prep = prepare(inst)
    counters = np.zeros(6, dtype=np.int64)
    t = Tour(gen.permutation(n))
    length = tour_length(inst, t)
    while True:
        nxt = improvement_pass(t, prep.qtable, inst, prep.penalties, gen, method=method,
                               eps=0.3, counters=counters)
        if nxt is None:
            break
        nxt.validate()
        new = tour_length(inst, nxt)
        assert new < length
        t, length = nxt, new
    assert 2 <= counters[5] <= MAX_K or counters[5] == 0


def test_berlin52_is_solved_by_every_seed():
    inst = load_instance("berlin52")
    for seed in range(10):
        res = solve(inst, SolverConfig(seed=seed))
        assert res.best_length == 7542 and res.reached_optimum


def test_docstring_seed_result():
    assert solve(load_instance("berlin52"), SolverConfig(seed=1)).best_length == 7542


def test_eight_cities_match_brute_force():
    gen = np.random.default_rng(8)
    for _ in range(5):
        inst = random_instance(8, gen)
        best = min(solve(inst, SolverConfig(seed=s)).best_length for s in range(10))
        assert best == brute_force_optimum(inst)


@pytest.mark.parametrize("name", ["eil51", "st70"])
def test_run_result_invariants(name):
    inst = load_instance(name)
    res = solve(inst, SolverConfig(seed=3, max_trials=20, stop_at_optimum=False))
    res.best_tour.validate()
    assert res.best_length == tour_length(inst, res.best_tour)
    assert res.trials_used == 20 == len(res.history)
    assert all(a >= b for a, b in zip(res.history, res.history[1:]))
    assert res.reached_optimum == (res.best_length == inst.known_optimum)
    assert 2 <= res.counters["deepest_k"] <= MAX_K


def test_same_seed_same_result():
    inst = load_instance("kroA100")
    cfg = SolverConfig(seed=17, max_trials=15, stop_at_optimum=False)
    a, b = solve(inst, cfg), solve(inst, cfg)
    assert a.best_length == b.best_length
    assert a.best_tour.order.tolist() == b.best_tour.order.tolist()
    assert a.history == b.history and a.methods == b.methods
    assert a.counters == b.counters


def test_one_trial_is_no_worse_than_its_start():
    inst = load_instance("eil76")
    res = solve(inst, SolverConfig(seed=2, max_trials=1, stop_at_optimum=False))
    assert res.trials_used == 1
    res.best_tour.validate()
    assert res.best_length >= inst.known_optimum


@pytest.mark.parametrize("strategy", [Strategy.FIXQ, Strategy.ALPHA_BASELINE])
def test_fixed_tables_are_never_updated(strategy):
    inst = load_instance("eil51")
    res = solve(inst, SolverConfig(seed=0, max_trials=10, stop_at_optimum=False,
                                   rl=RLConfig(strategy=strategy)))
    c = res.counters
    assert c["q_updates"] == c["sarsa_updates"] == c["mc_updates"] == 0
    assert c["episodes"] > 0


def test_learning_strategies_update():
    inst = load_instance("eil51")
    res = solve(inst, SolverConfig(seed=0, max_trials=5, stop_at_optimum=False,
                                   rl=RLConfig(strategy=Strategy.Q_ONLY)))
    assert res.counters["q_updates"] > 0
    assert set(res.methods) == {Q_LEARNING}


def test_time_limit_stops_early():
    inst = load_instance("pr299")
    res = solve(inst, SolverConfig(seed=0, time_limit=0.5, stop_at_optimum=False))
    assert res.trials_used < inst.dimension
    res.best_tour.validate()


def test_single_pass_trials_stop_sooner():
    inst = load_instance("kroA100")
    full = solve(inst, SolverConfig(seed=4, max_trials=3, stop_at_optimum=False))
    single = solve(inst, SolverConfig(seed=4, max_trials=3, stop_at_optimum=False,
                                      loop_to_local_optimum=False))
    single.best_tour.validate()
    assert single.counters["moves"] <= 3
    assert full.counters["moves"] > single.counters["moves"]


def test_single_chain_breadth_still_solves_small_instances():
    res = solve(load_instance("eil51"), SolverConfig(seed=0, breadth=SINGLE_CHAIN))
    res.best_tour.validate()
    assert res.best_length <= 440


@pytest.mark.parametrize("kw", [dict(max_trials=0), dict(breadth=(5, 5)),
                                dict(breadth=(5, 0, 3)), dict(chain=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)
