"""
Solving with learned edge choices
=================================

A run is a series of trials. The first trial starts from a greedy tour,
later ones reuse edges the best tours agree on. Each start tour is improved
with k-opt moves whose added edges are picked from Q-ranked
candidate lists. The Q-values keep learning across trials.
"""
import numpy as np

from rlkopt import (RLConfig, SolverConfig, Strategy, Tour, choose_initial_tour, load_instance,
                    prepare, solve, tour_length)

inst = load_instance("rat195")
print(inst.name, "optimum", inst.known_optimum)

# one greedy start tour, before any k-opt
prep = prepare(inst)
start = choose_initial_tour(inst, prep.qtable, np.random.default_rng(0))
print("greedy start tour:", tour_length(inst, start))

# variable strategy for 100 trials; without the early stop the rule switches show
res = solve(inst, SolverConfig(seed=0, max_trials=100, stop_at_optimum=False))
print("best", res.best_length, "after", res.trials_used, "trials in %.1fs" % res.wall_time)
print("best length per trial:", res.history[:12], "...")
print(res.counters)

# which update rule was active in each trial (1 Q-learning, 2 Sarsa, 3 Monte Carlo)
print("rules used:", "".join(str(m) for m in res.methods))

# the result is a plain permutation
best: Tour = res.best_tour
best.validate()
print("first cities:", (best.order[:10] + 1).tolist())

# same seed, same run
again = solve(inst, SolverConfig(seed=0, max_trials=100, stop_at_optimum=False))
print("reproducible:", again.best_length == res.best_length and again.history == res.history)

# strategies side by side on a harder instance, a fixed number of trials
hard = load_instance("att532")
for strategy in (Strategy.VSR, Strategy.Q_ONLY, Strategy.FIXQ, Strategy.ALPHA_BASELINE):
    lengths = [solve(hard, SolverConfig(seed=s, max_trials=20, rl=RLConfig(strategy=strategy)))
               .best_length for s in range(3)]
    print(f"{strategy.value:6s}", lengths)

# epsilon and lambda trade exploration for speed; a greedy run:
greedy = solve(hard, SolverConfig(seed=1, max_trials=20, rl=RLConfig(epsilon=0.0)))
print("epsilon 0:", greedy.best_length)

# a wall-clock budget is honoured between episodes
quick = solve(load_instance("pr299"), SolverConfig(seed=0, time_limit=2.0))
print("pr299 in 2s:", quick.best_length, "trials", quick.trials_used)
