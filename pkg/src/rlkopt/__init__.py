"""Reinforced k-opt for the symmetric TSP.

Typical use::

    from rlkopt import load_instance, solve, SolverConfig
    res = solve(load_instance("eil51"), SolverConfig(seed=3))
"""
from .bench import RunReport, emit_report, gap, parse_report, run_suite
from .candidates import QTable, init_alpha_ranked, init_q
from .kopt import MAX_K, MoveState, Tour, apply_move, close_gain, is_feasible_close
from .onetree import (AscentConfig, Penalties, alpha_values, minimum_one_tree,
                      subgradient_ascent)
from .policy import RLConfig, Strategy, StrategyState, epsilon_at, step_strategy
from .solver import RunResult, SolverConfig, choose_initial_tour, improvement_pass, prepare, solve
from .tsplib import Instance, load_instance, load_optimal_tour, tour_length, write_tour

__version__ = "0.1.0"

__all__ = [
    "AscentConfig", "Instance", "MAX_K", "MoveState", "Penalties", "QTable", "RLConfig",
    "RunReport", "RunResult", "SolverConfig", "Strategy", "StrategyState", "Tour",
    "alpha_values", "apply_move", "choose_initial_tour", "close_gain", "emit_report",
    "epsilon_at", "gap", "improvement_pass", "init_alpha_ranked", "init_q",
    "is_feasible_close", "load_instance", "load_optimal_tour", "minimum_one_tree",
    "parse_report", "prepare", "run_suite", "solve", "step_strategy", "subgradient_ascent",
    "tour_length", "write_tour",
]
