"""
Reinforcement learning over candidate edges.

States are cities that are about to receive an added edge, actions are
candidate cities, and a reward is the penalized cost of the removed edge
minus that of the added edge. Three update rules are available (one-step
Q-learning, one-step Sarsa and an undiscounted Monte Carlo return) and a
switcher cycles between them when the search stops improving.

The ``_``-prefixed functions are compiled and shared with the search kernel
in :mod:`rlkopt.solver`; the public functions wrap them for a
:class:`~rlkopt.candidates.QTable`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .candidates import QTable

Q_LEARNING, SARSA, MONTE_CARLO = 1, 2, 3
NO_LEARNING = 0


class Strategy(str, enum.Enum):
    VSR = "vsr"
    Q_ONLY = "q"
    SARSA_ONLY = "sarsa"
    MC_ONLY = "mc"
    TD = "td"
    FIXQ = "fixq"
    ALPHA_BASELINE = "alpha"

    @property
    def learns(self) -> bool:
        return self not in (Strategy.FIXQ, Strategy.ALPHA_BASELINE)

    @property
    def first_method(self) -> int:
        return {Strategy.SARSA_ONLY: SARSA, Strategy.MC_ONLY: MONTE_CARLO,
                Strategy.FIXQ: NO_LEARNING,
                Strategy.ALPHA_BASELINE: NO_LEARNING}.get(self, Q_LEARNING)


@dataclass(frozen=True)
class RLConfig:
    """Learning parameters; ``max_num=None`` means ``max_trials / 20``."""

    epsilon: float = 0.4
    beta: float = 0.99
    lam: float = 0.1
    gamma: float = 0.9
    strategy: Strategy = Strategy.VSR
    max_num: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        if not 0.0 < self.lam < 1.0:
            raise ValueError("learning rate must lie in (0, 1)")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")

    def resolved_max_num(self, max_trials: int) -> float:
        return self.max_num if self.max_num is not None else max_trials / 20

    def with_(self, **kw) -> RLConfig:
        return replace(self, **kw)


@dataclass
class Episode:
    """The (state, action, reward) trajectory of one k-opt attempt."""

    states: list[int] = field(default_factory=list)
    actions: list[int] = field(default_factory=list)
    rewards: list[float] = field(default_factory=list)

    def append(self, s: int, a: int, r: float) -> None:
        self.states.append(s)
        self.actions.append(a)
        self.rewards.append(r)

    def __len__(self):
        return len(self.states)


@dataclass(frozen=True)
class StrategyState:
    m: int = Q_LEARNING
    num: int = 0


# ---------------------------------------------------------------- compiled


@numba.njit(cache=True, inline="always")
def _select(cand, q, count, s, tried, eps):
    """Epsilon-greedy index into the candidate row of ``s`` among untried
    slots; -1 when every slot was tried."""
    k = count[s]
    free = 0
    for t in range(k):
        if not tried[t]:
            free += 1
    if free == 0:
        return -1
    if eps > 0.0 and np.random.random() < eps:
        pick = np.random.randint(free)
        for t in range(k):
            if not tried[t]:
                if pick == 0:
                    return t
                pick -= 1
    best = -1
    for t in range(k):
        if tried[t]:
            continue
        if best < 0 or q[s, t] > q[s, best] or (q[s, t] == q[s, best] and cand[s, t] < cand[s, best]):
            best = t
    return best


@numba.njit(cache=True, inline="always")
def _row_max(q, count, s):
    k = count[s]
    if k == 0:
        return 0.0
    m = q[s, 0]
    for t in range(1, k):
        if q[s, t] > m:
            m = q[s, t]
    return m


@numba.njit(cache=True, inline="always")
def _q_learning(q, count, s, slot, r, s_next, lam, gamma):
    q[s, slot] = (1.0 - lam) * q[s, slot] + lam * (r + gamma * _row_max(q, count, s_next))


@numba.njit(cache=True, inline="always")
def _sarsa(q, s, slot, r, q_next, lam, gamma):
    q[s, slot] = (1.0 - lam) * q[s, slot] + lam * (r + gamma * q_next)


@numba.njit(cache=True)
def _monte_carlo(q, states, slots, rewards, length):
    ret = 0.0
    for t in range(length - 1, -1, -1):
        ret += rewards[t]
        q[states[t], slots[t]] = ret


# ---------------------------------------------------------------- public


def reward(cost, prev_action: int | None, state: int, action: int, is_first: bool,
           p1: int | None = None) -> float:
    """Penalized cost of the removed edge minus that of the added edge.

    ``cost`` is any callable ``cost(i, j)``. At the first step the removed
    edge is ``(p1, state)``; later it is ``(prev_action, state)``.
    """
    origin = p1 if is_first else prev_action
    return cost(origin, state) - cost(state, action)


def select_action(qt: QTable, state: int, excluded, eps: float,
                  rng: np.random.Generator) -> int | None:
    """Epsilon-greedy choice among candidates of ``state`` not in ``excluded``.

    Greedy picks break ties toward the smaller city index; exploratory
    picks are uniform over the remaining candidates.
    """
    free = [j for j in qt.candidates(state) if j not in excluded]
    if not free:
        return None
    if eps > 0 and rng.random() < eps:
        return free[int(rng.integers(len(free)))]
    return free[0]


def update_q_learning(qt: QTable, s: int, a: int, r: float, s_next: int, cfg: RLConfig) -> None:
    slot = qt._slot(s, a)
    if slot < 0:
        qt.missed_updates += 1
        return
    _q_learning(qt.q, qt.count, s, slot, r, s_next, cfg.lam, cfg.gamma)
    qt._dirty[s] = True


def update_sarsa(qt: QTable, s: int, a: int, r: float, s_next: int | None,
                 a_next: int | None, cfg: RLConfig) -> None:
    """Sarsa step; ``a_next=None`` marks the terminal step (no bootstrap)."""
    slot = qt._slot(s, a)
    if slot < 0:
        qt.missed_updates += 1
        return
    q_next = 0.0
    if a_next is not None:
        q_next = qt.lookup(s_next, a_next)
        if q_next is None:
            qt.missed_updates += 1
            q_next = 0.0
    _sarsa(qt.q, s, slot, r, q_next, cfg.lam, cfg.gamma)
    qt._dirty[s] = True


def update_monte_carlo(qt: QTable, episode: Episode) -> None:
    """Replace every visited Q(s_t, a_t) by the undiscounted return from t."""
    if not len(episode):
        return
    slots = [qt._slot(s, a) for s, a in zip(episode.states, episode.actions)]
    if min(slots) < 0:
        qt.missed_updates += sum(1 for t in slots if t < 0)
    ret = 0.0
    for t in range(len(episode) - 1, -1, -1):
        ret += episode.rewards[t]
        if slots[t] >= 0:
            qt.q[episode.states[t], slots[t]] = ret
            qt._dirty[episode.states[t]] = True


def step_strategy(st: StrategyState, improved: bool, cfg: RLConfig,
                  max_trials: int | None = None) -> StrategyState:
    """Advance the no-improvement counter and switch methods when it
    reaches the threshold (1 -> 2 -> 3 -> 1; 1 <-> 2 for TD)."""
    if improved:
        return StrategyState(st.m, 0)
    num = st.num + 1
    threshold = cfg.max_num if max_trials is None else cfg.resolved_max_num(max_trials)
    if threshold is None or num < threshold:
        return StrategyState(st.m, num)
    strategy = cfg.strategy
    if strategy is Strategy.VSR:
        m = st.m % 3 + 1
    elif strategy is Strategy.TD:
        m = st.m % 2 + 1
    else:
        m = st.m
    return StrategyState(m, 0)


def epsilon_at(cfg: RLConfig, trial: int) -> float:
    """Exploration rate used during the 1-based ``trial``."""
    if not cfg.strategy.learns:
        return 0.0
    return cfg.epsilon * cfg.beta ** trial
