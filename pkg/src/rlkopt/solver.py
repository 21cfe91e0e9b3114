"""
The reinforced k-opt solver.

A run is a sequence of trials. Each trial builds a fresh tour and improves
it with sequential k-opt moves (k <= 5) until no directed tour edge starts
an improving move. The added edges are chosen epsilon-greedily from Q-ranked
candidate lists, and the Q-values are updated while moves are built.

Example
-------
>>> from rlkopt.tsplib import load_instance
>>> from rlkopt.solver import SolverConfig, solve
>>> res = solve(load_instance("berlin52"), SolverConfig(seed=1))
>>> res.best_length
7542
"""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .candidates import QTable, init_alpha_ranked, init_q
from .kopt import MAX_K, Tour, apply_chain, feasible_into, pred, succ
from .onetree import (SCALE, AscentConfig, Penalties, alpha_values, cost_of, dist_of,
                      minimum_one_tree, subgradient_ascent)
from .policy import (MONTE_CARLO, NO_LEARNING, Q_LEARNING, SARSA, RLConfig,
                     Strategy, StrategyState, _monte_carlo, _q_learning, _sarsa,
                     _select, epsilon_at, step_strategy)
from .tsplib import Instance, tour_length

# counter slots filled by the compiled search
EPISODES, MOVES, Q_UPDATES, SARSA_UPDATES, MC_UPDATES, DEEPEST = range(6)
N_COUNTERS = 6

_CHECK_EVERY = 256
_EMPTY = np.zeros(0, dtype=np.int64)

#: extensions descended into at each non-final level of a move
DEFAULT_BREADTH = (5, 5, 3)
#: commit to the first extension at every level
SINGLE_CHAIN = (1, 1, 1)
#: episodes one improvement attempt may string together
DEFAULT_CHAIN = 8


# ---------------------------------------------------------------- compiled


@numba.njit(cache=True)
def _seed(s):
    np.random.seed(s)


@numba.njit(cache=True)
def _now():
    with numba.objmode(t="float64"):
        t = time.perf_counter()
    return t


@numba.njit(cache=True, inline="always")
def _same(a, b, u, v):
    return (a == u and b == v) or (a == v and b == u)


@numba.njit(cache=True, inline="always")
def _removes(p, nx, a, b):
    """Whether (a, b) is one of the first ``nx`` removed edges of ``p``."""
    for i in range(nx):
        if _same(a, b, p[2 * i], p[2 * i + 1]):
            return True
    return False


@numba.njit(cache=True, inline="always")
def _adds(p, ny, a, b):
    """Whether (a, b) is one of the first ``ny`` added edges of ``p``."""
    for i in range(ny):
        if _same(a, b, p[2 * i + 1], p[2 * i + 2]):
            return True
    return False


@numba.njit(cache=True, inline="always")
def _listed(edges, m, a, b):
    for t in range(m):
        u = edges[t, 0]
        v = edges[t, 1]
        if (u == a and v == b) or (u == b and v == a):
            return True
    return False


@numba.njit(cache=True)
def _basic_move(order, pos, dist, kind, geom, pi, cand, q, count, p1, p2, g0,
                method, eps, lam, gamma, breadth, counters, ws, tabu, best, record):
    """One episode: a search for a sequential move of at most ``MAX_K``
    exchanges that removes (p1, p2), given the gain ``g0`` carried so far.

    A depth-first search over the chain ``p``: at level ``L`` the state is
    ``p[2L+1]``, the action an epsilon-greedy candidate ``c`` and the next
    state one of the tour neighbors of ``c``. At most ``breadth[L]``
    extensions are descended into per level. The first feasible close with
    positive gain is applied and its penalized gain returned. Otherwise 0 is
    returned and, when ``record`` is set, ``best`` holds the feasible
    full-depth move with the largest open gain (``best.g`` stays 0 when
    there is none).
    """
    p, tried, gst, cur_t, nbs, side, used, pend, lvl_s, lvl_t, lvl_r, scr = ws
    added, n_added, deleted, n_deleted = tabu
    bp, bmeta = best
    counters[EPISODES] += 1
    p[0] = p1
    p[1] = p2
    gst[0] = g0
    bmeta[0] = 0
    top = MAX_K - 2
    L = 0
    fresh = True
    depth = 0
    result = 0
    while L >= 0:
        s = p[2 * L + 1]
        npts = 2 * L + 2
        if fresh:
            fresh = False
            for t in range(count[s]):
                tried[L, t] = False
            cur_t[L] = -1
            used[L] = 0
            pend[L] = False
        step_done = False
        # continue with the remaining neighbor of the current action
        if cur_t[L] >= 0:
            while side[L] < 2 and used[L] < breadth[L] and L < top:
                d = nbs[L, side[L]]
                side[L] += 1
                if d < 0:
                    continue
                c = cand[s, cur_t[L]]
                p[npts] = c
                p[npts + 1] = d
                gst[L + 1] = gst[L] - cost_of(dist, kind, geom, pi, s, c) \
                    + cost_of(dist, kind, geom, pi, c, d)
                used[L] += 1
                step_done = True
                break
            if not step_done:
                cur_t[L] = -1
        if not step_done:
            if used[L] >= breadth[L] and L < top:
                t = -1
            else:
                t = _select(cand, q, count, s, tried[L], eps)
            while t >= 0:
                tried[L, t] = True
                c = cand[s, t]
                # y = (s, c) must be new: not in the tour, not added before
                ok = c != succ(order, pos, s) and c != pred(order, pos, s) \
                    and not _adds(p, L, s, c)
                if ok and n_deleted[0] > 0 and _listed(deleted, n_deleted[0], s, c):
                    ok = False
                y = cost_of(dist, kind, geom, pi, s, c)
                gk = gst[L] - y
                if ok and gk > 0:
                    a = succ(order, pos, c)
                    b = pred(order, pos, c)
                    if np.random.random() < 0.5:
                        a, b = b, a
                    # x = (c, d) must still be in the tour and not lead back to p1
                    if a == p1 or _removes(p, L + 1, c, a) or \
                            (n_added[0] > 0 and _listed(added, n_added[0], c, a)):
                        a = -1
                    if b == p1 or _removes(p, L + 1, c, b) or \
                            (n_added[0] > 0 and _listed(added, n_added[0], c, b)):
                        b = -1
                    nbs[L, 0] = a
                    nbs[L, 1] = b
                    if a >= 0 or b >= 0:
                        break
                t = _select(cand, q, count, s, tried[L], eps)
            if t < 0:
                # level exhausted: resolve a pending Sarsa target and backtrack
                if L > 0 and pend[L - 1]:
                    _sarsa(q, lvl_s[L - 1], lvl_t[L - 1], lvl_r[L - 1], 0.0, lam, gamma)
                    counters[SARSA_UPDATES] += 1
                    pend[L - 1] = False
                L -= 1
                continue
            # a new action c at state s
            cur_t[L] = t
            side[L] = 0
            x_prev = cost_of(dist, kind, geom, pi, p[npts - 2], s)
            r = (x_prev - y) / SCALE
            first = nbs[L, 0] if nbs[L, 0] >= 0 else nbs[L, 1]
            if method == Q_LEARNING:
                _q_learning(q, count, s, t, r, first, lam, gamma)
                counters[Q_UPDATES] += 1
            elif method == SARSA:
                if L > 0 and pend[L - 1]:
                    _sarsa(q, lvl_s[L - 1], lvl_t[L - 1], lvl_r[L - 1], q[s, t], lam, gamma)
                    counters[SARSA_UPDATES] += 1
                    pend[L - 1] = False
                pend[L] = True
            lvl_s[L] = s
            lvl_t[L] = t
            lvl_r[L] = r
            depth = L + 1
            # closing has priority over going deeper
            for k2 in range(2):
                d = nbs[L, k2]
                if d < 0:
                    continue
                p[npts] = c
                p[npts + 1] = d
                if d == succ(order, pos, p1) or d == pred(order, pos, p1) \
                        or _adds(p, L + 1, d, p1) \
                        or (n_deleted[0] > 0 and _listed(deleted, n_deleted[0], d, p1)):
                    continue
                gd = gk + cost_of(dist, kind, geom, pi, c, d)
                cg = gd - cost_of(dist, kind, geom, pi, d, p1)
                if cg > 0 and feasible_into(order, pos, p, npts + 2, scr):
                    apply_chain(order, pos, p, npts + 2)
                    counters[MOVES] += 1
                    result = cg
                    break
                if record and L == top and gd > bmeta[0] and feasible_into(order, pos, p, npts + 2, scr):
                    bmeta[0] = gd
                    bmeta[1] = npts + 2
                    for u in range(npts + 2):
                        bp[u] = p[u]
            if npts // 2 + 1 > counters[DEEPEST]:
                counters[DEEPEST] = npts // 2 + 1
            if result > 0:
                break
            continue
        L += 1
        fresh = True
    if method == SARSA:
        for l2 in range(MAX_K - 1):
            if pend[l2]:
                _sarsa(q, lvl_s[l2], lvl_t[l2], lvl_r[l2], 0.0, lam, gamma)
                counters[SARSA_UPDATES] += 1
                pend[l2] = False
    elif method == MONTE_CARLO and depth > 0:
        _monte_carlo(q, lvl_s, lvl_t, lvl_r, depth)
        counters[MC_UPDATES] += depth
    return result


@numba.njit(cache=True)
def _episode(order, pos, dist, kind, geom, pi, cand, q, count, p1, p2, method,
             eps, lam, gamma, breadth, chain, counters, ws, tabu, best, backup):
    """Improve the tour starting by removing (p1, p2).

    Runs up to ``chain`` episodes. When one ends without an improving close,
    its best full-depth move is applied tentatively and the next episode
    removes the closing edge of that move, carrying the open gain. Edges
    added by the chain may not be removed again and removed edges may not
    be re-added. The tour is restored when the chain finds no improvement.
    """
    added, n_added, deleted, n_deleted = tabu
    bp, bmeta = best
    n_added[0] = 0
    n_deleted[0] = 0
    g0 = cost_of(dist, kind, geom, pi, p1, p2)
    saved = False
    result = 0
    for link in range(chain):
        result = _basic_move(order, pos, dist, kind, geom, pi, cand, q, count, p1, p2, g0,
                             method, eps, lam, gamma, breadth, counters, ws, tabu, best,
                             chain > 1)
        if result > 0 or link + 1 == chain or bmeta[0] <= 0:
            break
        npts = bmeta[1]
        if not saved:
            backup[0, :] = order
            backup[1, :] = pos
            saved = True
        for u in range(0, npts, 2):
            deleted[n_deleted[0], 0] = bp[u]
            deleted[n_deleted[0], 1] = bp[u + 1]
            n_deleted[0] += 1
        for u in range(1, npts - 1, 2):
            added[n_added[0], 0] = bp[u]
            added[n_added[0], 1] = bp[u + 1]
            n_added[0] += 1
        apply_chain(order, pos, bp, npts)
        g0 = bmeta[0]
        p2 = bp[npts - 1]
    if result <= 0 and saved:
        order[:] = backup[0]
        pos[:] = backup[1]
    return result


@numba.njit(cache=True)
def _workspace(n, K, chain):
    levels = MAX_K - 1
    ws = (np.empty(2 * MAX_K, dtype=np.int64),
          np.zeros((levels, K), dtype=np.bool_),
          np.zeros(MAX_K, dtype=np.int64),
          np.zeros(levels, dtype=np.int64),
          np.zeros((levels, 2), dtype=np.int64),
          np.zeros(levels, dtype=np.int64),
          np.zeros(levels, dtype=np.int64),
          np.zeros(levels, dtype=np.bool_),
          np.zeros(levels, dtype=np.int64),
          np.zeros(levels, dtype=np.int64),
          np.zeros(levels, dtype=np.float64),
          np.empty((7, 2 * MAX_K), dtype=np.int64))
    m = MAX_K * chain
    tabu = (np.zeros((m, 2), dtype=np.int64), np.zeros(1, dtype=np.int64),
            np.zeros((m, 2), dtype=np.int64), np.zeros(1, dtype=np.int64))
    best = (np.zeros(2 * MAX_K, dtype=np.int64), np.zeros(2, dtype=np.int64))
    backup = np.empty((2, n), dtype=np.int64)
    return ws, tabu, best, backup


@numba.njit(cache=True)
def _pass(order, pos, dist, kind, geom, pi, cand, q, count, method, eps, lam,
          gamma, breadth, chain, counters, deadline):
    """Try every directed tour edge once, in random order, stopping at the
    first improvement. Returns (gain, timed_out)."""
    n = order.shape[0]
    dirs = np.random.permutation(2 * n)
    ws, tabu, best, backup = _workspace(n, cand.shape[1], chain)
    # the edges are fixed by the tour at the start of the pass
    p1s = order.copy()
    for e in range(2 * n):
        i = dirs[e]
        c = p1s[i >> 1]
        nb = succ(order, pos, c) if (i & 1) == 0 else pred(order, pos, c)
        g = _episode(order, pos, dist, kind, geom, pi, cand, q, count, c, nb, method,
                     eps, lam, gamma, breadth, chain, counters, ws, tabu, best, backup)
        if g > 0:
            return g, False
        if deadline > 0.0 and (e + 1) % _CHECK_EVERY == 0 and _now() > deadline:
            return 0, True
    return 0, False


@numba.njit(cache=True)
def _local_search(order, pos, dist, kind, geom, pi, cand, q, count, method, eps,
                  lam, gamma, breadth, chain, counters, single_pass, deadline):
    """Repeat passes until one finds nothing. Returns (gain, timed_out)."""
    total = 0
    while True:
        g, timed_out = _pass(order, pos, dist, kind, geom, pi, cand, q, count,
                             method, eps, lam, gamma, breadth, chain, counters, deadline)
        total += g
        if g == 0 or timed_out or single_pass:
            return total, timed_out


@numba.njit(cache=True)
def _nearest_unvisited(dist, kind, geom, visited, cur):
    n = visited.shape[0]
    best = -1
    bd = 0
    for j in range(n):
        if visited[j]:
            continue
        dj = dist_of(dist, kind, geom, cur, j)
        if best < 0 or dj < bd:
            best = j
            bd = dj
    return best


@numba.njit(cache=True, inline="always")
def _adjacent(pos, a, b):
    d = pos[a] - pos[b]
    n = pos.shape[0]
    return d == 1 or d == -1 or d == n - 1 or d == 1 - n


@numba.njit(cache=True)
def _initial_tour(dist, kind, geom, cand, q, count, alpha, start, best_pos, prev_pos):
    """Greedy construction from ``start``.

    Without a reference tour (empty ``best_pos``) the walk moves to the
    best-Q unvisited candidate. With one, it first takes a random unvisited
    zero-alpha candidate edge shared by the best and the previous best tour
    (``prev_pos`` may be empty), then any random unvisited candidate. Both
    fall back to the nearest unvisited city.
    """
    use_best = best_pos.shape[0] > 0
    use_prev = prev_pos.shape[0] > 0
    n = count.shape[0]
    K = cand.shape[1]
    order = np.empty(n, dtype=np.int64)
    visited = np.zeros(n, dtype=np.bool_)
    pool = np.empty(K, dtype=np.int64)
    cur = start
    bq = 0.0
    order[0] = cur
    visited[cur] = True
    for step in range(1, n):
        nxt = -1
        if not use_best:
            for t in range(count[cur]):
                j = cand[cur, t]
                if visited[j]:
                    continue
                if nxt < 0 or q[cur, t] > bq or (q[cur, t] == bq and j < nxt):
                    nxt = j
                    bq = q[cur, t]
        else:
            m = 0
            for t in range(count[cur]):
                j = cand[cur, t]
                if visited[j] or alpha[cur, t] != 0:
                    continue
                if _adjacent(best_pos, cur, j) and (not use_prev or _adjacent(prev_pos, cur, j)):
                    pool[m] = j
                    m += 1
            if m == 0:
                for t in range(count[cur]):
                    j = cand[cur, t]
                    if not visited[j]:
                        pool[m] = j
                        m += 1
            if m > 0:
                nxt = pool[np.random.randint(m)]
        if nxt < 0:
            nxt = _nearest_unvisited(dist, kind, geom, visited, cur)
        order[step] = nxt
        visited[nxt] = True
        cur = nxt
    return order


# ---------------------------------------------------------------- preparation


@dataclass(frozen=True)
class Prepared:
    """Everything a run needs that does not depend on the seed."""

    penalties: Penalties
    qtable: QTable


_PREPARED: dict[tuple, Prepared] = {}
_BOUNDS: dict[tuple, tuple] = {}


def _fingerprint(inst: Instance) -> tuple:
    h = hashlib.sha1()
    for arr in (inst.coords, inst.matrix):
        if arr is not None:
            h.update(np.ascontiguousarray(arr).tobytes())
    return inst.name, inst.dimension, inst.metric_code, h.hexdigest()


def _bounds(inst: Instance, ascent: AscentConfig | None):
    key = _fingerprint(inst) + (ascent,)
    hit = _BOUNDS.get(key)
    if hit is None:
        pen = subgradient_ascent(inst, ascent)
        hit = pen, alpha_values(inst, minimum_one_tree(inst, pen))
        _BOUNDS[key] = hit
    return hit


def prepare(inst: Instance, strategy: Strategy | str = Strategy.VSR,
            K: int = 5, ascent: AscentConfig | None = None) -> Prepared:
    """Ascent, alpha-values and the initial Q-table, memoized per instance.

    The alpha baseline ranks candidates by alpha; every other strategy
    starts from ``w(pi) / (alpha + d)``. Callers get a fresh table copy.
    """
    strategy = Strategy(strategy)
    ranked = strategy is Strategy.ALPHA_BASELINE
    key = _fingerprint(inst) + (ranked, K, ascent)
    hit = _PREPARED.get(key)
    if hit is None:
        pen, alpha = _bounds(inst, ascent)
        qt = init_alpha_ranked(inst, alpha, K) if ranked else init_q(inst, alpha, pen, K)
        hit = Prepared(pen, qt)
        _PREPARED[key] = hit
    return Prepared(hit.penalties, hit.qtable.copy())


def clear_cache() -> None:
    _PREPARED.clear()
    _BOUNDS.clear()


# ---------------------------------------------------------------- public


@dataclass(frozen=True)
class SolverConfig:
    """``max_trials=None`` means one trial per city."""

    max_trials: int | None = None
    rl: RLConfig = field(default_factory=RLConfig)
    seed: int = 0
    time_limit: float | None = None
    stop_at_optimum: bool = True
    loop_to_local_optimum: bool = True
    breadth: tuple[int, ...] = DEFAULT_BREADTH
    chain: int = DEFAULT_CHAIN

    def __post_init__(self):
        if self.max_trials is not None and self.max_trials < 1:
            raise ValueError("max_trials must be at least 1")
        object.__setattr__(self, "breadth", tuple(int(b) for b in self.breadth))
        if len(self.breadth) != MAX_K - 2 or min(self.breadth) < 1:
            raise ValueError(f"breadth needs {MAX_K - 2} positive entries")
        if self.chain < 1:
            raise ValueError("chain must be at least 1")

    def with_(self, **kw) -> SolverConfig:
        return replace(self, **kw)


@dataclass
class RunResult:
    best_tour: Tour
    best_length: int
    trials_used: int
    wall_time: float
    reached_optimum: bool
    history: list[int] = field(default_factory=list)
    methods: list[int] = field(default_factory=list)
    counters: dict[str, int] = field(default_factory=dict)


def _seed32(seed) -> int:
    return int(np.random.SeedSequence(seed).generate_state(1, dtype=np.uint32)[0])


def _method(strategy: Strategy, st: StrategyState) -> int:
    return st.m if strategy.learns else NO_LEARNING


def _breadth(b) -> np.ndarray:
    # the final level only closes, so its entry is never read
    return np.array(tuple(b) + (1,), dtype=np.int64)


def _args(inst: Instance):
    return inst.dist, inst.metric_code, inst.geom


def choose_initial_tour(inst: Instance, qt: QTable, rng: np.random.Generator,
                        best: Tour | None = None, previous: Tour | None = None) -> Tour:
    """Greedy walk over the candidate lists from a random start city.

    With ``best`` given, zero-alpha candidate edges of that tour are reused
    first, which keeps later trials close to the best tour found so far.
    """
    _seed(_seed32(int(rng.integers(2**63))))
    return Tour(_build_initial(inst, qt, int(rng.integers(inst.dimension)), best, previous))


def _build_initial(inst: Instance, qt: QTable, start: int, best: Tour | None,
                   previous: Tour | None) -> np.ndarray:
    bpos = best.pos if best is not None else _EMPTY
    ppos = previous.pos if previous is not None else _EMPTY
    return _initial_tour(*_args(inst), qt.cand, qt.q, qt.count, qt.alpha_scaled,
                         start, bpos, ppos)


def improvement_pass(t: Tour, qt: QTable, inst: Instance, pen: Penalties | None,
                     rng: np.random.Generator, method: int = NO_LEARNING,
                     eps: float = 0.0, rl: RLConfig | None = None,
                     counters: np.ndarray | None = None,
                     breadth: tuple[int, ...] = DEFAULT_BREADTH,
                     chain: int = DEFAULT_CHAIN) -> Tour | None:
    """One pass over the 2n directed tour edges.

    Returns a new, strictly shorter tour at the first improving move, or
    None when no directed edge starts one. ``qt`` is updated in place when
    ``method`` is a learning rule.
    """
    rl = rl or RLConfig()
    pi = np.zeros(inst.dimension, dtype=np.int64) if pen is None else pen.pi_scaled
    counters = np.zeros(N_COUNTERS, dtype=np.int64) if counters is None else counters
    _seed(_seed32(int(rng.integers(2**63))))
    out = t.copy()
    g, _ = _pass(out.order, out.pos, *_args(inst), pi, qt.cand, qt.q, qt.count,
                 method, eps, rl.lam, rl.gamma, _breadth(breadth), chain, counters, 0.0)
    qt.mark_all_dirty()
    return out if g > 0 else None


def solve(inst: Instance, cfg: SolverConfig | None = None) -> RunResult:
    """Run the trial loop on ``inst`` and return the best tour found."""
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    rl = cfg.rl
    strategy = rl.strategy
    n = inst.dimension
    max_trials = cfg.max_trials or n
    rl = rl.with_(max_num=rl.resolved_max_num(max_trials))
    deadline = t0 + cfg.time_limit if cfg.time_limit else 0.0

    prep = prepare(inst, strategy)
    qt, pi = prep.qtable, prep.penalties.pi_scaled
    args = _args(inst)
    counters = np.zeros(N_COUNTERS, dtype=np.int64)
    _seed(_seed32(cfg.seed))
    st = StrategyState(strategy.first_method if strategy.learns else Q_LEARNING, 0)
    optimum = inst.known_optimum

    if n <= 3:
        tour = Tour(np.arange(n))
        length = tour_length(inst, tour)
        return RunResult(tour, length, 1, time.perf_counter() - t0,
                         optimum is not None and length == optimum, [length], [0], {})

    best: Tour | None = None
    previous: Tour | None = None
    best_len = None
    history, methods = [], []
    trials = 0
    breadth = _breadth(cfg.breadth)
    for trial in range(1, max_trials + 1):
        trials = trial
        eps = epsilon_at(rl, trial)
        method = _method(strategy, st)
        start = _draw_start(n)
        order = _build_initial(inst, qt, start, best, previous)
        cur = Tour(order)
        _, timed_out = _local_search(cur.order, cur.pos, *args, pi, qt.cand, qt.q,
                                     qt.count, method, eps, rl.lam, rl.gamma, breadth, cfg.chain, counters,
                                     not cfg.loop_to_local_optimum, deadline)
        length = tour_length(inst, cur)
        improved = best_len is None or length < best_len
        if improved:
            previous, best, best_len = best, cur, length
        history.append(best_len)
        methods.append(method)
        st = step_strategy(st, improved, rl)
        if cfg.stop_at_optimum and optimum is not None and best_len <= optimum:
            break
        if timed_out or (deadline and time.perf_counter() > deadline):
            break
    qt.mark_all_dirty()
    names = ["episodes", "moves", "q_updates", "sarsa_updates", "mc_updates", "deepest_k"]
    return RunResult(
        best_tour=best,
        best_length=int(best_len),
        trials_used=trials,
        wall_time=time.perf_counter() - t0,
        reached_optimum=optimum is not None and best_len == optimum,
        history=history,
        methods=methods,
        counters=dict(zip(names, counters.tolist())),
    )


@numba.njit(cache=True)
def _draw_start(n):
    return np.random.randint(n)
