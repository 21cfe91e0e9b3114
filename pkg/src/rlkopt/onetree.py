"""
Minimum 1-trees, alpha-nearness and Held-Karp penalties.

All tree arithmetic is done on integers: a penalized cost is
``SCALE * d(i, j) + pi_i + pi_j`` where the penalties ``pi`` are stored in
units of ``1 / SCALE``. The public dataclasses expose the same values in
plain length units through float properties.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .tsplib import Instance, pair_distance

#: fixed-point scale of penalties and penalized costs
SCALE = 1000

_INF = np.iinfo(np.int64).max // 4


@numba.njit(cache=True, inline="always")
def dist_of(dist, kind, geom, i, j):
    if dist.shape[0] > 0:
        return dist[i, j]
    return pair_distance(kind, geom, i, j)


@numba.njit(cache=True, inline="always")
def cost_of(dist, kind, geom, pi, i, j):
    return SCALE * dist_of(dist, kind, geom, i, j) + pi[i] + pi[j]


@numba.njit(cache=True)
def _prim(dist, kind, geom, pi):
    """Dense Prim rooted at city 0. Returns (parent, parent edge cost)."""
    n = pi.shape[0]
    parent = np.full(n, -1, dtype=np.int64)
    best = np.full(n, _INF, dtype=np.int64)
    in_tree = np.zeros(n, dtype=np.bool_)
    pcost = np.zeros(n, dtype=np.int64)
    cur = 0
    in_tree[0] = True
    for _ in range(n - 1):
        nxt = -1
        nbest = _INF
        for j in range(n):
            if in_tree[j]:
                continue
            c = cost_of(dist, kind, geom, pi, cur, j)
            if c < best[j]:
                best[j] = c
                parent[j] = cur
            if best[j] < nbest:
                nbest = best[j]
                nxt = j
        in_tree[nxt] = True
        pcost[nxt] = nbest
        cur = nxt
    return parent, pcost


@numba.njit(cache=True)
def _one_tree(dist, kind, geom, pi):
    """Minimum 1-tree: MST plus the second-nearest edge of the leaf whose
    second-nearest neighbor is farthest.

    Returns (parent, pcost, special, special_mate, special_cost, length, degree).
    """
    n = pi.shape[0]
    parent, pcost = _prim(dist, kind, geom, pi)
    degree = np.zeros(n, dtype=np.int64)
    length = 0
    for j in range(1, n):
        degree[j] += 1
        degree[parent[j]] += 1
        length += pcost[j]
    special = -1
    mate = -1
    mate_cost = -_INF
    for v in range(n):
        if degree[v] != 1:
            continue
        tree_nb = parent[v] if v != 0 else -1
        if tree_nb == -1:
            for j in range(1, n):
                if parent[j] == v:
                    tree_nb = j
                    break
        bj = -1
        bc = _INF
        for j in range(n):
            if j == v or j == tree_nb:
                continue
            c = cost_of(dist, kind, geom, pi, v, j)
            if c < bc:
                bc = c
                bj = j
        if bc > mate_cost:
            mate_cost = bc
            special = v
            mate = bj
    degree[special] += 1
    degree[mate] += 1
    length += mate_cost
    return parent, pcost, special, mate, mate_cost, length, degree


@dataclass(frozen=True)
class Penalties:
    """Node penalties and the Held-Karp bound they achieve.

    ``pi_scaled`` and ``w_scaled`` are exact integers in units of
    ``1 / SCALE``; ``history`` records ``w`` after every ascent iteration.
    """

    pi_scaled: np.ndarray
    w_scaled: int
    history: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64), repr=False)

    @property
    def pi(self) -> np.ndarray:
        return self.pi_scaled / SCALE

    @property
    def w(self) -> float:
        return self.w_scaled / SCALE

    @classmethod
    def zero(cls, inst: Instance) -> Penalties:
        pi = np.zeros(inst.dimension, dtype=np.int64)
        tree = minimum_one_tree(inst, pi)
        return cls(pi, tree.length_scaled)


@dataclass(frozen=True)
class OneTree:
    """A minimum 1-tree.

    ``parent`` encodes a minimum spanning tree over all cities rooted at
    city 0 in which ``special`` is a leaf; removing ``special`` leaves the
    spanning tree over the other cities. The 1-tree adds the edge
    ``(special, special_mate)``.
    """

    parent: np.ndarray
    parent_cost: np.ndarray
    special: int
    special_mate: int
    special_cost: int
    length_scaled: int
    degree: np.ndarray
    pi_scaled: np.ndarray

    @property
    def total_length(self) -> float:
        return self.length_scaled / SCALE

    @property
    def w_scaled(self) -> int:
        return int(self.length_scaled - 2 * self.pi_scaled.sum())

    def edges(self) -> list[tuple[int, int]]:
        out = [(int(self.parent[j]), j) for j in range(len(self.parent)) if self.parent[j] >= 0]
        out.append((self.special, self.special_mate))
        return out


def _pi_array(inst: Instance, pen) -> np.ndarray:
    if pen is None:
        return np.zeros(inst.dimension, dtype=np.int64)
    if isinstance(pen, Penalties):
        return pen.pi_scaled
    return np.asarray(pen, dtype=np.int64)


def penalized_cost(inst: Instance, pen: Penalties | None, i: int, j: int) -> float:
    """``d(i, j) + pi_i + pi_j`` in length units."""
    pi = _pi_array(inst, pen)
    return inst.distance(i, j) + (int(pi[i]) + int(pi[j])) / SCALE


def minimum_one_tree(inst: Instance, pen: Penalties | np.ndarray | None = None) -> OneTree:
    """Build the minimum 1-tree under the given penalties (zero if omitted)."""
    if inst.dimension < 3:
        raise ValueError("a 1-tree needs at least 3 cities")
    pi = _pi_array(inst, pen)
    parent, pcost, special, mate, mcost, length, degree = _one_tree(
        inst.dist, inst.metric_code, inst.geom, pi)
    return OneTree(parent, pcost, int(special), int(mate), int(mcost), int(length), degree, pi)


# ------------------------------------------------------------------ alpha


@numba.njit(cache=True)
def _lifting(parent, pcost):
    """Binary-lifting tables for path-maximum queries on the rooted tree."""
    n = parent.shape[0]
    depth = np.zeros(n, dtype=np.int64)
    # children lists in BFS order from root 0
    order = np.empty(n, dtype=np.int64)
    head = np.full(n, -1, dtype=np.int64)
    nxt = np.full(n, -1, dtype=np.int64)
    for j in range(n - 1, 0, -1):
        p = parent[j]
        nxt[j] = head[p]
        head[p] = j
    order[0] = 0
    tail = 1
    k = 0
    while k < tail:
        v = order[k]
        c = head[v]
        while c != -1:
            depth[c] = depth[v] + 1
            order[tail] = c
            tail += 1
            c = nxt[c]
        k += 1
    levels = 1
    while (1 << levels) < n:
        levels += 1
    up = np.zeros((levels, n), dtype=np.int64)
    mx = np.zeros((levels, n), dtype=np.int64)
    for v in range(n):
        up[0, v] = parent[v] if parent[v] >= 0 else v
        mx[0, v] = pcost[v] if parent[v] >= 0 else -_INF
    for lv in range(1, levels):
        for v in range(n):
            mid = up[lv - 1, v]
            up[lv, v] = up[lv - 1, mid]
            mx[lv, v] = max(mx[lv - 1, v], mx[lv - 1, mid])
    return depth, up, mx


@numba.njit(cache=True)
def _path_max(depth, up, mx, a, b):
    best = -_INF
    if depth[a] < depth[b]:
        a, b = b, a
    diff = depth[a] - depth[b]
    lv = 0
    while diff > 0:
        if diff & 1:
            best = max(best, mx[lv, a])
            a = up[lv, a]
        diff >>= 1
        lv += 1
    if a == b:
        return best
    for lv in range(up.shape[0] - 1, -1, -1):
        if up[lv, a] != up[lv, b]:
            best = max(best, mx[lv, a], mx[lv, b])
            a = up[lv, a]
            b = up[lv, b]
    return max(best, mx[0, a], mx[0, b])


@numba.njit(cache=True)
def _tree_adjacency(parent, special, mate):
    """CSR adjacency of the 1-tree."""
    n = parent.shape[0]
    deg = np.zeros(n, dtype=np.int64)
    for j in range(n):
        if parent[j] >= 0:
            deg[j] += 1
            deg[parent[j]] += 1
    deg[special] += 1
    deg[mate] += 1
    start = np.zeros(n + 1, dtype=np.int64)
    for v in range(n):
        start[v + 1] = start[v] + deg[v]
    fill = start[:-1].copy()
    adj = np.empty(start[n], dtype=np.int64)
    for j in range(n):
        p = parent[j]
        if p >= 0:
            adj[fill[j]] = p
            fill[j] += 1
            adj[fill[p]] = j
            fill[p] += 1
    adj[fill[special]] = mate
    fill[special] += 1
    adj[fill[mate]] = special
    return start, adj


@numba.njit(cache=True)
def _alpha_kernel(dist, kind, geom, pi, parent, pcost, special, mate, mate_cost, m):
    n = pi.shape[0]
    depth, up, mx = _lifting(parent, pcost)
    start, adj = _tree_adjacency(parent, special, mate)
    maxdeg = 0
    for v in range(n):
        maxdeg = max(maxdeg, start[v + 1] - start[v])
    width = min(m, n - 1)
    nbrs = np.full((n, width + maxdeg), -1, dtype=np.int64)
    alpha = np.zeros((n, width + maxdeg), dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    topc = np.empty(max(width, 1), dtype=np.int64)
    topj = np.empty(max(width, 1), dtype=np.int64)
    for i in range(n):
        # the `width` cheapest neighbors by penalized cost (insertion top-k)
        filled = 0
        for j in range(n):
            if j == i or width == 0:
                continue
            c = cost_of(dist, kind, geom, pi, i, j)
            if filled < width:
                pos = filled
                filled += 1
            elif c < topc[width - 1] or (c == topc[width - 1] and j < topj[width - 1]):
                pos = width - 1
            else:
                continue
            while pos > 0 and (topc[pos - 1] > c or (topc[pos - 1] == c and topj[pos - 1] > j)):
                topc[pos] = topc[pos - 1]
                topj[pos] = topj[pos - 1]
                pos -= 1
            topc[pos] = c
            topj[pos] = j
        k = 0
        for t in range(filled):
            nbrs[i, k] = topj[t]
            k += 1
        # 1-tree neighbors always join the neighborhood (their alpha is 0)
        for e in range(start[i], start[i + 1]):
            j = adj[e]
            found = False
            for t in range(k):
                if nbrs[i, t] == j:
                    found = True
                    break
            if not found:
                nbrs[i, k] = j
                k += 1
        cnt[i] = k
        for t in range(k):
            j = nbrs[i, t]
            if i == special or j == special:
                other = j if i == special else i
                if other == mate or parent[special] == other or parent[other] == special:
                    alpha[i, t] = 0
                else:
                    a = cost_of(dist, kind, geom, pi, i, j) - mate_cost
                    alpha[i, t] = a if a > 0 else 0
            elif parent[i] == j or parent[j] == i:
                alpha[i, t] = 0
            else:
                alpha[i, t] = cost_of(dist, kind, geom, pi, i, j) - _path_max(depth, up, mx, i, j)
    return nbrs, alpha, cnt


@dataclass(frozen=True)
class AlphaTable:
    """Per-city neighbor lists with their alpha-values.

    Row ``i`` of ``neighbors`` lists ``count[i]`` cities (padded with -1);
    ``alpha_scaled`` holds the matching alpha-values in ``1 / SCALE`` units.
    """

    neighbors: np.ndarray
    alpha_scaled: np.ndarray
    count: np.ndarray

    def alpha(self, i: int, j: int) -> float | None:
        row = self.neighbors[i, : self.count[i]]
        hit = np.nonzero(row == j)[0]
        if len(hit) == 0:
            return None
        return self.alpha_scaled[i, hit[0]] / SCALE

    def items(self, i: int) -> list[tuple[int, float]]:
        return [(int(self.neighbors[i, t]), self.alpha_scaled[i, t] / SCALE)
                for t in range(self.count[i])]


def alpha_values(inst: Instance, tree: OneTree, neighborhood: int | None = 20) -> AlphaTable:
    """Alpha-values ``L(T+(i,j)) - L(T)`` over each city's neighborhood.

    The neighborhood of ``i`` is its ``neighborhood`` cheapest cities by
    penalized cost (all cities if ``None``), extended by its 1-tree
    neighbors. For a non-tree edge between two ordinary cities, alpha is its
    cost minus the largest cost on the tree path joining them; for an edge
    at the special node it is its cost minus the larger of the special
    node's two 1-tree edges.
    """
    m = inst.dimension - 1 if neighborhood is None else int(neighborhood)
    nbrs, alpha, cnt = _alpha_kernel(
        inst.dist, inst.metric_code, inst.geom, tree.pi_scaled, tree.parent,
        tree.parent_cost, tree.special, tree.special_mate, tree.special_cost, m)
    return AlphaTable(nbrs, alpha, cnt)


# ------------------------------------------------------------------ ascent


@dataclass(frozen=True)
class AscentConfig:
    """Sub-gradient ascent schedule.

    The step starts at ``initial_step`` (in ``1 / SCALE`` units; by default
    ``w0 / (2n)`` for the zero-penalty 1-tree length ``w0``) and doubles
    while the bound keeps improving in the initial phase; afterwards step and
    period are halved together until either reaches zero. The period
    defaults to ``max(n // 2, 300)``; shorter periods stall on clustered
    instances. ``max_iterations`` optionally caps the total number of 1-tree
    computations.
    """

    initial_step: int | None = None
    initial_period: int | None = None
    max_iterations: int | None = None


@numba.njit(cache=True)
def _ascent(dist, kind, geom, pi0, initial_step, initial_period, max_iter):
    n = pi0.shape[0]
    pi = pi0.copy()
    best_pi = pi.copy()
    last_v = np.zeros(n, dtype=np.int64)
    hist = np.empty(max(max_iter, 1) + 1, dtype=np.int64)
    r = _one_tree(dist, kind, geom, pi)
    degree = r[6]
    w = r[5] - 2 * pi.sum()
    best_w = w
    hist[0] = w
    it = 1
    norm = 0
    for v in range(n):
        d = degree[v] - 2
        last_v[v] = d
        norm += d * d
    if norm == 0:
        return best_pi, best_w, hist[:it]
    step = initial_step if initial_step > 0 else max(1, w // (2 * n))
    period = initial_period
    initial_phase = True
    while period > 0 and step > 0 and norm != 0 and it <= max_iter:
        p = 1
        while step > 0 and p <= period and norm != 0 and it <= max_iter:
            for v in range(n):
                d = degree[v] - 2
                if d != 0:
                    pi[v] += step * (7 * d + 3 * last_v[v]) // 10
                last_v[v] = d
            r = _one_tree(dist, kind, geom, pi)
            degree = r[6]
            w = r[5] - 2 * pi.sum()
            hist[it] = w
            it += 1
            norm = 0
            for v in range(n):
                d = degree[v] - 2
                norm += d * d
            if w > best_w:
                best_w = w
                best_pi[:] = pi
                if initial_phase:
                    step *= 2
                if p == period:
                    period = min(period * 2, initial_period)
            elif initial_phase and p > period // 2:
                initial_phase = False
                p = 0
                step = 3 * step // 4
            p += 1
        period //= 2
        step //= 2
    return best_pi, best_w, hist[:it]


def subgradient_ascent(inst: Instance, config: AscentConfig | None = None) -> Penalties:
    """Maximize the Held-Karp bound ``w(pi) = L(T_pi) - 2 * sum(pi)``.

    Each iteration moves ``pi_i`` along ``deg_i - 2`` (smoothed with the
    previous direction) and recomputes the minimum 1-tree. The best
    penalties seen are returned, so ``w`` is never below the zero-penalty
    1-tree length.
    """
    config = config or AscentConfig()
    n = inst.dimension
    if n < 3:
        raise ValueError("ascent needs at least 3 cities")
    period = config.initial_period or max(n // 2, 300)
    cap = config.max_iterations if config.max_iterations is not None else 50 * period
    pi, w, hist = _ascent(inst.dist, inst.metric_code, inst.geom, np.zeros(n, dtype=np.int64),
                          int(config.initial_step or 0), int(period), int(cap))
    return Penalties(pi, int(w), hist)
