"""
Tours and sequential k-opt moves.

A sequential move is described by its endpoint chain ``p[0], p[1], ...,
p[2k-1]``: it removes the tour edges ``(p[2i], p[2i+1])`` and adds
``(p[2i+1], p[2i+2])`` plus the closing edge ``(p[2k-1], p[0])``. The
removed and added edges are distinct from each other; a city may appear
twice, which is how a single city is moved elsewhere in the tour.

Feasibility is decided without touching the tour: the k removed edges cut
the cycle into k segments, and walking segment-to-segment through the added
edges must visit all of them before returning.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .onetree import SCALE, cost_of
from .tsplib import Instance

#: deepest move the search builds
MAX_K = 5


@numba.njit(cache=True, inline="always")
def succ(order, pos, c):
    n = order.shape[0]
    i = pos[c] + 1
    return order[i - n] if i >= n else order[i]


@numba.njit(cache=True, inline="always")
def pred(order, pos, c):
    i = pos[c] - 1
    return order[order.shape[0] - 1] if i < 0 else order[i]


#: rows of the scratch array used by the feasibility test
_CUT_OF, _TAIL_FIRST, _CUTS, _SEG_OF, _END_OF, _SLOT, _VISIT = range(7)


def scratch():
    """A scratch array for :func:`feasible_into`."""
    return np.empty((7, 2 * MAX_K), dtype=np.int64)


@numba.njit(cache=True, inline="always")
def _segments(order, pos, p, npts, scr):
    """Sort the cuts and map every endpoint to (segment, end).

    Fills ``scr[_CUTS]`` (segment ``s`` covers positions ``cuts[s] + 1 ..
    cuts[s + 1]``, cyclically), ``scr[_SEG_OF]`` and ``scr[_END_OF]`` (0 for
    the segment's first node, 1 for its last). The end is read from the
    orientation of the removed edge, so a city may be the endpoint of two
    removed edges (a one-city segment). Returns False when two removed
    edges coincide.
    """
    k = npts // 2
    cut_of = scr[_CUT_OF]
    tail_first = scr[_TAIL_FIRST]
    cuts = scr[_CUTS]
    for t in range(k):
        a = p[2 * t]
        b = p[2 * t + 1]
        if succ(order, pos, a) == b:
            cut_of[t] = pos[a]
            tail_first[t] = 1
        else:
            cut_of[t] = pos[b]
            tail_first[t] = 0
        cuts[t] = cut_of[t]
    # insertion sort, k <= MAX_K
    for i in range(1, k):
        v = cuts[i]
        j = i - 1
        while j >= 0 and cuts[j] > v:
            cuts[j + 1] = cuts[j]
            j -= 1
        cuts[j + 1] = v
    for i in range(1, k):
        if cuts[i] == cuts[i - 1]:
            return False
    seg_of = scr[_SEG_OF]
    end_of = scr[_END_OF]
    for t in range(k):
        r = 0
        while cuts[r] != cut_of[t]:
            r += 1
        # the city before the cut ends segment r - 1, the one after starts r
        last = 2 * t if tail_first[t] else 2 * t + 1
        first = 2 * t + 1 if tail_first[t] else 2 * t
        seg_of[last] = (r - 1) % k
        end_of[last] = 1
        seg_of[first] = r
        end_of[first] = 0
    return True


@numba.njit(cache=True, inline="always")
def _mate(idx, npts):
    """Index of the endpoint joined to ``p[idx]`` by an added edge."""
    if idx % 2 == 1:
        return (idx + 1) % npts
    return idx - 1 if idx > 0 else npts - 1


@numba.njit(cache=True, inline="always")
def _trace(npts, scr):
    """Walk the segments through the added edges. ``scr[_VISIT]`` receives
    the visiting order and ``scr[_SLOT]`` the direction of each visited
    segment (1 forward); returns how many segments were visited."""
    k = npts // 2
    seg_of = scr[_SEG_OF]
    end_of = scr[_END_OF]
    visit = scr[_VISIT]
    fwd = scr[_SLOT]
    # endpoint index of (segment, end), kept in the unused cut_of row pair
    slot = scr[_CUT_OF]
    where = scr[_TAIL_FIRST]
    for idx in range(npts):
        if end_of[idx] == 0:
            slot[seg_of[idx]] = idx
        else:
            where[seg_of[idx]] = idx
    s = 0
    forward = 1
    count = 0
    while True:
        visit[count] = s
        fwd[count] = forward
        count += 1
        if count > k:
            break
        m = _mate(where[s] if forward == 1 else slot[s], npts)
        s = seg_of[m]
        forward = 1 if end_of[m] == 0 else 0
        if s == 0:
            break
    return count


@numba.njit(cache=True, inline="always")
def feasible_into(order, pos, p, npts, scr):
    """:func:`feasible` with caller-provided scratch (see :func:`scratch`)."""
    if npts < 4:
        return False
    if not _segments(order, pos, p, npts, scr):
        return False
    return _trace(npts, scr) == npts // 2


@numba.njit(cache=True)
def feasible(order, pos, p, npts):
    """True iff closing the chain ``p[:npts]`` yields one Hamiltonian cycle."""
    return feasible_into(order, pos, p, npts, np.empty((7, 2 * MAX_K), dtype=np.int64))


@numba.njit(cache=True)
def apply_chain(order, pos, p, npts):
    """Rewrite ``order``/``pos`` in place; the chain must be feasible."""
    n = order.shape[0]
    k = npts // 2
    scr = np.empty((7, 2 * MAX_K), dtype=np.int64)
    _segments(order, pos, p, npts, scr)
    _trace(npts, scr)
    cuts = scr[_CUTS]
    out = np.empty(n, dtype=order.dtype)
    w = 0
    for v in range(k):
        s = scr[_VISIT, v]
        first = cuts[s] + 1
        last = cuts[(s + 1) % k]
        length = (last - first) % n + 1
        if scr[_SLOT, v] == 1:
            for t in range(length):
                out[w] = order[(first + t) % n]
                w += 1
        else:
            for t in range(length):
                out[w] = order[(last - t) % n]
                w += 1
    for i in range(n):
        order[i] = out[i]
        pos[out[i]] = i


class Tour:
    """A Hamiltonian cycle stored as ``order`` plus its inverse ``pos``."""

    def __init__(self, order):
        self.order = np.array(order, dtype=np.int64)
        self.pos = np.empty_like(self.order)
        self.pos[self.order] = np.arange(len(self.order))

    @property
    def n(self) -> int:
        return len(self.order)

    def next(self, c: int) -> int:
        return int(succ(self.order, self.pos, c))

    def prev(self, c: int) -> int:
        return int(pred(self.order, self.pos, c))

    def neighbors(self, c: int) -> tuple[int, int]:
        """``(predecessor, successor)`` of ``c``."""
        return self.prev(c), self.next(c)

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.neighbors(a)

    def edges(self) -> set[frozenset]:
        o = self.order
        return {frozenset((int(o[i]), int(o[(i + 1) % len(o)]))) for i in range(len(o))}

    def copy(self) -> Tour:
        return Tour(self.order)

    def validate(self) -> None:
        n = self.n
        if sorted(self.order.tolist()) != list(range(n)):
            raise AssertionError("order is not a permutation")
        if not np.array_equal(self.pos[self.order], np.arange(n)):
            raise AssertionError("pos is not the inverse of order")
        for c in range(n):
            if self.next(self.prev(c)) != c or self.prev(self.next(c)) != c:
                raise AssertionError(f"next/prev inconsistent at {c}")

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"Tour({self.order.tolist()})"


def neighbors_in_tour(t: Tour, c: int) -> tuple[int, int]:
    return t.neighbors(c)


@dataclass
class MoveState:
    """A partially built sequential move.

    ``p`` holds ``p1 .. p2k``; ``gain_sum`` is the penalized
    ``sum(l(x_j) - l(y_j))`` over ``j < k`` in ``1 / SCALE`` units.
    """

    p: list[int] = field(default_factory=list)
    gain_sum: int = 0

    @property
    def k(self) -> int:
        return len(self.p) // 2

    def removed(self) -> list[tuple[int, int]]:
        return [(self.p[2 * i], self.p[2 * i + 1]) for i in range(self.k)]

    def added(self) -> list[tuple[int, int]]:
        """Added edges ``y_1 .. y_{k-1}``, without the closing edge."""
        return [(self.p[2 * i + 1], self.p[2 * i + 2]) for i in range(self.k - 1)]

    @classmethod
    def start(cls, p1: int, p2: int) -> MoveState:
        return cls([p1, p2], 0)

    def extend(self, inst: Instance, pi: np.ndarray, a: int, b: int) -> None:
        """Add ``y = (p2k, a)`` and remove ``x = (a, b)``."""
        x_last = _cost(inst, pi, self.p[-2], self.p[-1])
        self.gain_sum += x_last - _cost(inst, pi, self.p[-1], a)
        self.p += [a, b]


def _cost(inst: Instance, pi: np.ndarray, i: int, j: int) -> int:
    return int(cost_of(inst.dist, inst.metric_code, inst.geom, pi, i, j))


def _pi(inst: Instance, pen) -> np.ndarray:
    if pen is None:
        return np.zeros(inst.dimension, dtype=np.int64)
    return getattr(pen, "pi_scaled", pen)


def close_gain(ms: MoveState, t: Tour, inst: Instance, pen=None) -> float:
    """Total improvement (length units) if the move closes with ``(p2k, p1)``."""
    pi = _pi(inst, pen)
    g = ms.gain_sum + _cost(inst, pi, ms.p[-2], ms.p[-1]) - _cost(inst, pi, ms.p[-1], ms.p[0])
    return g / SCALE


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def is_feasible_close(ms: MoveState, t: Tour) -> bool:
    """Whether closing the move leaves a single Hamiltonian cycle."""
    if ms.k < 2:
        return False
    removed = [_key(a, b) for a, b in ms.removed()]
    added = [_key(a, b) for a, b in ms.added()] + [_key(ms.p[-1], ms.p[0])]
    if len(set(removed)) != len(removed) or len(set(added)) != len(added):
        return False
    if set(removed) & set(added) or any(a == b for a, b in added):
        return False
    if not all(t.has_edge(a, b) for a, b in removed):
        return False
    p = np.asarray(ms.p, dtype=np.int64)
    return bool(feasible(t.order, t.pos, p, len(p)))


def apply_move(t: Tour, ms: MoveState) -> Tour:
    """Apply a feasible move to ``t`` in place and return it."""
    if not is_feasible_close(ms, t):
        raise ValueError("move does not close into a tour")
    p = np.asarray(ms.p, dtype=np.int64)
    apply_chain(t.order, t.pos, p, len(p))
    return t
