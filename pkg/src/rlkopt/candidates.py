"""Candidate sets ranked by Q-value, and their storage during learning."""
from __future__ import annotations

import csv
import io

import numpy as np

from .onetree import SCALE, AlphaTable, Penalties
from .tsplib import Instance

#: floor for the denominator alpha + d of coincident cities
EPS_D = 1e-6
#: alpha is counted in hundredths of a length unit against plain distances
ALPHA_WEIGHT = 100.0


class QTable:
    """Per-city candidate lists with learned Q-values.

    The compiled search reads and writes the arrays directly: ``cand[i, t]``
    is the t-th candidate of city ``i`` (``-1`` past ``count[i]``), ``q`` the
    matching Q-values and ``alpha_scaled`` the alpha-values the candidates
    were chosen with. Row order is the order of construction; greedy reads
    go through :meth:`entries`, which sorts lazily by descending Q with ties
    going to the smaller city index.
    """

    def __init__(self, cand: np.ndarray, q: np.ndarray, alpha_scaled: np.ndarray,
                 count: np.ndarray, dist: np.ndarray | None = None):
        self.cand = cand
        self.q = q
        self.alpha_scaled = alpha_scaled
        self.count = count
        self.dist = dist
        self.missed_updates = 0
        self._dirty = np.ones(len(count), dtype=bool)
        self._sorted: list[list[tuple[int, float]]] = [[] for _ in range(len(count))]

    @property
    def n(self) -> int:
        return len(self.count)

    @property
    def K(self) -> int:
        return self.cand.shape[1]

    def copy(self) -> QTable:
        return QTable(self.cand.copy(), self.q.copy(), self.alpha_scaled.copy(),
                      self.count.copy(), self.dist)

    def _slot(self, i: int, j: int) -> int:
        row = self.cand[i, : self.count[i]]
        hit = np.nonzero(row == j)[0]
        return int(hit[0]) if len(hit) else -1

    def lookup(self, i: int, j: int) -> float | None:
        t = self._slot(i, j)
        return None if t < 0 else float(self.q[i, t])

    def set_q(self, i: int, j: int, value: float) -> None:
        """Overwrite Q(i, j); a pair outside the candidate set is ignored and
        counted in :attr:`missed_updates`."""
        t = self._slot(i, j)
        if t < 0:
            self.missed_updates += 1
            return
        self.q[i, t] = value
        self._dirty[i] = True

    def mark_all_dirty(self) -> None:
        """Call after the arrays were changed behind the table's back."""
        self._dirty[:] = True

    def entries(self, i: int) -> list[tuple[int, float]]:
        """Candidates of ``i`` as ``(city, q)``, best first."""
        if self._dirty[i]:
            k = self.count[i]
            pairs = [(int(self.cand[i, t]), float(self.q[i, t])) for t in range(k)]
            pairs.sort(key=lambda e: (-e[1], e[0]))
            self._sorted[i] = pairs
            self._dirty[i] = False
        return self._sorted[i]

    def candidates(self, i: int) -> list[int]:
        return [j for j, _ in self.entries(i)]

    def greedy(self, i: int) -> int | None:
        e = self.entries(i)
        return e[0][0] if e else None

    def to_csv(self) -> str:
        """Dump ``city, neighbor, alpha, d, q`` rows (1-based cities)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["city", "neighbor", "alpha", "d", "q"])
        for i in range(self.n):
            for j, qv in self.entries(i):
                t = self._slot(i, j)
                d = "" if self.dist is None or self.dist.shape[0] == 0 else int(self.dist[i, j])
                w.writerow([i + 1, j + 1, self.alpha_scaled[i, t] / SCALE, d, repr(qv)])
        return buf.getvalue()


def _pack(n: int, K: int, rows: list[list[tuple[int, float, int]]], dist) -> QTable:
    cand = np.full((n, K), -1, dtype=np.int64)
    q = np.zeros((n, K), dtype=np.float64)
    alpha = np.zeros((n, K), dtype=np.int64)
    count = np.zeros(n, dtype=np.int64)
    for i, row in enumerate(rows):
        for t, (j, qv, a) in enumerate(row):
            cand[i, t] = j
            q[i, t] = qv
            alpha[i, t] = a
        count[i] = len(row)
    return QTable(cand, q, alpha, count, dist)


def init_q(inst: Instance, alpha: AlphaTable, pen: Penalties, K: int = 5,
           eps_d: float = EPS_D, alpha_weight: float = ALPHA_WEIGHT) -> QTable:
    """Initial Q-values ``w(pi) / (alpha(i, j) + d(i, j))``.

    alpha enters at the fixed-point precision of penalized costs, i.e.
    multiplied by ``alpha_weight``, so it decides the ranking and the
    distance mostly separates alpha ties. With ``alpha_weight=1`` both terms
    are in length units; distance then dominates and the ranking is close to
    nearest-neighbor order, which loses badly on clustered instances.

    Each city keeps the ``K`` neighbors (fewer when ``n - 1 < K``) with the
    largest initial Q, best first.
    """
    w = pen.w
    if not w > 0:
        raise ValueError(f"initial Q-values need a positive lower bound, got w={w}")
    rows = []
    for i in range(inst.dimension):
        scored = []
        for t in range(alpha.count[i]):
            j = int(alpha.neighbors[i, t])
            a = int(alpha.alpha_scaled[i, t])
            denom = max(alpha_weight * a / SCALE + inst.distance(i, j), eps_d)
            scored.append((j, w / denom, a))
        scored.sort(key=lambda e: (-e[1], e[0]))
        rows.append(scored[:K])
    return _pack(inst.dimension, K, rows, inst.dist)


def init_alpha_ranked(inst: Instance, alpha: AlphaTable, K: int = 5) -> QTable:
    """Candidate sets in ascending alpha order, the classic traversal.

    Q is set to minus the rank, so greedy selection walks the list in
    order; ties in alpha are broken by distance, then city index.
    """
    rows = []
    for i in range(inst.dimension):
        scored = sorted(
            ((int(alpha.neighbors[i, t]), int(alpha.alpha_scaled[i, t]))
             for t in range(alpha.count[i])),
            key=lambda e: (e[1], inst.distance(i, e[0]), e[0]))[:K]
        rows.append([(j, -float(rank), a) for rank, (j, a) in enumerate(scored)])
    return _pack(inst.dimension, K, rows, inst.dist)
