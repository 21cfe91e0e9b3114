"""
TSPLIB instance and tour files, plus the integer distance functions.

Instances are parsed from the TSPLIB95 keyword format. Only symmetric TSPs
are accepted, with one of the five metrics ``EUC_2D``, ``CEIL_2D``, ``ATT``,
``GEO`` or ``EXPLICIT``. Cities are 0-based everywhere in the library; the
1-based TSPLIB numbering only exists in files.

>>> inst = parse_instance('''NAME: tri
... TYPE: TSP
... DIMENSION: 3
... EDGE_WEIGHT_TYPE: EUC_2D
... NODE_COORD_SECTION
... 1 0 0
... 2 3 0
... 3 0 4
... EOF''')
>>> inst.dimension, inst.metric.value, inst.distance(1, 2)
(3, 'EUC_2D', 5)
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numba
import numpy as np

#: above this many cities, distances are computed on demand
DENSE_CAP = 5000


class TSPLIBError(ValueError):
    """Base class of all parse errors."""


class UnsupportedMetricError(TSPLIBError):
    """The problem type or edge weight type/format is not supported."""


class MalformedCoordinateError(TSPLIBError):
    """A coordinate or matrix row could not be read."""


class DimensionMismatchError(TSPLIBError):
    """The data sections disagree with ``DIMENSION``."""


class Metric(str, enum.Enum):
    EUC_2D = "EUC_2D"
    CEIL_2D = "CEIL_2D"
    ATT = "ATT"
    GEO = "GEO"
    EXPLICIT = "EXPLICIT"


# integer codes used by the compiled kernels
METRIC_CODES = {Metric.EUC_2D: 0, Metric.CEIL_2D: 1, Metric.ATT: 2,
                Metric.GEO: 3, Metric.EXPLICIT: 4}

_GEO_PI = 3.141592
_GEO_RADIUS = 6378.388


@numba.njit(cache=True)
def pair_distance(kind: int, geom: np.ndarray, i: int, j: int) -> int:
    """Integer TSPLIB distance between cities ``i`` and ``j``.

    ``geom`` holds raw coordinates, except for GEO where it holds
    (latitude, longitude) in radians as produced by :func:`geo_radians`.
    """
    if i == j:
        return 0
    if kind == 3:
        q1 = math.cos(geom[i, 1] - geom[j, 1])
        q2 = math.cos(geom[i, 0] - geom[j, 0])
        q3 = math.cos(geom[i, 0] + geom[j, 0])
        return int(_GEO_RADIUS
                   * math.acos(0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3))
                   + 1.0)
    dx = geom[i, 0] - geom[j, 0]
    dy = geom[i, 1] - geom[j, 1]
    if kind == 0:
        return int(math.floor(math.sqrt(dx * dx + dy * dy) + 0.5))
    if kind == 1:
        return int(math.ceil(math.sqrt(dx * dx + dy * dy)))
    # ATT pseudo-Euclidean
    r = math.sqrt((dx * dx + dy * dy) / 10.0)
    t = int(math.floor(r + 0.5))
    if t < r:
        return t + 1
    return t


@numba.njit(cache=True)
def _dense_matrix(kind: int, geom: np.ndarray) -> np.ndarray:
    n = geom.shape[0]
    out = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            d = pair_distance(kind, geom, i, j)
            out[i, j] = d
            out[j, i] = d
    return out


def geo_radians(coords: np.ndarray) -> np.ndarray:
    """Convert TSPLIB ``DDD.MM`` GEO coordinates to radians."""
    deg = np.trunc(coords)
    minutes = coords - deg
    return _GEO_PI * (deg + 5.0 * minutes / 3.0) / 180.0


@dataclass(frozen=True, eq=False)
class Instance:
    """A parsed symmetric TSP instance.

    Attributes:
        name: Instance name.
        dimension: Number of cities ``n``.
        metric: Edge weight type.
        coords: ``(n, 2)`` coordinates, ``None`` for EXPLICIT.
        matrix: ``(n, n)`` integer distances, EXPLICIT only.
        known_optimum: Optimal tour length, if known.
        comment: Free text from the ``COMMENT`` keyword.
    """

    name: str
    dimension: int
    metric: Metric
    coords: np.ndarray | None = None
    matrix: np.ndarray | None = None
    known_optimum: int | None = None
    comment: str = ""
    dense_cap: int = field(default=DENSE_CAP, repr=False)

    def __post_init__(self):
        if self.metric is Metric.EXPLICIT:
            if self.matrix is None or self.matrix.shape != (self.dimension,) * 2:
                raise DimensionMismatchError(
                    f"{self.name}: EXPLICIT matrix must be "
                    f"{self.dimension}x{self.dimension}")
        elif self.coords is None or self.coords.shape != (self.dimension, 2):
            raise DimensionMismatchError(
                f"{self.name}: expected {self.dimension} coordinate rows")

    @property
    def n(self) -> int:
        return self.dimension

    @property
    def metric_code(self) -> int:
        return METRIC_CODES[self.metric]

    @cached_property
    def geom(self) -> np.ndarray:
        """Coordinates in the form :func:`pair_distance` expects."""
        if self.coords is None:
            return np.zeros((0, 2))
        if self.metric is Metric.GEO:
            return geo_radians(self.coords)
        return np.ascontiguousarray(self.coords, dtype=np.float64)

    @property
    def is_dense(self) -> bool:
        return self.metric is Metric.EXPLICIT or self.dimension <= self.dense_cap

    @cached_property
    def dist(self) -> np.ndarray:
        """Full integer distance matrix, or an empty ``(0, 0)`` array when
        the instance is above the dense cap (distances on demand)."""
        if self.matrix is not None:
            return np.ascontiguousarray(self.matrix, dtype=np.int64)
        if not self.is_dense:
            return np.zeros((0, 0), dtype=np.int64)
        return _dense_matrix(self.metric_code, self.geom)

    def distance(self, i: int, j: int) -> int:
        """Distance between cities ``i`` and ``j`` (0-based)."""
        n = self.dimension
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"city index out of range for n={n}: {i}, {j}")
        if self.dist.shape[0]:
            return int(self.dist[i, j])
        return int(pair_distance(self.metric_code, self.geom, i, j))

    def with_optimum(self, optimum: int | None) -> Instance:
        return Instance(self.name, self.dimension, self.metric, self.coords,
                        self.matrix, optimum, self.comment, self.dense_cap)


@dataclass(frozen=True)
class TourFile:
    """A tour read from or written to a TSPLIB ``TOUR`` document.

    ``order`` is 0-based; files store 1-based city numbers.
    """

    name: str
    order: np.ndarray

    def __post_init__(self):
        n = len(self.order)
        if sorted(int(c) for c in self.order) != list(range(n)):
            raise TSPLIBError(f"{self.name}: tour is not a permutation of 1..{n}")


# ---------------------------------------------------------------- parsing

_SECTIONS = ("NODE_COORD_SECTION", "EDGE_WEIGHT_SECTION", "TOUR_SECTION",
             "DISPLAY_DATA_SECTION", "FIXED_EDGES_SECTION")


def _header_and_sections(text: str) -> tuple[dict[str, str], dict[str, list[tuple[int, str]]]]:
    header: dict[str, str] = {}
    sections: dict[str, list[tuple[int, str]]] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "EOF":
            break
        key = line.split(":", 1)[0].strip().upper()
        if key in _SECTIONS:
            current = key
            sections[current] = []
            continue
        if current is None or (":" in line and key.isupper()
                               and key.replace("_", "").isalpha()):
            if ":" not in line:
                raise TSPLIBError(f"line {lineno}: expected 'KEY: value', got {line!r}")
            k, v = line.split(":", 1)
            header[k.strip().upper()] = v.strip()
            current = None
            continue
        sections[current].append((lineno, line))
    return header, sections


_COLUMN_ALIASES = {"UPPER_COL": "LOWER_ROW", "LOWER_COL": "UPPER_ROW",
                   "UPPER_DIAG_COL": "LOWER_DIAG_ROW",
                   "LOWER_DIAG_COL": "UPPER_DIAG_ROW"}


def _explicit_matrix(n: int, fmt: str, rows: list[tuple[int, str]]) -> np.ndarray:
    values: list[int] = []
    for lineno, line in rows:
        try:
            values.extend(int(float(tok)) for tok in line.split())
        except ValueError as err:
            raise MalformedCoordinateError(
                f"line {lineno}: EDGE_WEIGHT_SECTION has a non-numeric entry") from err
    expected = {
        "FULL_MATRIX": n * n,
        "UPPER_ROW": n * (n - 1) // 2,
        "LOWER_ROW": n * (n - 1) // 2,
        "UPPER_COL": n * (n - 1) // 2,
        "LOWER_COL": n * (n - 1) // 2,
        "UPPER_DIAG_ROW": n * (n + 1) // 2,
        "LOWER_DIAG_ROW": n * (n + 1) // 2,
        "UPPER_DIAG_COL": n * (n + 1) // 2,
        "LOWER_DIAG_COL": n * (n + 1) // 2,
    }
    if fmt not in expected:
        raise UnsupportedMetricError(f"EDGE_WEIGHT_FORMAT {fmt!r} is not supported")
    if len(values) < expected[fmt]:
        raise DimensionMismatchError(
            f"EDGE_WEIGHT_SECTION: DIMENSION {n} with {fmt} needs "
            f"{expected[fmt]} entries, found {len(values)}")
    vals = np.asarray(values[:expected[fmt]], dtype=np.int64)
    if fmt == "FULL_MATRIX":
        m = vals.reshape(n, n)
        if not np.array_equal(m, m.T):
            raise UnsupportedMetricError("FULL_MATRIX is not symmetric (asymmetric TSP)")
        return m
    # a column-major triangle reads like the row-major opposite triangle
    fmt = _COLUMN_ALIASES.get(fmt, fmt)
    m = np.zeros((n, n), dtype=np.int64)
    diag = "DIAG" in fmt
    if fmt.startswith("UPPER"):
        idx = np.triu_indices(n, 0 if diag else 1)
    else:
        idx = np.tril_indices(n, 0 if diag else -1)
    m[idx] = vals
    m = m + m.T
    np.fill_diagonal(m, 0)
    return m


def _clean_name(raw: str, default: str) -> str:
    if not raw.strip():
        return default
    name = raw.split()[0]
    for suffix in (".opt.tour", ".tour", ".tsp"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name


def parse_instance(text: str) -> Instance:
    """Parse a TSPLIB ``.tsp`` document.

    Raises:
        UnsupportedMetricError: Asymmetric or otherwise unsupported problems.
        MalformedCoordinateError: Unreadable coordinate rows.
        DimensionMismatchError: Section sizes disagree with ``DIMENSION``.
    """
    header, sections = _header_and_sections(text)
    ptype = header.get("TYPE", "TSP").split()[0].upper()
    if ptype != "TSP":
        raise UnsupportedMetricError(f"TYPE: {ptype} is not a symmetric TSP")
    if "DIMENSION" not in header:
        raise DimensionMismatchError("DIMENSION keyword is missing")
    try:
        n = int(header["DIMENSION"])
    except ValueError as err:
        raise DimensionMismatchError(f"DIMENSION: {header['DIMENSION']!r} is not an integer") from err
    ewt = header.get("EDGE_WEIGHT_TYPE", "").upper()
    try:
        metric = Metric(ewt)
    except ValueError as err:
        raise UnsupportedMetricError(f"EDGE_WEIGHT_TYPE: {ewt!r} is not supported") from err
    name = _clean_name(header.get("NAME", ""), "unnamed")

    if metric is Metric.EXPLICIT:
        if "EDGE_WEIGHT_SECTION" not in sections:
            raise DimensionMismatchError("EDGE_WEIGHT_SECTION is missing")
        fmt = header.get("EDGE_WEIGHT_FORMAT", "").upper()
        matrix = _explicit_matrix(n, fmt, sections["EDGE_WEIGHT_SECTION"])
        return Instance(name, n, metric, matrix=matrix, comment=header.get("COMMENT", ""))

    rows = sections.get("NODE_COORD_SECTION")
    if rows is None:
        raise DimensionMismatchError("NODE_COORD_SECTION is missing")
    coords = np.full((n, 2), np.nan)
    seen = 0
    for lineno, line in rows:
        parts = line.split()
        if len(parts) != 3:
            raise MalformedCoordinateError(
                f"line {lineno}: NODE_COORD_SECTION row needs 'id x y', got {line!r}")
        try:
            idx, x, y = int(parts[0]), float(parts[1]), float(parts[2])
        except ValueError as err:
            raise MalformedCoordinateError(f"line {lineno}: bad coordinate row {line!r}") from err
        if not 1 <= idx <= n:
            raise DimensionMismatchError(
                f"line {lineno}: node id {idx} outside DIMENSION {n}")
        coords[idx - 1] = (x, y)
        seen += 1
    if seen != n or np.isnan(coords).any():
        raise DimensionMismatchError(
            f"NODE_COORD_SECTION: DIMENSION is {n} but {seen} coordinate rows were given")
    return Instance(name, n, metric, coords=coords, comment=header.get("COMMENT", ""))


def parse_tour(text: str) -> TourFile:
    """Parse a TSPLIB ``.tour`` / ``.opt.tour`` document."""
    header, sections = _header_and_sections(text)
    if "TOUR_SECTION" not in sections:
        raise TSPLIBError("TOUR_SECTION is missing")
    cities: list[int] = []
    for lineno, line in sections["TOUR_SECTION"]:
        for tok in line.split():
            try:
                c = int(tok)
            except ValueError as err:
                raise TSPLIBError(f"line {lineno}: bad tour entry {tok!r}") from err
            if c == -1:
                break
            cities.append(c - 1)
        else:
            continue
        break
    if "DIMENSION" in header and int(header["DIMENSION"]) != len(cities):
        raise DimensionMismatchError(
            f"TOUR_SECTION: DIMENSION is {header['DIMENSION']} but {len(cities)} cities listed")
    name = _clean_name(header.get("NAME", ""), "tour")
    return TourFile(name, np.asarray(cities, dtype=np.int64))


def write_tour(name: str, order: Sequence[int], length: int | None = None) -> str:
    """Serialize a 0-based tour as a TSPLIB ``TOUR`` document."""
    lines = [f"NAME : {name}", "TYPE : TOUR"]
    if length is not None:
        lines.append(f"COMMENT : Length = {length}")
    lines += [f"DIMENSION : {len(order)}", "TOUR_SECTION"]
    lines += [str(int(c) + 1) for c in order]
    lines += ["-1", "EOF", ""]
    return "\n".join(lines)


def serialize_instance(inst: Instance) -> str:
    """Write an instance back out; EXPLICIT instances use FULL_MATRIX."""
    lines = [f"NAME: {inst.name}", "TYPE: TSP"]
    if inst.comment:
        lines.append(f"COMMENT: {inst.comment}")
    lines += [f"DIMENSION: {inst.dimension}", f"EDGE_WEIGHT_TYPE: {inst.metric.value}"]
    if inst.metric is Metric.EXPLICIT:
        lines += ["EDGE_WEIGHT_FORMAT: FULL_MATRIX", "EDGE_WEIGHT_SECTION"]
        lines += [" ".join(str(int(v)) for v in row) for row in inst.matrix]
    else:
        lines.append("NODE_COORD_SECTION")
        lines += [f"{i + 1} {x!r} {y!r}" for i, (x, y) in enumerate(inst.coords.tolist())]
    lines += ["EOF", ""]
    return "\n".join(lines)


# ---------------------------------------------------------------- tours


@numba.njit(cache=True)
def _cycle_length(dist: np.ndarray, kind: int, geom: np.ndarray, order: np.ndarray) -> int:
    n = order.shape[0]
    total = 0
    for k in range(n):
        a = order[k]
        b = order[(k + 1) % n]
        if dist.shape[0] > 0:
            total += dist[a, b]
        else:
            total += pair_distance(kind, geom, a, b)
    return total


def tour_length(inst: Instance, tour) -> int:
    """Length of the closed tour, including the edge back to the start.

    ``tour`` may be a :class:`~rlkopt.kopt.Tour`, a :class:`TourFile` or any
    sequence of 0-based cities.
    """
    order = getattr(tour, "order", tour)
    order = np.asarray(order, dtype=np.int64)
    if len(order) != inst.dimension or len(np.unique(order)) != inst.dimension:
        raise ValueError("tour must visit every city exactly once")
    return int(_cycle_length(inst.dist, inst.metric_code, inst.geom, order))


# ---------------------------------------------------------------- bundled data


def _data_dir():
    return resources.files("rlkopt") / "data"


def known_optima() -> dict[str, int]:
    """Published optimal tour lengths of the symmetric TSPLIB instances."""
    return json.loads((_data_dir() / "optima.json").read_text())


def bundled_instances() -> list[str]:
    """Names of the TSPLIB instances shipped with the package, by size."""
    names = [p.name[:-4] for p in (_data_dir() / "tsplib").iterdir()
             if p.name.endswith(".tsp")]
    return sorted(names, key=lambda s: (int("".join(c for c in s if c.isdigit()) or 0), s))


def load_instance(source: str | Path, optimum: int | None = None) -> Instance:
    """Load an instance from a file path or by bundled TSPLIB name.

    The known optimum is filled in from the bundled table unless
    ``optimum`` overrides it.
    """
    path = Path(source)
    if path.suffix == ".tsp" or path.exists():
        inst = parse_instance(path.read_text())
    else:
        res = _data_dir() / "tsplib" / f"{source}.tsp"
        if not res.is_file():
            raise FileNotFoundError(f"no such instance file or bundled instance: {source}")
        inst = parse_instance(res.read_text())
    if optimum is None:
        optimum = known_optima().get(inst.name)
    return inst.with_optimum(optimum)


def load_optimal_tour(name: str) -> TourFile | None:
    """The bundled ``.opt.tour`` for ``name``, if TSPLIB publishes one."""
    res = _data_dir() / "tsplib" / f"{name}.opt.tour"
    if not res.is_file():
        return None
    return parse_tour(res.read_text())


def random_instance(n: int, rng: np.random.Generator, scale: float = 1000.0,
                    name: str | None = None) -> Instance:
    """Uniform random EUC_2D instance (used by tests and demos)."""
    coords = np.round(rng.uniform(0.0, scale, size=(n, 2)))
    return Instance(name or f"rand{n}", n, Metric.EUC_2D, coords=coords)


def from_matrix(matrix: Iterable[Iterable[int]], name: str = "explicit") -> Instance:
    m = np.asarray(matrix, dtype=np.int64)
    return Instance(name, m.shape[0], Metric.EXPLICIT, matrix=m)
