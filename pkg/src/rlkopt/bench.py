"""
Multi-run benchmarking: repeated seeded solves, success counts and gaps.

Every (instance, strategy) pair is solved ``runs`` times with seeds
``base_seed + run``; the per-run records are kept and the summary rows are
recomputed from them, so a report can always be checked against its data.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Sequence

from .policy import Strategy
from .solver import SolverConfig, solve
from .tsplib import Instance, load_instance

#: emitted column order
COLUMNS = ("instance", "strategy", "optimum", "best", "average", "worst", "success",
           "runs", "mean_time", "mean_trials", "gap", "error")

#: wall-time columns, excluded from determinism comparisons
TIME_COLUMNS = ("mean_time",)


@dataclass(frozen=True)
class RunRecord:
    instance: str
    strategy: str
    run: int
    seed: int
    length: int
    trials: int
    time: float
    reached: bool


@dataclass(frozen=True)
class RunReport:
    instance: str
    strategy: str
    optimum: int | None
    best: int | None
    average: float | None
    worst: int | None
    success: int
    runs: int
    mean_time: float | None
    mean_trials: float | None
    gap: float | None
    error: str | None = None

    def __post_init__(self):
        if self.error is None and self.runs:
            if not self.best <= self.average <= self.worst:
                raise ValueError("expected best <= average <= worst")
        if not 0 <= self.success <= self.runs:
            raise ValueError("success count out of range")


def gap(lengths: Sequence[int], optimum: int | None) -> float | None:
    """Mean relative excess of ``lengths`` over ``optimum``; None without one.

    >>> gap([101, 103], 100)
    0.02
    """
    if optimum is None:
        return None
    if optimum <= 0:
        raise ValueError("optimum must be positive")
    if not lengths:
        return None
    return round(sum((a - optimum) / optimum for a in lengths) / len(lengths), 12)


def cumulative_gap(gaps: Iterable[float | None]) -> list[float]:
    """Running sums of per-instance gaps; missing gaps add nothing."""
    out, acc = [], 0.0
    for g in gaps:
        acc += g or 0.0
        out.append(acc)
    return out


def aggregate(records: Sequence[RunRecord], optimum: int | None,
              instance: str | None = None, strategy: str | None = None) -> RunReport:
    """Summarize the runs of one (instance, strategy) pair."""
    instance = instance or records[0].instance
    strategy = strategy or records[0].strategy
    if not records:
        return RunReport(instance, strategy, optimum, None, None, None, 0, 0,
                         None, None, None)
    lengths = [r.length for r in records]
    return RunReport(
        instance=instance,
        strategy=strategy,
        optimum=optimum,
        best=min(lengths),
        average=sum(lengths) / len(lengths),
        worst=max(lengths),
        success=sum(1 for r in records if optimum is not None and r.length == optimum),
        runs=len(records),
        mean_time=round(sum(r.time for r in records) / len(records), 2),
        mean_trials=sum(r.trials for r in records) / len(records),
        gap=gap(lengths, optimum),
    )


def _one_run(job) -> RunRecord:
    inst, strategy, run, seed, cfg = job
    res = solve(inst, replace(cfg, seed=seed, rl=cfg.rl.with_(strategy=strategy)))
    return RunRecord(inst.name, strategy.value, run, seed, res.best_length,
                     res.trials_used, round(res.wall_time, 2), res.reached_optimum)


def _resolve(source) -> Instance:
    return source if isinstance(source, Instance) else load_instance(source)


@dataclass
class SuiteResult:
    reports: list[RunReport]
    records: list[RunRecord]


def run_suite(instances: Sequence, cfg: SolverConfig | None = None, runs: int = 10,
              strategies: Sequence[Strategy | str] | None = None,
              base_seed: int | None = None, jobs: int = 1,
              keep_records: bool = False):
    """Solve every instance ``runs`` times per strategy and summarize.

    ``instances`` holds :class:`Instance` objects, file paths or bundled
    names. An instance that fails to load or solve yields a report with
    ``error`` set and the suite carries on. ``jobs > 1`` runs solves in a
    process pool; the output order does not depend on completion order.
    """
    if runs < 1:
        raise ValueError("runs must be at least 1")
    cfg = cfg or SolverConfig()
    base_seed = cfg.seed if base_seed is None else base_seed
    strategies = [Strategy(s) for s in (strategies or [cfg.rl.strategy])]
    reports: list[RunReport] = []
    records: list[RunRecord] = []
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for source in instances:
            try:
                inst = _resolve(source)
            except (OSError, ValueError) as exc:
                name = Path(str(source)).stem
                for s in strategies:
                    reports.append(RunReport(name, s.value, None, None, None, None, 0, 0,
                                             None, None, None, error=str(exc)))
                continue
            for s in strategies:
                batch = [(inst, s, r, base_seed + r, cfg) for r in range(runs)]
                try:
                    recs = list(pool.map(_one_run, batch)) if pool else [_one_run(j) for j in batch]
                except Exception as exc:  # noqa: BLE001 - recorded, suite continues
                    reports.append(RunReport(inst.name, s.value, inst.known_optimum, None, None,
                                             None, 0, 0, None, None, None, error=repr(exc)))
                    continue
                recs.sort(key=lambda r: r.run)
                records.extend(recs)
                reports.append(aggregate(recs, inst.known_optimum, inst.name, s.value))
    finally:
        if pool:
            pool.shutdown()
    return SuiteResult(reports, records) if keep_records else reports


# ---------------------------------------------------------------- output


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(reports: Sequence[RunReport], format: str = "table") -> str:
    """Render reports as ``table``, ``csv`` or ``json`` text."""
    rows = [asdict(r) for r in reports]
    if format == "json":
        return json.dumps([{c: row[c] for c in COLUMNS} for row in rows], indent=2) + "\n"
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow([_cell(row[c]) for c in COLUMNS])
        return buf.getvalue()
    if format == "table":
        return _table(rows)
    raise ValueError(f"unknown report format {format!r}")


def _table(rows: list[dict]) -> str:
    def show(c, v):
        if v is None:
            return "-"
        if c == "gap":
            return f"{100 * v:.3f}%"
        if c == "success":
            return str(v)
        if isinstance(v, float):
            return f"{v:.2f}"
        return str(v)

    cols = [c for c in COLUMNS if c != "error" or any(r["error"] for r in rows)]
    cells = [[c for c in cols]] + [[show(c, r[c]) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    lines = ["  ".join(v.rjust(w) if k > 1 else v.ljust(w)
                       for k, (v, w) in enumerate(zip(row, widths))) for row in cells]
    return "\n".join(lines) + "\n"


_INT = {"optimum", "best", "worst", "success", "runs"}
_FLOAT = {"average", "mean_time", "mean_trials", "gap"}


def _typed(name: str, v):
    if v is None or v == "":
        return None
    if name in _INT:
        return int(v)
    if name in _FLOAT:
        return float(v)
    return v


def parse_report(text: str, format: str) -> list[RunReport]:
    """Inverse of :func:`emit_report` for ``csv`` and ``json``."""
    if format == "json":
        rows = json.loads(text)
    elif format == "csv":
        rows = list(csv.DictReader(io.StringIO(text)))
    else:
        raise ValueError(f"cannot parse {format!r} reports")
    names = [f.name for f in fields(RunReport)]
    return [RunReport(**{k: _typed(k, row.get(k)) for k in names}) for row in rows]


def without_times(reports: Sequence[RunReport]) -> list[RunReport]:
    """Copies with wall-time fields cleared, for reproducibility checks."""
    return [replace(r, **{c: None for c in TIME_COLUMNS}) for r in reports]


def summarize_gaps(reports: Sequence[RunReport]) -> dict[str, float]:
    """Final cumulative gap per strategy over the reports' instance order."""
    out: dict[str, list[float | None]] = {}
    for r in reports:
        out.setdefault(r.strategy, []).append(r.gap)
    return {s: (cumulative_gap(g)[-1] if g else math.nan) for s, g in out.items()}
