"""Command line entry point: ``tspbench solve`` and ``tspbench suite``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import emit_report, run_suite
from .candidates import init_q
from .onetree import alpha_values, minimum_one_tree
from .policy import RLConfig, Strategy
from .solver import SolverConfig, prepare, solve
from .tsplib import TSPLIBError, load_instance, tour_length, write_tour

STRATEGY_NAMES = [s.value for s in Strategy]


def _strategies(text: str) -> list[Strategy]:
    try:
        return [Strategy(s.strip()) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"{exc}; choose from {', '.join(STRATEGY_NAMES)}") from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--runs", type=int, default=1, help="seeded runs per instance")
    p.add_argument("--seed", type=int, default=0, help="seed of the first run")
    p.add_argument("--max-trials", type=int, default=None,
                   help="trials per run (default: number of cities)")
    p.add_argument("--time-limit", type=float, default=None, help="seconds per run")
    p.add_argument("--epsilon", type=float, default=0.4)
    p.add_argument("--beta", type=float, default=0.99)
    p.add_argument("--lambda", dest="lam", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--max-num", type=float, default=None,
                   help="non-improving trials before switching rule (default: trials / 20)")
    p.add_argument("--no-stop-at-optimum", action="store_true")
    p.add_argument("--single-pass", action="store_true",
                   help="one improvement pass per trial instead of a full local search")
    p.add_argument("--jobs", type=int, default=1, help="parallel solver processes")
    p.add_argument("--out", type=Path, default=None, help="write the report here")
    p.add_argument("--format", choices=["table", "csv", "json"], default="table")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tspbench",
                                 description="Reinforced k-opt TSP solver and benchmark runner.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve one TSPLIB file")
    s.add_argument("file", help="a .tsp file or the name of a bundled instance")
    s.add_argument("--strategy", type=_strategies, default=[Strategy.VSR],
                   help=f"one of {', '.join(STRATEGY_NAMES)}")
    s.add_argument("--optimum", type=int, default=None, help="override the known optimum")
    s.add_argument("--tour-out", type=Path, default=None,
                   help="write the best tour of the first run in TSPLIB format")
    s.add_argument("--dump-penalties", type=Path, default=None,
                   help="CSV of the node penalties after the ascent")
    s.add_argument("--dump-candidates", type=Path, default=None,
                   help="CSV of candidate lists with alpha, distance and initial Q")
    _common(s)

    u = sub.add_parser("suite", help="benchmark a directory or list of instances")
    u.add_argument("source", type=Path,
                   help="a directory of .tsp files or a text file with one instance per line")
    u.add_argument("--strategies", type=_strategies, default=[Strategy.VSR],
                   help=f"comma separated, from {', '.join(STRATEGY_NAMES)}")
    _common(u)
    return ap


def _config(args) -> SolverConfig:
    rl = RLConfig(epsilon=args.epsilon, beta=args.beta, lam=args.lam, gamma=args.gamma,
                  max_num=args.max_num)
    return SolverConfig(max_trials=args.max_trials, rl=rl, seed=args.seed,
                        time_limit=args.time_limit,
                        stop_at_optimum=not args.no_stop_at_optimum,
                        loop_to_local_optimum=not args.single_pass)


def _suite_entries(source: Path) -> list:
    if source.is_dir():
        return sorted(source.glob("*.tsp"))
    entries = []
    for line in source.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        path = source.parent / line
        entries.append(path if path.exists() else line)
    return entries


def _write(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _dumps(inst, args) -> None:
    if args.dump_penalties is None and args.dump_candidates is None:
        return
    prep = prepare(inst, Strategy.VSR)
    if args.dump_penalties is not None:
        rows = ["city,pi"] + [f"{i + 1},{v!r}" for i, v in enumerate(prep.penalties.pi.tolist())]
        args.dump_penalties.write_text("\n".join(rows) + "\n")
    if args.dump_candidates is not None:
        alpha = alpha_values(inst, minimum_one_tree(inst, prep.penalties))
        args.dump_candidates.write_text(init_q(inst, alpha, prep.penalties).to_csv())


def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.file, optimum=args.optimum)
    except (OSError, TSPLIBError) as exc:
        print(f"tspbench: cannot read {args.file}: {exc}", file=sys.stderr)
        return 2
    _dumps(inst, args)
    cfg = _config(args)
    if args.tour_out is not None:
        res = solve(inst, cfg.with_(rl=cfg.rl.with_(strategy=args.strategy[0])))
        args.tour_out.write_text(write_tour(inst.name, res.best_tour.order,
                                            tour_length(inst, res.best_tour)))
    reports = run_suite([inst], cfg, runs=args.runs, strategies=args.strategy,
                        jobs=args.jobs)
    _write(emit_report(reports, args.format), args.out)
    return 1 if any(r.error for r in reports) else 0


def cmd_suite(args) -> int:
    if not args.source.exists():
        print(f"tspbench: no such file or directory: {args.source}", file=sys.stderr)
        return 2
    entries = _suite_entries(args.source)
    reports = run_suite(entries, _config(args), runs=args.runs, strategies=args.strategies,
                        jobs=args.jobs)
    _write(emit_report(reports, args.format), args.out)
    return 1 if any(r.error for r in reports) else 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.runs < 1:
        print("tspbench: --runs must be at least 1", file=sys.stderr)
        return 2
    try:
        return cmd_solve(args) if args.command == "solve" else cmd_suite(args)
    except ValueError as exc:
        print(f"tspbench: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
