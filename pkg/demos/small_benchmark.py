"""
A small benchmark grid
======================

Five seeded runs per instance and strategy, summarized the way the CLI does
it. Cumulative gaps are what an ablation curve would plot.
"""
from rlkopt import SolverConfig, emit_report, run_suite
from rlkopt.bench import cumulative_gap, parse_report, summarize_gaps

names = ["ch130", "pr144", "ch150", "kroA150", "pr152", "u159"]
strategies = ["vsr", "q", "fixq", "alpha"]

# max_trials=None: one trial per city; runs stop early at the known optimum
reports = run_suite(names, SolverConfig(), runs=5, strategies=strategies)
print(emit_report(reports, "table"))

# the same rows as CSV, e.g. for a plotting tool
csv_text = emit_report(reports, "csv")
print(csv_text.splitlines()[0])
assert parse_report(csv_text, "csv") == reports

# running sum of gaps over the instances, one curve per strategy
for s in strategies:
    curve = cumulative_gap(r.gap for r in reports if r.strategy == s)
    print(f"{s:6s}", " ".join(f"{100 * g:.3f}" for g in curve))
print(summarize_gaps(reports))

# harder: fixed 30 trials on kroB150, no early stop
hard = run_suite(["kroB150"], SolverConfig(max_trials=30, stop_at_optimum=False), runs=5,
                 strategies=strategies)
print(emit_report(hard, "table"))
