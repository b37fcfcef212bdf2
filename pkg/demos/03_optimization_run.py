#!/usr/bin/env python3
"""Run the full optimizer on a synthetic problem and export reports.

The synthetic problem hides an optimum in normalized space; quality follows
a Gaussian bump around it, scaled by a saturating learning curve in the
epoch budget. Runtime grows with the budget and with capacity-like
parameters, so accuracy and runtime genuinely trade off.
"""

import tempfile
from pathlib import Path

from jahsband import (
    Configuration,
    ParameterSpec,
    SyntheticProblem,
    budget_ladder,
    build_space,
    export_reports,
    run,
)

space = build_space([
    ParameterSpec("learning_rate", "log_float", lo=1e-5, hi=0.1, default=1e-2),
    ParameterSpec("momentum", "float", lo=0.5, hi=0.999, default=0.99),
    ParameterSpec("width", "float", lo=0.0, hi=1.0, default=0.25),
])

problem = SyntheticProblem.from_space(
    space,
    optimum={"learning_rate": 0.6, "momentum": 0.4, "width": 0.8},
    b_max=243,
    size_parameters=("width",),  # wider models train slower
)

ladder = budget_ladder(1, 243, 3)
print("rung budgets:", ladder.rung_budgets)

result = run(space, problem, ladder, policy="standard-hb",
             mode="regularized", continuation=True, seed=0)

print("trials recorded:", len(result.history.trials))
print("configurations sampled:", len({t.config_id for t in result.history.trials}))
print()

print("per-bracket sampling weights (random / prior / incumbent):")
for s, w in result.weight_traces:
    print(f"  bracket s={s}: {w.random:.3f} / {w.prior:.3f} / {w.incumbent:.3f}")
print()

print("Pareto front at the highest completed budgets:")
for config, cost in result.pareto_front:
    print(f"  gap={cost.primary:.4f}  runtime={cost.runtime_hours:.3f}h "
          f" width={config['width']:.3f}")

inc: Configuration = result.final_incumbent
print()
print("final incumbent (accuracy only):", inc.assignments)

out = Path(tempfile.mkdtemp()) / "demo_run"
files = export_reports(result, out, importance=True, trees=16)
print()
print("reports written:")
for f in files:
    print(" ", f)
