#!/usr/bin/env python3
"""Attach a real trainer through the line protocol.

The optimizer talks to a child process over stdin/stdout, one JSON object
per line. This demo spawns a toy evaluator (written to a temp file) that
scores configurations by how close the learning rate is to 1e-3; a real
setup would launch actual training and report validation quality and
wallclock hours. previous_budget tells the evaluator it may resume from an
earlier checkpoint instead of retraining from scratch.
"""

import sys
import tempfile
from pathlib import Path

from jahsband import (
    ExternalEvaluator,
    ParameterSpec,
    budget_ladder,
    build_space,
    run,
)

EVALUATOR = '''
import json
import math
import sys

for line in sys.stdin:
    request = json.loads(line)
    lr = request["config"]["learning_rate"]
    budget = request["budget"]
    gap = abs(math.log10(lr) - math.log10(1e-3)) / 4.0
    primary = min(1.0, gap + 0.5 / budget)
    response = {
        "id": request["id"],
        "status": "ok",
        "objectives": {"primary": primary, "runtime_hours": budget * 0.01},
    }
    print(json.dumps(response), flush=True)
'''

space = build_space([
    ParameterSpec("learning_rate", "log_float", lo=1e-5, hi=0.1, default=1e-2),
])
ladder = budget_ladder(1, 27, 3)

script = Path(tempfile.mkdtemp()) / "toy_evaluator.py"
script.write_text(EVALUATOR)

with ExternalEvaluator([sys.executable, str(script)], space,
                       b_max=ladder.b_max, timeout=30.0) as evaluator:
    result = run(space, evaluator, ladder, seed=0)

print("trials:", len(result.history.trials))
print("best learning rate found:",
      result.final_incumbent["learning_rate"])
