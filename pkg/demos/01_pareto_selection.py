#!/usr/bin/env python3
"""Walk through the multi-objective building blocks.

Five candidate configurations, each with a quality gap (lower is better) and
a training runtime in hours. We sort them into fronts, measure diversity via
crowding distance, promote the two best under the diversity-aware rule, and
pick the local-search incumbent by normalized objective area.
"""

from jahsband import (
    CostVector,
    area_incumbent,
    crowding_distance,
    non_dominated_sort,
    select_top_k,
)

points = [
    CostVector(0.10, 9.0),   # most accurate, slowest
    CostVector(0.20, 5.0),
    CostVector(0.30, 3.0),
    CostVector(0.15, 10.0),  # dominated by the first point
    CostVector(0.40, 2.0),   # least accurate, fastest
]

fronts = non_dominated_sort(points)
print("fronts (indices):", fronts)

first_front = [points[i] for i in fronts[0]]
print("crowding distances on the first front:", crowding_distance(first_front))

# Promotion keeps boundary (diverse) solutions first; the most accurate
# point is always among the survivors, whatever k is.
for k in (1, 2, 4):
    print(f"top-{k} promoted:", select_top_k(points, k))

# The sampling incumbent balances both objectives: normalize each objective
# over the front, then maximize (1 - quality_gap) * (1 - runtime).
idx = area_incumbent(first_front)
print("area incumbent within first front:", first_front[idx])
