"""Post-hoc analysis of run histories.

Hyperparameter importance follows the functional-ANOVA recipe: fit a random
forest on (normalized configuration -> primary cost), then for each tree
compute every parameter's first-order marginal variance exactly from the
tree's leaf partition, and report marginal variance over total variance,
averaged across trees. The forest is built in-package because categorical
parameters need genuine subset splits (ordered-by-mean, the optimal binary
partition for regression), which threshold-only tree libraries cannot
express.

Cross-evaluation matrices replay incumbent configurations across problems at
the top budget, noise-free.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .configspace import CATEGORICAL, Configuration
from .grammar import serialize as serialize_derivation
from .harness import ARCH_BLOCKS, ARCH_STAGES, _arch_coords
from .priorband import RunHistory, RunResult, write_history_csv


class InsufficientDataError(ValueError):
    """Too few distinct configurations to fit anything."""


class SpaceMismatchError(ValueError):
    """Cross-evaluation inputs do not share one search space."""


@dataclass(frozen=True)
class ImportanceReport:
    """Per-parameter importance fraction and its variance across trees."""

    importances: dict[str, float]
    variances: dict[str, float]

    def to_dict(self) -> dict[str, dict[str, float]]:
        return {
            name: {
                "importance": self.importances[name],
                "variance": self.variances[name],
            }
            for name in self.importances
        }


# forest internals

_LEAF = 0
_NUMERIC_SPLIT = 1
_CATEGORICAL_SPLIT = 2


class _Node:
    __slots__ = ("kind", "feature", "threshold", "subset", "left", "right", "value")

    def __init__(self, kind, feature=-1, threshold=0.0, subset=None,
                 left=None, right=None, value=0.0):
        self.kind = kind
        self.feature = feature
        self.threshold = threshold
        self.subset = subset  # categories routed left
        self.left = left
        self.right = right
        self.value = value


def _best_numeric_split(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(gain, threshold) of the best binary split on a numeric column."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    boundaries = np.flatnonzero(np.diff(xs) > 0) + 1
    if boundaries.size == 0:
        return 0.0, 0.0
    csum = np.cumsum(ys)
    total = csum[-1]
    n = len(ys)
    nl = boundaries
    left = csum[boundaries - 1]
    gains = left**2 / nl + (total - left) ** 2 / (n - nl) - total**2 / n
    best = int(np.argmax(gains))
    threshold = 0.5 * (xs[boundaries[best] - 1] + xs[boundaries[best]])
    return float(gains[best]), float(threshold)


def _best_categorical_split(
    x: np.ndarray, y: np.ndarray
) -> tuple[float, frozenset[int]]:
    """(gain, left-subset) of the best subset split; categories are ordered
    by mean response, which is optimal for squared error."""
    cats = np.unique(x)
    if cats.size < 2:
        return 0.0, frozenset()
    means = np.array([y[x == c].mean() for c in cats])
    order = np.argsort(means, kind="stable")
    counts = np.array([(x == c).sum() for c in cats])[order]
    sums = np.array([y[x == c].sum() for c in cats])[order]
    csum = np.cumsum(sums)
    ccnt = np.cumsum(counts)
    total, n = csum[-1], ccnt[-1]
    best_gain, best_cut = 0.0, 0
    for cut in range(1, cats.size):
        nl = ccnt[cut - 1]
        left = csum[cut - 1]
        gain = left**2 / nl + (total - left) ** 2 / (n - nl) - total**2 / n
        if gain > best_gain:
            best_gain, best_cut = float(gain), cut
    subset = frozenset(int(cats[i]) for i in order[:best_cut])
    return best_gain, subset


def _fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    categorical: dict[int, int],
    max_depth: int,
    n_candidates: int,
    rng: np.random.Generator,
) -> _Node:
    d = X.shape[1]

    def build(idx: np.ndarray, depth: int) -> _Node:
        ys = y[idx]
        node_value = float(ys.mean())
        if depth >= max_depth or idx.size < 2 or np.ptp(ys) == 0.0:
            return _Node(_LEAF, value=node_value)
        features = rng.choice(d, size=min(n_candidates, d), replace=False)
        best_gain, best = 1e-12, None
        for f in features:
            col = X[idx, f]
            if f in categorical:
                gain, subset = _best_categorical_split(col, ys)
                if gain > best_gain:
                    best_gain, best = gain, (_CATEGORICAL_SPLIT, f, subset)
            else:
                gain, threshold = _best_numeric_split(col, ys)
                if gain > best_gain:
                    best_gain, best = gain, (_NUMERIC_SPLIT, f, threshold)
        if best is None:
            return _Node(_LEAF, value=node_value)
        kind, f, where = best
        if kind == _NUMERIC_SPLIT:
            mask = X[idx, f] <= where
        else:
            mask = np.isin(X[idx, f], list(where))
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        if kind == _NUMERIC_SPLIT:
            return _Node(kind, f, threshold=where, left=left, right=right)
        return _Node(kind, f, subset=where, left=left, right=right)

    return build(np.arange(len(y)), 0)


def _collect_leaves(
    root: _Node, d: int, categorical: dict[int, int]
) -> list[tuple[list, float]]:
    """(box, value) per leaf: a box holds one [lo, hi) interval per numeric
    feature and one category set per categorical feature."""
    initial: list = [
        set(range(categorical[f])) if f in categorical else (0.0, 1.0)
        for f in range(d)
    ]
    leaves: list[tuple[list, float]] = []

    def walk(node: _Node, box: list) -> None:
        if node.kind == _LEAF:
            leaves.append(([b.copy() if isinstance(b, set) else b for b in box],
                           node.value))
            return
        f = node.feature
        saved = box[f]
        if node.kind == _NUMERIC_SPLIT:
            lo, hi = saved
            box[f] = (lo, min(hi, node.threshold))
            walk(node.left, box)
            box[f] = (max(lo, node.threshold), hi)
            walk(node.right, box)
        else:
            box[f] = saved & node.subset
            walk(node.left, box)
            box[f] = saved - node.subset
            walk(node.right, box)
        box[f] = saved

    walk(root, initial)
    return leaves


def _tree_marginal_variances(
    root: _Node, d: int, categorical: dict[int, int]
) -> tuple[float, np.ndarray]:
    """Total variance of the tree's function under the uniform measure, and
    each feature's first-order marginal variance."""
    leaves = _collect_leaves(root, d, categorical)
    values = np.array([v for _, v in leaves])
    sizes = np.empty((len(leaves), d))
    for li, (box, _) in enumerate(leaves):
        for f in range(d):
            if f in categorical:
                sizes[li, f] = len(box[f]) / categorical[f]
            else:
                lo, hi = box[f]
                sizes[li, f] = max(hi - lo, 0.0)
    volumes = sizes.prod(axis=1)
    mean = float(volumes @ values)
    total_var = float(volumes @ values**2) - mean**2

    marginals = np.zeros(d)
    for f in range(d):
        with np.errstate(divide="ignore", invalid="ignore"):
            weights = np.where(sizes[:, f] > 0, volumes / sizes[:, f], 0.0)
        wv = weights * values
        if f in categorical:
            k = categorical[f]
            member = np.zeros((len(leaves), k), dtype=bool)
            for li, (box, _) in enumerate(leaves):
                member[li, list(box[f])] = True
            m = wv @ member
            marginals[f] = float(np.mean((m - mean) ** 2))
        else:
            points = sorted(
                {0.0, 1.0}
                | {box[f][0] for box, _ in leaves}
                | {box[f][1] for box, _ in leaves}
            )
            edges = np.array(points)
            mids = 0.5 * (edges[:-1] + edges[1:])
            lengths = np.diff(edges)
            los = np.array([box[f][0] for box, _ in leaves])
            his = np.array([box[f][1] for box, _ in leaves])
            cover = (los[:, None] <= mids[None, :]) & (mids[None, :] < his[:, None])
            m = wv @ cover
            marginals[f] = float(lengths @ (m - mean) ** 2)
    return total_var, marginals


def _history_matrix(
    history: RunHistory,
) -> tuple[np.ndarray, np.ndarray, list[str], dict[int, int]]:
    """Feature matrix, targets, column names, and categorical column sizes
    from per-configuration highest-budget costs."""
    space = history.space
    entries = history.costs_at_highest_budget()
    configs = history.configurations()
    names = list(space.names)
    categorical: dict[int, int] = {
        i: s.n_choices
        for i, s in enumerate(space.parameters)
        if s.kind == CATEGORICAL
    }
    with_arch = space.grammar is not None
    if with_arch:
        names += [ARCH_STAGES, ARCH_BLOCKS]
    rows, ys = [], []
    for cid, cost in entries:
        config = configs[cid]
        row = [space[n].to_unit(config.assignments[n]) for n in space.names]
        if with_arch:
            coords = _arch_coords(space, config)
            row += [coords[ARCH_STAGES], coords[ARCH_BLOCKS]]
        rows.append(row)
        ys.append(cost.primary)
    X = np.array(rows, dtype=float)
    y = np.array(ys, dtype=float)
    return X, y, names, categorical


def fanova_first_order(
    history: RunHistory,
    trees: int = 32,
    seed: int = 0,
    max_depth: int = 12,
) -> ImportanceReport:
    """First-order importance of every parameter over a run history.

    Costs are taken at each configuration's highest completed budget. A
    constant objective yields all-zero importances. Raises
    :class:`InsufficientDataError` below two distinct configurations.
    """
    if trees < 1:
        raise ValueError("need at least one tree")
    X, y, names, categorical = _history_matrix(history)
    if len(y) < 2 or len({tuple(r) for r in X.tolist()}) < 2:
        raise InsufficientDataError("need >= 2 distinct configurations")
    d = X.shape[1]
    if np.ptp(y) == 0.0:
        zeros = {n: 0.0 for n in names}
        return ImportanceReport(dict(zeros), dict(zeros))

    rng = np.random.default_rng(seed)
    n_candidates = max(1, math.ceil(math.sqrt(d)))
    fractions = np.zeros((trees, d))
    used = np.zeros(trees, dtype=bool)
    for t in range(trees):
        bootstrap = rng.integers(len(y), size=len(y))
        root = _fit_tree(
            X[bootstrap], y[bootstrap], categorical, max_depth, n_candidates, rng
        )
        total_var, marginals = _tree_marginal_variances(root, d, categorical)
        if total_var > 0.0:
            fractions[t] = marginals / total_var
            used[t] = True
    if not used.any():
        zeros = {n: 0.0 for n in names}
        return ImportanceReport(dict(zeros), dict(zeros))
    mean = fractions[used].mean(axis=0)
    var = fractions[used].var(axis=0)
    return ImportanceReport(
        {n: float(mean[i]) for i, n in enumerate(names)},
        {n: float(var[i]) for i, n in enumerate(names)},
    )


@dataclass(frozen=True)
class CrossEvalMatrix:
    """cells[i, j] = primary cost of incumbent j evaluated on problem i at
    the top budget; column_means[j] averages incumbent j across problems."""

    problem_labels: tuple[str, ...]
    incumbent_labels: tuple[str, ...]
    cells: np.ndarray
    column_means: np.ndarray


def cross_eval(
    problems: list,
    incumbents: list[Configuration],
    b_max: int,
    problem_labels: list[str] | None = None,
    incumbent_labels: list[str] | None = None,
) -> CrossEvalMatrix:
    """Evaluate every incumbent on every problem at the top budget,
    noise-free. All problems must share one search space."""
    if not problems or not incumbents:
        raise ValueError("need at least one problem and one incumbent")
    reference = problems[0].space
    for problem in problems:
        if problem.space.names != reference.names:
            raise SpaceMismatchError("problems use different search spaces")
    for incumbent in incumbents:
        try:
            reference.validate(incumbent)
        except Exception as exc:
            raise SpaceMismatchError(f"incumbent invalid for shared space: {exc}")
    cells = np.empty((len(problems), len(incumbents)))
    for i, problem in enumerate(problems):
        noise_free = problem.without_noise() if hasattr(problem, "without_noise") else problem
        for j, incumbent in enumerate(incumbents):
            cells[i, j] = noise_free.evaluate(incumbent, b_max).primary
    return CrossEvalMatrix(
        tuple(problem_labels or [f"problem_{i}" for i in range(len(problems))]),
        tuple(incumbent_labels or [f"incumbent_{j}" for j in range(len(incumbents))]),
        cells,
        cells.mean(axis=0),
    )


def write_crosseval_csv(matrix: CrossEvalMatrix, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["problem"] + list(matrix.incumbent_labels))
        for i, label in enumerate(matrix.problem_labels):
            writer.writerow([label] + [repr(v) for v in matrix.cells[i]])
        writer.writerow(["mean"] + [repr(v) for v in matrix.column_means])


# report export

def _pareto_payload(result: RunResult) -> dict:
    points = []
    for config, cost in result.pareto_front:
        points.append(
            {
                "config": config.assignments,
                "architecture": serialize_derivation(config.derivation)
                if config.derivation is not None
                else None,
                "primary": cost.primary,
                "runtime_hours": cost.runtime_hours,
            }
        )
    return {"points": points}


def write_pareto_json(result: RunResult, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_pareto_payload(result), fh, sort_keys=True, indent=2)
        fh.write("\n")


def write_incumbent_trajectory(history: RunHistory, path: str | Path) -> None:
    """Charged epochs (continuation-aware, cumulative) against the best
    primary cost seen at the top budget so far; one row per trial."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trial", "charged_epochs", "incumbent_primary"])
        charged = 0
        best: float | None = None
        for i, t in enumerate(history.trials):
            charged += t.charged_epochs
            if t.status == "ok" and t.cost is not None and t.budget == history.b_max:
                best = t.cost.primary if best is None else min(best, t.cost.primary)
            writer.writerow([i, charged, repr(best) if best is not None else ""])


def write_importance_json(report: ImportanceReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")


def export_reports(
    result: RunResult,
    out_dir: str | Path,
    importance: bool = False,
    trees: int = 32,
    seed: int = 0,
) -> list[Path]:
    """Write history.csv, pareto.json, and incumbent_trajectory.csv (plus
    importance.json on request) under out_dir; byte-stable given identical
    inputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    history_path = out / "history.csv"
    write_history_csv(result.history, history_path)
    written.append(history_path)
    pareto_path = out / "pareto.json"
    write_pareto_json(result, pareto_path)
    written.append(pareto_path)
    trajectory_path = out / "incumbent_trajectory.csv"
    write_incumbent_trajectory(result.history, trajectory_path)
    written.append(trajectory_path)
    if importance:
        report = fanova_first_order(result.history, trees=trees, seed=seed)
        importance_path = out / "importance.json"
        write_importance_json(report, importance_path)
        written.append(importance_path)
    return written
