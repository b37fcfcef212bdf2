import json

import numpy as np
import pytest

import jahsband as jb
from jahsband import configspace as cs
from jahsband.analysis import (
    InsufficientDataError,
    SpaceMismatchError,
    cross_eval,
    export_reports,
    fanova_first_order,
    write_crosseval_csv,
)
from jahsband.harness import SyntheticProblem
from jahsband.moo import CostVector, dominates

from conftest import float_space, history_from_table


def grid_history(fn, n=32, names=("x", "y")):
    space = cs.build_space([
        cs.ParameterSpec(name, "float", lo=0.0, hi=1.0, default=0.5)
        for name in names
    ])
    rows = []
    for xv in np.linspace(0, 1, n):
        for yv in np.linspace(0, 1, n):
            config = cs.Configuration({names[0]: float(xv), names[1]: float(yv)})
            rows.append((config, float(fn(xv, yv)), 1.0))
    return history_from_table(space, rows)


class TestFanova:
    def test_single_variable_function(self):
        report = fanova_first_order(grid_history(lambda x, y: x), trees=32, seed=0)
        assert report.importances["x"] >= 0.9
        assert report.importances["y"] <= 0.05

    def test_additive_function_splits_evenly(self):
        report = fanova_first_order(
            grid_history(lambda x, y: x + y), trees=32, seed=0
        )
        assert 0.4 <= report.importances["x"] <= 0.6
        assert 0.4 <= report.importances["y"] <= 0.6

    def test_constant_objective_all_zero(self):
        report = fanova_first_order(
            grid_history(lambda x, y: 0.7, n=8), trees=8, seed=0
        )
        assert set(report.importances.values()) == {0.0}

    def test_insufficient_data(self):
        space = float_space(2)
        history = history_from_table(
            space, [(cs.Configuration({"p0": 0.5, "p1": 0.5}), 0.3, 1.0)]
        )
        with pytest.raises(InsufficientDataError):
            fanova_first_order(history, trees=4, seed=0)

    def test_affine_rescaling_invariance(self):
        base = fanova_first_order(grid_history(lambda x, y: x + 0.2 * y,
                                               n=16), trees=16, seed=0)
        scaled = fanova_first_order(
            grid_history(lambda x, y: 40.0 * (x + 0.2 * y) - 7.0, n=16),
            trees=16, seed=0,
        )
        for name in ("x", "y"):
            assert abs(base.importances[name] - scaled.importances[name]) <= 0.05

    def test_first_order_sum_below_one(self, rng):
        for _ in range(10):
            coeffs = rng.uniform(-1, 1, size=3)
            report = fanova_first_order(
                grid_history(
                    lambda x, y: coeffs[0] * x + coeffs[1] * y
                    + coeffs[2] * x * y,
                    n=16,
                ),
                trees=16,
                seed=int(rng.integers(1000)),
            )
            assert sum(report.importances.values()) <= 1.0 + 1e-9

    def test_categorical_effect_detected(self):
        space = cs.build_space([
            cs.ParameterSpec("c", "categorical", values=("a", "b", "c"),
                             default="a"),
            cs.ParameterSpec("z", "float", lo=0.0, hi=1.0, default=0.5),
        ])
        effect = {"a": 0.0, "b": 0.5, "c": 1.0}
        rows = []
        rng = np.random.default_rng(0)
        for _ in range(400):
            cat = ("a", "b", "c")[int(rng.integers(3))]
            zv = float(rng.uniform())
            rows.append(
                (cs.Configuration({"c": cat, "z": zv}), effect[cat], 1.0)
            )
        report = fanova_first_order(history_from_table(space, rows),
                                    trees=16, seed=0)
        assert report.importances["c"] > 0.8
        assert report.importances["z"] < 0.1

    def test_variance_across_trees_reported(self):
        report = fanova_first_order(grid_history(lambda x, y: x), trees=16,
                                    seed=0)
        assert set(report.variances) == set(report.importances)
        assert all(v >= 0 for v in report.variances.values())


class TestCrossEval:
    def make_problems(self):
        space = float_space(3)
        p1 = SyntheticProblem.from_space(
            space, optimum={f"p{i}": 0.1 for i in range(3)}, b_max=100)
        p2 = SyntheticProblem.from_space(
            space, optimum={f"p{i}": 0.9 for i in range(3)}, b_max=100)
        inc1 = cs.Configuration({f"p{i}": 0.1 for i in range(3)})
        inc2 = cs.Configuration({f"p{i}": 0.9 for i in range(3)})
        return space, [p1, p2], [inc1, inc2]

    def test_one_by_one(self):
        space, problems, incumbents = self.make_problems()
        matrix = cross_eval(problems[:1], incumbents[:1], 100)
        assert matrix.cells.shape == (1, 1)
        assert matrix.column_means[0] == matrix.cells[0, 0]

    def test_diagonal_advantage(self):
        _, problems, incumbents = self.make_problems()
        matrix = cross_eval(problems, incumbents, 100)
        assert matrix.cells[0, 0] < matrix.cells[0, 1]
        assert matrix.cells[1, 1] < matrix.cells[1, 0]

    def test_diagonal_matches_direct_evaluation(self):
        _, problems, incumbents = self.make_problems()
        matrix = cross_eval(problems, incumbents, 100)
        direct = problems[0].evaluate(incumbents[0], 100).primary
        assert matrix.cells[0, 0] == direct

    def test_noise_disabled(self):
        space, _, incumbents = self.make_problems()
        noisy = SyntheticProblem.from_space(
            space, optimum={f"p{i}": 0.1 for i in range(3)}, b_max=100,
            noise=0.5)
        a = cross_eval([noisy], incumbents[:1], 100)
        b = cross_eval([noisy], incumbents[:1], 100)
        assert a.cells[0, 0] == b.cells[0, 0]
        assert a.cells[0, 0] == pytest.approx(0.0)

    def test_space_mismatch(self):
        space, problems, incumbents = self.make_problems()
        other_space = float_space(2)
        p_other = SyntheticProblem.from_space(other_space, optimum={"p0": 0.5},
                                              b_max=100)
        with pytest.raises(SpaceMismatchError):
            cross_eval([problems[0], p_other], incumbents, 100)

    def test_csv_has_mean_row(self, tmp_path):
        _, problems, incumbents = self.make_problems()
        matrix = cross_eval(problems, incumbents, 100,
                            problem_labels=["p1", "p2"],
                            incumbent_labels=["i1", "i2"])
        path = tmp_path / "crosseval.csv"
        write_crosseval_csv(matrix, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "problem,i1,i2"
        assert len(lines) == 4
        assert lines[-1].startswith("mean,")


class TestExports:
    def run_small(self, seed=0):
        space = float_space(3)
        problem = SyntheticProblem.from_space(
            space, optimum={f"p{i}": 0.25 for i in range(3)},
            b_max=27, size_parameters=("p2",))
        ladder = jb.budget_ladder(1, 27, 3)
        return jb.run(space, problem, ladder, seed=seed)

    def test_byte_stable(self, tmp_path):
        result = self.run_small()
        first = export_reports(result, tmp_path / "a")
        second = export_reports(result, tmp_path / "b")
        for f1, f2 in zip(first, second):
            assert f1.read_bytes() == f2.read_bytes()

    def test_trajectory_non_increasing(self, tmp_path):
        result = self.run_small(seed=3)
        export_reports(result, tmp_path)
        lines = (tmp_path / "incumbent_trajectory.csv").read_text().splitlines()[1:]
        values = [float(l.split(",")[2]) for l in lines if l.split(",")[2]]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_pareto_points_mutually_non_dominated(self, tmp_path):
        result = self.run_small(seed=5)
        export_reports(result, tmp_path)
        payload = json.loads((tmp_path / "pareto.json").read_text())
        points = [
            CostVector(p["primary"], p["runtime_hours"])
            for p in payload["points"]
        ]
        assert points
        for i, a in enumerate(points):
            for j, b in enumerate(points):
                if i != j:
                    assert not dominates(a, b)

    def test_importance_included_on_request(self, tmp_path):
        result = self.run_small(seed=1)
        files = export_reports(result, tmp_path, importance=True, trees=8)
        assert (tmp_path / "importance.json").exists()
        payload = json.loads((tmp_path / "importance.json").read_text())
        assert set(payload) == {"p0", "p1", "p2"}
