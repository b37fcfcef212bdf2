import json
from pathlib import Path


from jahsband import grammar as hg
from jahsband.cli import main

SPACES_DIR = Path(__file__).resolve().parents[1] / "spaces"
SPACE = str(SPACES_DIR / "jahs_table3_4.json")


def run_cli(*argv):
    return main(list(argv))


def small_run_args(out, seed="0", space=SPACE):
    return [
        "run", "--space", space, "--problem", "synthetic",
        "--mode", "regularized", "--eta", "3",
        "--min-budget", "3", "--max-budget", "27",
        "--seed", seed, "--out", str(out),
    ]


class TestRun:
    def test_produces_artifacts(self, tmp_path):
        out = tmp_path / "results"
        assert run_cli(*small_run_args(out)) == 0
        seed_dir = out / "seed_0"
        for name in ("history.csv", "pareto.json", "incumbent_trajectory.csv"):
            assert (seed_dir / name).exists()
        assert (out / "manifest.resolved.json").exists()

    def test_idempotent_artifacts(self, tmp_path):
        out = tmp_path / "a"
        assert run_cli(*small_run_args(out)) == 0
        names = ("history.csv", "pareto.json", "incumbent_trajectory.csv")
        snapshot = {n: (out / "seed_0" / n).read_bytes() for n in names}
        snapshot["manifest"] = (out / "manifest.resolved.json").read_bytes()
        assert run_cli(*small_run_args(out)) == 0
        for n in names:
            assert (out / "seed_0" / n).read_bytes() == snapshot[n]
        assert (out / "manifest.resolved.json").read_bytes() == snapshot["manifest"]
        # a different output root still yields identical report artifacts
        other = tmp_path / "b"
        assert run_cli(*small_run_args(other)) == 0
        for n in names:
            assert (other / "seed_0" / n).read_bytes() == snapshot[n]

    def test_missing_space_file(self, tmp_path, capsys):
        rc = run_cli("run", "--space", "does-not-exist.json",
                     "--out", str(tmp_path))
        assert rc == 2
        assert "does-not-exist.json" in capsys.readouterr().err

    def test_multi_seed_range(self, tmp_path):
        out = tmp_path / "multi"
        assert run_cli(*small_run_args(out, seed="0..2")) == 0
        assert sorted(p.name for p in out.glob("seed_*")) == [
            "seed_0", "seed_1", "seed_2",
        ]

    def test_manifest_file_with_flag_override(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        manifest.write_text(json.dumps({
            "space": SPACE,
            "min_budget": 3,
            "max_budget": 27,
            "seeds": [7],
            "out": str(tmp_path / "from-manifest"),
        }))
        out = tmp_path / "overridden"
        assert run_cli("run", "--manifest", str(manifest),
                       "--out", str(out)) == 0
        resolved = json.loads((out / "manifest.resolved.json").read_text())
        assert resolved["out"] == str(out)
        assert resolved["seeds"] == [7]
        assert (out / "seed_7" / "history.csv").exists()

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("JAHSBAND_OUT", str(tmp_path / "env-root"))
        args = small_run_args(tmp_path)[:-2]  # drop --out
        assert run_cli(*args) == 0
        assert (tmp_path / "env-root" / "seed_0" / "history.csv").exists()

    def test_evaluator_spawn_failure_exit_3(self, tmp_path, capsys):
        rc = run_cli("run", "--space", SPACE, "--problem", "external",
                     "--external-cmd", "/no/such/evaluator",
                     "--min-budget", "3", "--max-budget", "27",
                     "--out", str(tmp_path))
        assert rc == 3

    def test_unwritable_output_exit_4(self, tmp_path, capsys):
        blocker = tmp_path / "occupied"
        blocker.write_text("a file, not a directory")
        rc = run_cli(*small_run_args(blocker / "nested"))
        assert rc == 4

    def test_replay_problem(self, tmp_path):
        out = tmp_path / "base"
        assert run_cli(*small_run_args(out)) == 0
        # build a replay table from the recorded history, then re-run
        from jahsband import configspace as cs, priorband, harness
        from jahsband.scheduler import budget_ladder

        space = cs.load_space(SPACE)
        ladder = budget_ladder(3, 27, 3)
        history = priorband.read_history_csv(
            out / "seed_0" / "history.csv", space, ladder)
        table = tmp_path / "table.csv"
        harness.replay_save(history.trials, table)
        out2 = tmp_path / "replayed"
        assert run_cli("run", "--space", SPACE, "--problem", "replay",
                       "--replay-file", str(table), "--eta", "3",
                       "--min-budget", "3", "--max-budget", "27",
                       "--seed", "0", "--out", str(out2)) == 0
        assert (out / "seed_0" / "history.csv").read_bytes() == (
            out2 / "seed_0" / "history.csv").read_bytes()


class TestGrammarCommand:
    def test_count_reference(self, capsys):
        assert run_cli("grammar", "count", "--stages", "4", "--scale", "1") == 0
        assert capsys.readouterr().out.strip() == "319200"

    def test_enumerate_limit(self, capsys):
        assert run_cli("grammar", "enumerate", "--stages", "2",
                       "--limit", "5") == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == len(set(lines)) == 5
        g = hg.build_grammar(2, 1)
        for line in lines:
            hg.parse(g, line)

    def test_sample_prior_mode_prints_per_seed(self, capsys):
        assert run_cli("grammar", "sample", "--stages", "4", "--scale", "2",
                       "--mode", "prior", "--confidence", "high",
                       "--seeds", "0..999") == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1000
        g = hg.build_grammar(4, 2)
        default = hg.serialize(hg.default_derivation(g))
        from collections import Counter

        assert Counter(lines).most_common(1)[0][0] == default

    def test_invalid_stage_count(self, capsys):
        assert run_cli("grammar", "count", "--stages", "1") == 2


class TestReportCommand:
    def make_run(self, tmp_path, problem_seed="0"):
        out = tmp_path / f"run{problem_seed}"
        args = small_run_args(out) + ["--problem-seed", problem_seed]
        assert run_cli(*args) == 0
        return out

    def test_importance(self, tmp_path, capsys):
        out = self.make_run(tmp_path)
        assert run_cli("report", "importance", "--run", str(out),
                       "--trees", "8") == 0
        payload = json.loads((out / "seed_0" / "importance.json").read_text())
        from jahsband import configspace as cs

        space = cs.load_space(SPACE)
        for name in space.names:
            assert name in payload
            assert set(payload[name]) == {"importance", "variance"}

    def test_pareto(self, tmp_path):
        out = self.make_run(tmp_path)
        original = (out / "seed_0" / "pareto.json").read_bytes()
        assert run_cli("report", "pareto", "--run", str(out)) == 0
        assert (out / "seed_0" / "pareto.json").read_bytes() == original

    def test_crosseval_3x3(self, tmp_path):
        runs = [self.make_run(tmp_path, s) for s in ("0", "1", "2")]
        target = tmp_path / "crosseval.csv"
        assert run_cli("report", "crosseval",
                       "--runs", *map(str, runs), "--out", str(target)) == 0
        lines = target.read_text().strip().splitlines()
        assert len(lines) == 5  # header + 3 rows + mean
        assert lines[-1].startswith("mean,")
        assert len(lines[0].split(",")) == 4

    def test_crosseval_space_mismatch(self, tmp_path, capsys):
        run_a = self.make_run(tmp_path)
        out_b = tmp_path / "other"
        assert run_cli("run", "--space", str(SPACES_DIR / "hnas_grammar.json"),
                       "--problem", "synthetic", "--min-budget", "3",
                       "--max-budget", "27", "--seed", "0",
                       "--out", str(out_b)) == 0
        rc = run_cli("report", "crosseval", "--runs", str(run_a), str(out_b))
        assert rc == 2

    def test_missing_run_dir(self, tmp_path):
        assert run_cli("report", "importance",
                       "--run", str(tmp_path / "nope")) == 2
