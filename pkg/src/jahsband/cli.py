"""Command-line entry point.

Subcommands: ``run`` drives a full optimization and writes per-seed report
files; ``grammar count|enumerate|sample`` works a U-Net grammar directly;
``report importance|crosseval|pareto`` post-processes completed runs. Flags
override manifest-file values; the fully resolved manifest is logged next to
the outputs for provenance.

Exit codes: 0 success, 2 validation error, 3 evaluator failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analysis, configspace as cs, priorband
from .grammar import (
    InvalidStageCountError,
    build_grammar,
    count_derivations,
    default_derivation,
    enumerate_derivations,
    sample_derivation,
    serialize,
)
from .harness import (
    EvaluationFailed,
    ExternalEvaluator,
    MissingEntryError,
    SyntheticProblem,
    replay_load,
)
from .scheduler import budget_ladder

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_EVALUATOR = 3
EXIT_IO = 4

OUTPUT_ROOT_ENV = "JAHSBAND_OUT"


class ManifestError(ValueError):
    """The run manifest is incomplete or inconsistent."""


_RUN_DEFAULTS = {
    "space": None,
    "problem": "synthetic",
    "replay_file": None,
    "external_cmd": None,
    "external_timeout": 60.0,
    "mode": "regularized",
    "policy": "standard-hb",
    "eta": 3,
    "min_budget": 10,
    "max_budget": 1000,
    "seeds": [0],
    "out": None,
    "workers": 1,
    "continuation": True,
    "noise": 0.0,
    "optimum": "random",
    "problem_seed": 0,
    "curvature": 3.0,
    "hours_per_epoch": 0.002,
    "importance": False,
}


def _parse_seed_spec(spec: str) -> list[int]:
    seeds: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..")
            seeds.extend(range(int(lo), int(hi) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def _resolve_manifest(args: argparse.Namespace) -> dict:
    resolved = dict(_RUN_DEFAULTS)
    if args.manifest:
        path = Path(args.manifest)
        if not path.exists():
            raise ManifestError(f"manifest file not found: {path}")
        with open(path, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        unknown = set(loaded) - set(_RUN_DEFAULTS)
        if unknown:
            raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
        resolved.update(loaded)
    overrides = {
        "space": args.space,
        "problem": args.problem,
        "replay_file": args.replay_file,
        "external_cmd": args.external_cmd,
        "external_timeout": args.external_timeout,
        "mode": args.mode,
        "policy": args.policy,
        "eta": args.eta,
        "min_budget": args.min_budget,
        "max_budget": args.max_budget,
        "out": args.out,
        "workers": args.workers,
        "noise": args.noise,
        "optimum": args.optimum,
        "problem_seed": args.problem_seed,
        "curvature": args.curvature,
        "hours_per_epoch": args.hours_per_epoch,
    }
    for key, value in overrides.items():
        if value is not None:
            resolved[key] = value
    if args.seed:
        seeds: list[int] = []
        for spec in args.seed:
            seeds.extend(_parse_seed_spec(spec))
        resolved["seeds"] = seeds
    if args.restart:
        resolved["continuation"] = False
    if args.importance:
        resolved["importance"] = True
    if resolved["out"] is None:
        resolved["out"] = os.environ.get(OUTPUT_ROOT_ENV)

    if not resolved["space"]:
        raise ManifestError("no search space given (--space or manifest)")
    if not Path(resolved["space"]).exists():
        raise ManifestError(f"space file not found: {resolved['space']}")
    if not resolved["seeds"]:
        raise ManifestError("at least one seed required")
    if resolved["out"] is None:
        raise ManifestError(
            f"no output directory (--out, manifest, or ${OUTPUT_ROOT_ENV})"
        )
    if resolved["problem"] == "replay" and not resolved["replay_file"]:
        raise ManifestError("replay problem needs --replay-file")
    if resolved["problem"] == "external" and not resolved["external_cmd"]:
        raise ManifestError("external problem needs --external-cmd")
    return resolved


def _build_problem(manifest: dict, space: cs.SearchSpace):
    if manifest["problem"] == "synthetic":
        return SyntheticProblem.from_space(
            space,
            optimum=manifest["optimum"],
            b_max=manifest["max_budget"],
            curvature=manifest["curvature"],
            hours_per_epoch=manifest["hours_per_epoch"],
            noise=manifest["noise"],
            problem_seed=manifest["problem_seed"],
        )
    if manifest["problem"] == "replay":
        if not Path(manifest["replay_file"]).exists():
            raise ManifestError(f"replay file not found: {manifest['replay_file']}")
        return replay_load(manifest["replay_file"], space)
    return ExternalEvaluator(
        manifest["external_cmd"],
        space,
        manifest["max_budget"],
        timeout=manifest["external_timeout"],
    )


def cmd_run(args: argparse.Namespace) -> int:
    manifest = _resolve_manifest(args)
    space = cs.load_space(manifest["space"])
    ladder = budget_ladder(
        manifest["min_budget"], manifest["max_budget"], manifest["eta"]
    )
    out_root = Path(manifest["out"])
    out_root.mkdir(parents=True, exist_ok=True)

    record = dict(manifest)
    record["resolved_space"] = cs.space_to_dict(space)
    for seed in manifest["seeds"]:
        problem = _build_problem(manifest, space)
        if isinstance(problem, SyntheticProblem):
            record.setdefault("resolved_problem", problem.to_dict())
        try:
            result = priorband.run(
                space,
                problem,
                ladder,
                policy=manifest["policy"],
                mode=manifest["mode"],
                continuation=manifest["continuation"],
                seed=seed,
                workers=manifest["workers"],
            )
        finally:
            if isinstance(problem, ExternalEvaluator):
                problem.close()
        analysis.export_reports(
            result, out_root / f"seed_{seed}", importance=manifest["importance"]
        )
    with open(out_root / "manifest.resolved.json", "w", encoding="utf-8") as fh:
        json.dump(record, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return EXIT_OK


def _grammar_from_args(args: argparse.Namespace):
    blocks = {}
    for key, raw in (("conv", args.conv_blocks), ("residual", args.res_blocks),
                     ("decoder", args.dec_blocks)):
        if raw:
            blocks[key] = tuple(int(v) for v in raw.split(","))
    return build_grammar(args.stages, args.scale, blocks or None)


def cmd_grammar(args: argparse.Namespace) -> int:
    grammar = _grammar_from_args(args)
    if args.grammar_action == "count":
        print(count_derivations(grammar))
    elif args.grammar_action == "enumerate":
        for derivation in enumerate_derivations(grammar, args.limit):
            print(serialize(derivation))
    else:
        seeds = _parse_seed_spec(args.seeds)
        center = default_derivation(grammar)
        for seed in seeds:
            if args.mode == "uniform":
                derivation = sample_derivation(grammar, "uniform", seed)
            else:
                derivation = sample_derivation(
                    grammar, ("prior", center, args.confidence), seed
                )
            print(serialize(derivation))
    return EXIT_OK


def _load_run(run_dir: Path, seed_dir: str):
    manifest_path = run_dir / "manifest.resolved.json"
    if not manifest_path.exists():
        raise ManifestError(f"no manifest.resolved.json under {run_dir}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    space = cs.load_space(manifest["resolved_space"])
    ladder = budget_ladder(
        manifest["min_budget"], manifest["max_budget"], manifest["eta"]
    )
    history_path = run_dir / seed_dir / "history.csv"
    if not history_path.exists():
        raise ManifestError(f"no history at {history_path}")
    history = priorband.read_history_csv(history_path, space, ladder)
    return manifest, space, ladder, history


def cmd_report(args: argparse.Namespace) -> int:
    if args.report_action == "importance":
        _, _, _, history = _load_run(Path(args.run), args.seed_dir)
        report = analysis.fanova_first_order(
            history, trees=args.trees, seed=args.rf_seed
        )
        out = Path(args.run) / args.seed_dir / "importance.json"
        analysis.write_importance_json(report, out)
        print(out)
        return EXIT_OK

    if args.report_action == "pareto":
        _, _, _, history = _load_run(Path(args.run), args.seed_dir)
        configs = history.configurations()
        front = [(configs[cid], cost) for cid, cost in history.pareto_entries()]
        result = priorband.RunResult(
            history, priorband.final_incumbent(history), front, []
        )
        out = Path(args.run) / args.seed_dir / "pareto.json"
        analysis.write_pareto_json(result, out)
        print(out)
        return EXIT_OK

    # crosseval
    problems, incumbents, labels = [], [], []
    reference_space = None
    b_max = None
    for run_dir in args.runs:
        manifest, space, ladder, history = _load_run(Path(run_dir), args.seed_dir)
        if reference_space is None:
            reference_space = space
            b_max = ladder.b_max
        elif space.names != reference_space.names or cs.space_to_dict(
            space
        ) != cs.space_to_dict(reference_space):
            raise analysis.SpaceMismatchError(
                f"{run_dir} uses a different search space"
            )
        if manifest.get("problem") != "synthetic" or "resolved_problem" not in manifest:
            raise ManifestError(
                f"{run_dir}: cross-evaluation needs synthetic runs"
            )
        problems.append(
            SyntheticProblem.from_dict(reference_space, manifest["resolved_problem"])
        )
        incumbents.append(priorband.final_incumbent(history))
        labels.append(Path(run_dir).name)
    matrix = analysis.cross_eval(
        problems, incumbents, b_max, problem_labels=labels, incumbent_labels=labels
    )
    out = Path(args.out) if args.out else Path(args.runs[0]) / "crosseval.csv"
    analysis.write_crosseval_csv(matrix, out)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jahsband",
        description="Multi-fidelity joint hyperparameter and architecture "
        "optimization with prior-guided sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an optimization run")
    p_run.add_argument("--manifest", help="JSON manifest; flags override it")
    p_run.add_argument("--space", help="search space JSON file")
    p_run.add_argument("--problem", choices=["synthetic", "replay", "external"])
    p_run.add_argument("--replay-file")
    p_run.add_argument("--external-cmd")
    p_run.add_argument("--external-timeout", type=float)
    p_run.add_argument("--mode", choices=["priorband", "regularized"])
    p_run.add_argument("--policy", choices=["standard-hb", "as-written"])
    p_run.add_argument("--eta", type=int)
    p_run.add_argument("--min-budget", type=int)
    p_run.add_argument("--max-budget", type=int)
    p_run.add_argument(
        "--seed", action="append",
        help="seed, list (0,1,2), or range (0..19); repeatable",
    )
    p_run.add_argument("--out", help=f"output root (default ${OUTPUT_ROOT_ENV})")
    p_run.add_argument("--workers", type=int)
    p_run.add_argument("--restart", action="store_true",
                       help="restart-from-scratch cost accounting")
    p_run.add_argument("--importance", action="store_true",
                       help="also write importance.json per seed")
    p_run.add_argument("--noise", type=float)
    p_run.add_argument("--optimum", choices=["random", "default"])
    p_run.add_argument("--problem-seed", type=int)
    p_run.add_argument("--curvature", type=float)
    p_run.add_argument("--hours-per-epoch", type=float)
    p_run.set_defaults(func=cmd_run)

    p_grammar = sub.add_parser("grammar", help="U-Net grammar utilities")
    p_grammar.add_argument("grammar_action",
                           choices=["count", "enumerate", "sample"])
    p_grammar.add_argument("--stages", type=int, required=True)
    p_grammar.add_argument("--scale", type=int, default=1)
    p_grammar.add_argument("--conv-blocks")
    p_grammar.add_argument("--res-blocks")
    p_grammar.add_argument("--dec-blocks")
    p_grammar.add_argument("--limit", type=int, default=None)
    p_grammar.add_argument("--mode", choices=["uniform", "prior"],
                           default="uniform")
    p_grammar.add_argument("--confidence",
                           choices=["low", "medium", "high"], default="medium")
    p_grammar.add_argument("--seeds", default="0",
                           help="seed, list (0,1,2), or range (0..999)")
    p_grammar.set_defaults(func=cmd_grammar)

    p_report = sub.add_parser("report", help="post-hoc reports")
    p_report.add_argument("report_action",
                          choices=["importance", "crosseval", "pareto"])
    p_report.add_argument("--run", help="run directory (importance/pareto)")
    p_report.add_argument("--runs", nargs="+", default=[],
                          help="run directories (crosseval)")
    p_report.add_argument("--seed-dir", default="seed_0")
    p_report.add_argument("--trees", type=int, default=32)
    p_report.add_argument("--rf-seed", type=int, default=0)
    p_report.add_argument("--out")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "report":
        if args.report_action in ("importance", "pareto") and not args.run:
            parser.error("--run is required")
        if args.report_action == "crosseval" and not args.runs:
            parser.error("--runs is required")
    try:
        return args.func(args)
    except (ManifestError, cs.SpaceError, InvalidStageCountError,
            analysis.SpaceMismatchError, analysis.InsufficientDataError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (EvaluationFailed, MissingEntryError) as exc:
        print(f"evaluator error: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
