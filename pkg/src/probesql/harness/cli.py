"""Command-line interface: run, ablate, eval, export-sft."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from ..catalog import load_dataset
from ..errors import ProbeSqlError
from ..llm import Cassette, HttpBackend, LlmClient
from .ablation import ablate
from .evaluate import combined_table, evaluate, write_report
from .pipeline import DISABLE_FLAGS, PipelineConfig, Trajectory, WorldContext, validate_flags
from .runner import read_trajectories, run_batch, write_trajectories
from .sft import export_sft


def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", required=True, help="dataset root directory")
    parser.add_argument("--split", required=True, help="split name (file stem)")


def _add_client_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=("live", "record", "replay"),
                        default="replay")
    parser.add_argument("--cassette", help="cassette file (record/replay modes)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probesql",
        description="Probe-driven text-to-SQL pipeline and evaluation harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the pipeline over a split")
    _add_dataset_args(run)
    _add_client_args(run)
    run.add_argument("--consistency-n", type=int, default=8)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", required=True, help="trajectories JSONL output")
    run.add_argument("--report", help="also write an EX report to this path")
    run.add_argument("--disable", action="append", default=[],
                     choices=DISABLE_FLAGS, help="disable a pipeline stage")
    run.add_argument("--order-sensitive", action="store_true",
                     help="strict row-order comparison in the report")
    run.add_argument("--timeout-ms", type=int, default=5_000)
    run.add_argument("--question-budget-s", type=float, default=120.0)

    ab = sub.add_parser("ablate", help="run the ablation matrix")
    _add_dataset_args(ab)
    _add_client_args(ab)
    ab.add_argument("--rows", default="all",
                    help="'all' or a comma list of named rows")
    ab.add_argument("--consistency-n", type=int, default=8)
    ab.add_argument("--workers", type=int, default=1)
    ab.add_argument("--out", required=True, help="combined report JSON output")
    ab.add_argument("--order-sensitive", action="store_true")

    ev = sub.add_parser("eval", help="score predictions against gold SQL")
    ev.add_argument("--pred", required=True,
                    help="trajectories JSONL or {question_id, sql} JSONL")
    ev.add_argument("--gold", required=True, help="dataset root directory")
    ev.add_argument("--split", required=True)
    ev.add_argument("--out", help="report JSON output path")
    ev.add_argument("--order-sensitive", action="store_true")

    sft = sub.add_parser("export-sft", help="extract fine-tuning samples")
    sft.add_argument("--in", dest="trajectories", required=True,
                     help="trajectories JSONL")
    sft.add_argument("--gold", required=True, help="dataset root directory")
    sft.add_argument("--split", required=True)
    sft.add_argument("--out", required=True, help="samples JSONL output")
    return parser


def _make_client(args) -> LlmClient:
    cassette = Cassette.load(args.cassette) if args.cassette else None
    if args.mode in ("record", "replay") and cassette is None:
        raise ProbeSqlError(f"--mode {args.mode} requires --cassette")
    backend = HttpBackend() if args.mode in ("live", "record") else None
    return LlmClient(mode=args.mode, backend=backend, cassette=cassette)


def _load_predictions(path: str) -> list[Trajectory]:
    trajectories = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            if "final_sql" in data or "stages" in data:
                trajectories.append(Trajectory.from_dict(data))
            else:
                trajectories.append(Trajectory(
                    question_id=str(data["question_id"]),
                    db_id=data.get("db_id", ""),
                    question=data.get("question", ""),
                    final_sql=data.get("sql", "")))
    return trajectories


def cmd_run(args) -> int:
    dataset = load_dataset(args.dataset, args.split)
    config = PipelineConfig(
        consistency_n=args.consistency_n,
        disabled=set(args.disable),
        question_budget_s=args.question_budget_s,
        enforce_budget=args.mode == "live")
    config.probe_limits.timeout_ms = args.timeout_ms
    client = _make_client(args)
    world = WorldContext(dataset, example_cap=config.example_cap)
    trajectories = run_batch(dataset.questions, world, client, config,
                             workers=args.workers)
    write_trajectories(trajectories, args.out)
    failures = sum(1 for t in trajectories if t.error)
    print(f"ran {len(trajectories)} questions ({failures} with error verdicts) "
          f"-> {args.out}")
    if args.report:
        report = evaluate(trajectories, dataset.questions, dataset,
                          order_sensitive=args.order_sensitive,
                          config_snapshot=config.snapshot())
        write_report(report, args.report)
        print(report.to_table())
    return 0


def cmd_ablate(args) -> int:
    dataset = load_dataset(args.dataset, args.split)
    if not args.cassette:
        raise ProbeSqlError("ablate requires --cassette")
    base_config = PipelineConfig(consistency_n=args.consistency_n)

    def client_factory(row_name: str) -> LlmClient:
        return _make_client(args)

    reports, _ = ablate(dataset, client_factory, base_config, rows=args.rows,
                        workers=args.workers, order_sensitive=args.order_sensitive)
    write_report(reports, args.out)
    print(combined_table(reports))
    return 0


def cmd_eval(args) -> int:
    dataset = load_dataset(args.gold, args.split)
    trajectories = _load_predictions(args.pred)
    report = evaluate(trajectories, dataset.questions, dataset,
                      order_sensitive=args.order_sensitive)
    if args.out:
        write_report(report, args.out)
    print(report.to_table())
    print(f"unevaluable: {report.unevaluable}")
    return 0


def cmd_export_sft(args) -> int:
    dataset = load_dataset(args.gold, args.split)
    trajectories = read_trajectories(args.trajectories)
    report = evaluate(trajectories, dataset.questions, dataset)
    count = export_sft(trajectories, report, args.out)
    print(f"wrote {count} samples ({report.correct} correct trajectories) -> {args.out}")
    return 0


_COMMANDS = {"run": cmd_run, "ablate": cmd_ablate, "eval": cmd_eval,
             "export-sft": cmd_export_sft}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            validate_flags(set(args.disable))
        return _COMMANDS[args.command](args)
    except (ProbeSqlError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
