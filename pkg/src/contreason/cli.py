"""Command line: ``contreason run | check | trace``."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .curriculum import TrainingDiverged, parse_curriculum
from .experiment import (
    TRACE_HEADER,
    ConfigError,
    ExperimentConfig,
    parse_config_text,
    parse_seeds,
    read_trace_csv,
    run_experiment,
    write_outputs,
)
from .fol import FolSyntaxError, KBError, parse_kb, validate_kb
from .fol.kb import Issue, _arity_issues
from .fol.ast import free_variables, atoms
from .tasks import build_task

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO = 0, 1, 2, 3, 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="contreason", description="Continual reasoning over fuzzy-logic knowledge bases.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train curricula over a seed sweep and write CSV reports")
    run.add_argument("--config", help="key = value file; flags override it")
    run.add_argument("--task", choices=["pet", "sf"])
    run.add_argument("--curricula", help="comma-separated, e.g. baseline,ts,kc,random")
    run.add_argument("--seeds", help="a count (N means 0..N-1) or a comma-separated list")
    run.add_argument("--epochs", type=int, help="epochs per stage (single-stage curricula get 3x)")
    run.add_argument("--lr", type=float)
    run.add_argument("--recall", type=float, help="fraction of earlier rules recalled each epoch")
    run.add_argument("--p", type=float, help="exponent for every aggregator")
    run.add_argument("--out", help="output directory")
    run.add_argument("--jobs", type=int, help="parallel runs")

    chk = sub.add_parser("check", help="parse and validate a KB file and optional curriculum files")
    chk.add_argument("kb")
    chk.add_argument("curricula", nargs="*")
    chk.add_argument("--task", choices=["pet", "sf"], help="also validate against this task's groundings")

    tr = sub.add_parser("trace", help="print a slice of a trace CSV")
    tr.add_argument("path")
    tr.add_argument("--curriculum")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--stage", type=int)
    tr.add_argument("--query")
    return p


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        try:
            values.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
        except OSError as e:
            raise ConfigError(f"cannot read config {args.config}: {e.strerror}") from None
    if args.task:
        values["task"] = args.task
    if args.curricula:
        values["curricula"] = [c.strip() for c in args.curricula.split(",") if c.strip()]
    if args.seeds:
        values["seeds"] = parse_seeds(args.seeds)
    for key in ("epochs", "lr", "recall", "out", "jobs"):
        if getattr(args, key) is not None:
            values[key] = getattr(args, key)
    if args.p is not None:
        values.update(p_forall=args.p, p_exists=args.p, p_kb=args.p)
    if "curricula" not in values and values.get("task") == "sf":
        values["curricula"] = ["baseline", "kc", "ts"]
    return ExperimentConfig(**values)


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = _resolve_config(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        results = run_experiment(cfg)
    except TrainingDiverged as e:
        print(f"error: training diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    try:
        out = write_outputs(cfg, results)
    except OSError as e:
        print(f"error: cannot write results to {cfg.out}: {e.strerror or e}", file=sys.stderr)
        return EXIT_IO
    print(f"{len(results)} runs written to {out}")
    return EXIT_OK


def cmd_check(args: argparse.Namespace) -> int:
    try:
        kb = parse_kb(Path(args.kb).read_text(encoding="utf-8"))
        curricula = [(c, parse_curriculum(Path(c).read_text(encoding="utf-8"), Path(c).stem)) for c in args.curricula]
    except OSError as e:
        print(f"error: {e.filename}: {e.strerror}", file=sys.stderr)
        return EXIT_IO
    except (FolSyntaxError, KBError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

    problems: list[str] = []
    if args.task:
        bundle = build_task(args.task)
        kb.groundings = bundle.kb.groundings
        problems += [str(i) for i in validate_kb(kb)]
    else:
        for r in kb.rules:
            for v in sorted(free_variables(r.formula)):
                pos = next((a.pos for a in atoms(r.formula) if v in a.args), None)
                problems.append(str(Issue(r.id, f"unbound variable {v!r}", pos)))
        problems += [str(i) for i in _arity_issues([(r.id, r.formula) for r in kb.rules])]
    for path, cur in curricula:
        problems += cur.validate(kb)

    print(f"{args.kb}: {len(kb)} rules")
    for path, cur in curricula:
        sizes = ", ".join(f"stage {i}: {len(s)}" for i, s in enumerate(cur.stages, start=1))
        print(f"{path}: {len(cur.stages)} stages ({sizes})")
    for p in problems:
        print(f"error: {p}", file=sys.stderr)
    return EXIT_INVALID if problems else EXIT_OK


def cmd_trace(args: argparse.Namespace) -> int:
    try:
        rows = read_trace_csv(args.path)
    except OSError as e:
        print(f"error: {args.path}: {e.strerror}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {args.path}: {e}", file=sys.stderr)
        return EXIT_INVALID
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for seed, cur, stage, epoch, q, sat in rows:
        if args.curriculum is not None and cur != args.curriculum:
            continue
        if args.seed is not None and seed != args.seed:
            continue
        if args.stage is not None and stage != args.stage:
            continue
        if args.query is not None and q != args.query:
            continue
        w.writerow([seed, cur, stage, epoch, q, f"{sat:.6f}"])
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    return {"run": cmd_run, "check": cmd_check, "trace": cmd_trace}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
