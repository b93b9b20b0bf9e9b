"""Seed sweeps over curricula, aggregated into results and trace CSV files."""

from __future__ import annotations

import csv
import io
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .curriculum import Curriculum, RunResult, StageConfig, run_curriculum
from .logic import ConnectiveConfig
from .tasks import build_task
from .tasks.pet import random_curriculum

RESULTS_HEADER = ["curriculum", "stage", "query", "mean_sat", "std_sat", "n_seeds"]
TRACE_HEADER = ["seed", "curriculum", "stage", "epoch", "query", "sat"]

# single-stage curricula train this many times longer, matching three-stage budgets
BASELINE_STAGE_FACTOR = 3

TASK_DEFAULTS = {
    "pet": {"lr": 0.01, "recall": 0.5, "p_forall": 2.0, "p_exists": 2.0, "p_kb": 2.0},
    "sf": {"lr": 0.005, "recall": 0.25, "p_forall": 2.0, "p_exists": 2.0, "p_kb": 2.0},
}
TASK_CURRICULA = {"pet": ("baseline", "random", "kc", "ts"), "sf": ("baseline", "kc", "ts")}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str = "pet"
    curricula: list[str] = field(default_factory=lambda: ["baseline", "ts", "kc", "random"])
    seeds: list[int] = field(default_factory=lambda: list(range(10)))
    epochs: int = 400
    lr: float | None = None
    recall: float | None = None
    p_forall: float | None = None
    p_exists: float | None = None
    p_kb: float | None = None
    out: str = "results"
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.task not in TASK_DEFAULTS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {sorted(TASK_DEFAULTS)}")
        for k, v in TASK_DEFAULTS[self.task].items():
            if getattr(self, k) is None:
                setattr(self, k, v)
        if not self.curricula:
            raise ConfigError("no curricula given")
        for c in self.curricula:
            if c not in TASK_CURRICULA[self.task]:
                raise ConfigError(
                    f"unknown curriculum {c!r} for task {self.task}; choose from {', '.join(TASK_CURRICULA[self.task])}"
                )
        if len(set(self.curricula)) != len(self.curricula):
            raise ConfigError("a curriculum is listed twice")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        try:
            self.stage_config()
            self.connectives()
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def stage_config(self) -> StageConfig:
        return StageConfig(epochs=self.epochs, lr=self.lr, recall=self.recall)

    def connectives(self) -> ConnectiveConfig:
        return ConnectiveConfig(self.p_forall, self.p_exists, self.p_kb)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(map(str, v))
            lines.append(f"{f.name} = {v}\n")
        return "".join(lines)


def parse_seeds(text: str) -> list[int]:
    """``"10"`` means seeds 0..9; ``"3,7,11"`` lists them."""
    text = text.strip()
    try:
        if "," in text:
            return [int(t) for t in text.split(",") if t.strip()]
        n = int(text)
    except ValueError:
        raise ConfigError(f"bad seeds value {text!r}") from None
    if n < 1:
        raise ConfigError("seed count must be >= 1")
    return list(range(n))


_CONVERT = {
    "task": str,
    "curricula": lambda s: [t.strip() for t in s.split(",") if t.strip()],
    "seeds": parse_seeds,
    "epochs": int,
    "lr": float,
    "recall": float,
    "p_forall": float,
    "p_exists": float,
    "p_kb": float,
    "out": str,
    "jobs": int,
}


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``p`` sets all three aggregator exponents."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.partition("#")[0].strip()
        if not body:
            continue
        key, sep, value = (s.strip() for s in body.partition("="))
        if not sep:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        if key == "p":
            keys = ["p_forall", "p_exists", "p_kb"]
        elif key in _CONVERT:
            keys = [key]
        else:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            for k in keys:
                out[k] = _CONVERT[k](value)
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad value {value!r} for {key}") from None
    return out


def resolve_curriculum(task: str, name: str, seed: int) -> Curriculum:
    if name == "random":
        if task != "pet":
            raise ConfigError("random curricula are only defined for pet")
        return random_curriculum(np.random.default_rng([seed, 7919]))
    return build_task(task).curricula[name]


def stage_budget(curriculum: Curriculum, cfg: StageConfig) -> StageConfig:
    if len(curriculum.stages) == 1:
        return StageConfig(cfg.epochs * BASELINE_STAGE_FACTOR, cfg.lr, cfg.recall, cfg.seed)
    return cfg


def run_one(task: str, curriculum_name: str, seed: int, cfg: StageConfig, connectives: ConnectiveConfig) -> RunResult:
    bundle = build_task(task)
    cur = resolve_curriculum(task, curriculum_name, seed)
    cur = Curriculum(curriculum_name, cur.stages, cur.overrides)
    return run_curriculum(bundle.kb, cur, stage_budget(cur, cfg), bundle.queries, seed, connectives)


def run_experiment(cfg: ExperimentConfig) -> list[RunResult]:
    jobs = [(cfg.task, c, s, cfg.stage_config(), cfg.connectives()) for c in cfg.curricula for s in cfg.seeds]
    if cfg.jobs == 1:
        return [run_one(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        futures = [pool.submit(run_one, *j) for j in jobs]
        return [f.result() for f in futures]


def aggregate_seeds(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and sample standard deviation (0 for a single value)."""
    if len(values) == 0:
        raise ValueError("need at least one value")
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return mean, std


@dataclass(frozen=True)
class ReportRow:
    curriculum: str
    stage: int
    query: str
    mean_sat: float
    std_sat: float
    n_seeds: int

    def __post_init__(self) -> None:
        if not (0.0 <= self.mean_sat <= 1.0 and self.std_sat >= 0 and self.n_seeds >= 1):
            raise ValueError(f"invalid report row {self}")


def build_report(results: Iterable[RunResult]) -> list[ReportRow]:
    cells: dict[tuple[str, int, str], list[float]] = {}
    for r in results:
        for stage, sats in enumerate(r.stage_sats, start=1):
            for q, v in sats.items():
                cells.setdefault((r.curriculum, stage, q), []).append(v)
    rows = []
    for (c, s, q), vals in sorted(cells.items()):
        mean, std = aggregate_seeds(vals)
        rows.append(ReportRow(c, s, q, round(mean, 6), round(std, 6), len(vals)))
    return rows


def _atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(header: list[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_results_csv(rows: Sequence[ReportRow], path: str | os.PathLike) -> None:
    ordered = sorted(rows, key=lambda r: (r.curriculum, r.stage, r.query))
    _atomic_write(
        path,
        _csv_text(
            RESULTS_HEADER,
            ([r.curriculum, r.stage, r.query, f"{r.mean_sat:.6f}", f"{r.std_sat:.6f}", r.n_seeds] for r in ordered),
        ),
    )


def read_results_csv(path: str | os.PathLike) -> list[ReportRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != RESULTS_HEADER:
            raise ValueError(f"unexpected results header {header}")
        return [ReportRow(c, int(s), q, float(m), float(sd), int(n)) for c, s, q, m, sd, n in reader]


def trace_rows(results: Iterable[RunResult]) -> list[tuple]:
    rows = []
    for r in sorted(results, key=lambda r: (r.curriculum, r.seed)):
        for epoch, stage, q, sat in r.trace.records():
            rows.append((r.seed, r.curriculum, stage, epoch, q, sat))
    return rows


def write_trace_csv(results: Iterable[RunResult], path: str | os.PathLike) -> None:
    _atomic_write(path, _csv_text(TRACE_HEADER, ((s, c, st, e, q, f"{v:.6f}") for s, c, st, e, q, v in trace_rows(results))))


def read_trace_csv(path: str | os.PathLike) -> list[tuple]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header}")
        return [(int(s), c, int(st), int(e), q, float(v)) for s, c, st, e, q, v in reader]


def write_outputs(cfg: ExperimentConfig, results: list[RunResult]) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(build_report(results), out / "results.csv")
    write_trace_csv(results, out / "trace.csv")
    _atomic_write(out / "config.txt", cfg.to_text())
    return out
