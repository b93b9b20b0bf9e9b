"""Stage-wise training of a knowledge base with rehearsal."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Iterator, Mapping, Sequence

import numpy as np

from .fol.ast import Formula
from .fol.kb import KBError, KnowledgeBase, check_kb
from .fol.parser import FolSyntaxError
from .logic import ConnectiveConfig
from .optim import AdamState, adam_update
from .semantics import Evaluator, GraphBackend

QuerySet = Mapping[str, Formula]


@dataclass(frozen=True)
class StageConfig:
    epochs: int = 400
    lr: float = 0.001
    recall: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be positive, got {self.epochs}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.recall <= 1.0:
            raise ValueError(f"recall fraction must lie in [0, 1], got {self.recall}")


@dataclass
class Curriculum:
    name: str
    stages: list[list[str]]
    overrides: list[dict] = field(default_factory=list)  # per-stage StageConfig fields

    def __post_init__(self) -> None:
        if not self.stages:
            raise ValueError(f"curriculum {self.name!r} has no stages")
        for i, s in enumerate(self.stages, start=1):
            if not s:
                raise ValueError(f"curriculum {self.name!r}: stage {i} is empty")

    @property
    def rule_ids(self) -> list[str]:
        return [r for s in self.stages for r in s]

    def stage_config(self, index: int, base: StageConfig) -> StageConfig:
        if index < len(self.overrides) and self.overrides[index]:
            return replace(base, **self.overrides[index])
        return base

    def validate(self, kb: KnowledgeBase) -> list[str]:
        known = set(kb.ids)
        problems = []
        for i, s in enumerate(self.stages, start=1):
            for r in s:
                if r not in known:
                    problems.append(f"{self.name}: stage {i} references unknown rule {r!r}")
            if len(set(s)) != len(s):
                problems.append(f"{self.name}: stage {i} lists a rule twice")
        return problems

    def to_text(self) -> str:
        return "".join(f"stage {i}: {', '.join(s)}\n" for i, s in enumerate(self.stages, start=1))


_STAGE_LINE = re.compile(r"\s*stage\s+(\d+)\s*:(.*)")


def parse_curriculum(text: str, name: str = "custom") -> Curriculum:
    """Parse ``stage <k>: id1, id2, ...`` lines; stages must be numbered 1, 2, ..."""
    stages = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.partition("#")[0]
        if not body.strip():
            continue
        m = _STAGE_LINE.fullmatch(body)
        if m is None:
            raise FolSyntaxError("expected 'stage <k>: rule, rule, ...'", lineno, 1)
        k = int(m.group(1))
        if k != len(stages) + 1:
            raise FolSyntaxError(f"expected stage {len(stages) + 1}, found stage {k}", lineno, 1)
        ids = [t.strip() for t in m.group(2).split(",")]
        if not all(ids):
            raise FolSyntaxError("empty rule id in stage list", lineno, 1)
        stages.append(ids)
    return Curriculum(name, stages)


@dataclass
class TrainingTrace:
    """Query truth values after every epoch, with stage boundaries."""

    queries: list[str]
    epochs: list[int] = field(default_factory=list)
    stages: list[int] = field(default_factory=list)
    sats: dict[str, list[float]] = field(default_factory=dict)
    boundaries: list[int] = field(default_factory=list)  # last epoch of each finished stage

    def __post_init__(self) -> None:
        for q in self.queries:
            self.sats.setdefault(q, [])

    def append(self, epoch: int, stage: int, values: Mapping[str, float]) -> None:
        if self.epochs and epoch <= self.epochs[-1]:
            raise ValueError(f"epoch {epoch} does not follow {self.epochs[-1]}")
        self.epochs.append(epoch)
        self.stages.append(stage)
        for q in self.queries:
            self.sats[q].append(float(values[q]))

    def __len__(self) -> int:
        return len(self.epochs)

    def records(self) -> Iterator[tuple[int, int, str, float]]:
        for i, (e, s) in enumerate(zip(self.epochs, self.stages)):
            for q in self.queries:
                yield e, s, q, self.sats[q][i]

    def series(self, query: str, stage: int | None = None) -> np.ndarray:
        vals = np.asarray(self.sats[query])
        if stage is None:
            return vals
        return vals[np.asarray(self.stages) == stage]


class TrainingDiverged(RuntimeError):
    def __init__(self, stage: int, epoch: int, rule_sats: dict[str, float]):
        detail = ", ".join(f"{k}={v:.6g}" for k, v in rule_sats.items())
        super().__init__(f"non-finite loss in stage {stage}, epoch {epoch} (rule sats: {detail})")
        self.stage = stage
        self.epoch = epoch
        self.rule_sats = rule_sats


def rehearsal_sample(prior: Sequence[str], fraction: float, rng: np.random.Generator) -> list[str]:
    """``ceil(fraction * len(prior))`` rules drawn uniformly without replacement, in prior order."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"recall fraction must lie in [0, 1], got {fraction}")
    n = len(prior)
    k = min(n, math.ceil(round(fraction * n, 9)))
    if k == 0:
        return []
    if k == n:
        return list(prior)
    chosen = np.sort(rng.choice(n, size=k, replace=False))
    return [prior[i] for i in chosen]


def evaluate_queries(kb: KnowledgeBase, queries: QuerySet, cfg: ConnectiveConfig = ConnectiveConfig()) -> dict[str, float]:
    ev = Evaluator(kb.groundings, cfg)
    return {name: float(ev.sat(f)) for name, f in queries.items()}


def evaluate_rules(kb: KnowledgeBase, ids: Sequence[str] | None = None,
                   cfg: ConnectiveConfig = ConnectiveConfig()) -> dict[str, float]:
    ev = Evaluator(kb.groundings, cfg)
    return {r: float(ev.sat(kb[r].formula)) for r in (ids if ids is not None else kb.ids)}


def train_stage(
    kb: KnowledgeBase,
    stage_rules: Sequence[str],
    prior_rules: Sequence[str],
    cfg: StageConfig,
    queries: QuerySet,
    trace: TrainingTrace,
    *,
    stage_index: int = 1,
    rng: np.random.Generator | None = None,
    connectives: ConnectiveConfig = ConnectiveConfig(),
) -> float:
    """Train ``stage_rules`` (plus recalled prior rules) for ``cfg.epochs`` epochs.

    Each epoch is one full-batch Adam step on ``1 - sat`` of the active rules.
    A fresh optimizer state is used for every stage. Returns the last loss.
    """
    if not stage_rules:
        raise ValueError("stage has no rules")
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    g = kb.groundings
    params = g.parameters()
    adam = AdamState(lr=cfg.lr)
    stage_set = set(stage_rules)
    recallable = [r for r in prior_rules if r not in stage_set]
    start = trace.epochs[-1] if trace.epochs else 0
    last = float("nan")
    for epoch in range(1, cfg.epochs + 1):
        active = list(stage_rules) + rehearsal_sample(recallable, cfg.recall, rng)
        be = GraphBackend(g)
        ev = Evaluator(g, connectives, be)
        sats = [ev.sat(kb[r].formula) for r in active]
        loss_node = ev.loss(ev.kb_sat(sats))
        last = float(be.graph.value(loss_node))
        if not math.isfinite(last):
            raise TrainingDiverged(stage_index, epoch, {r: float(be.graph.value(s)) for r, s in zip(active, sats)})
        grads = be.graph.backward(loss_node)
        adam_update(params, grads, adam)
        trace.append(start + epoch, stage_index, evaluate_queries(kb, queries, connectives))
    trace.boundaries.append(trace.epochs[-1])
    return last


def reinitialize(kb: KnowledgeBase, rng: np.random.Generator) -> None:
    """Fresh Glorot-uniform weights and zero biases for every predicate; N(0, 1) embeddings."""
    g = kb.groundings
    for name in sorted(g.predicates):
        for layer in g.predicates[name].layers:
            fan_out, fan_in = layer.weight.shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            layer.weight[...] = rng.uniform(-limit, limit, size=layer.weight.shape)
            layer.bias[...] = 0.0
    if g.embeddings is not None:
        g.embeddings[...] = rng.standard_normal(g.embeddings.shape)


@dataclass
class RunResult:
    curriculum: str
    seed: int
    trace: TrainingTrace
    stage_sats: list[dict[str, float]]  # query values at the end of each stage

    @property
    def final(self) -> dict[str, float]:
        return self.stage_sats[-1]


def run_curriculum(
    kb: KnowledgeBase,
    curriculum: Curriculum,
    cfg: StageConfig,
    queries: QuerySet,
    seed: int,
    connectives: ConnectiveConfig = ConnectiveConfig(),
) -> RunResult:
    """Re-initialise from ``seed`` and train every stage in order, recalling earlier stages."""
    problems = curriculum.validate(kb)
    if problems:
        raise KBError("; ".join(problems))
    check_kb(kb, dict(queries))
    init_seq, recall_seq = np.random.SeedSequence(seed).spawn(2)
    reinitialize(kb, np.random.default_rng(init_seq))
    rng = np.random.default_rng(recall_seq)
    trace = TrainingTrace(list(queries))
    stage_sats = []
    prior: list[str] = []
    for i, stage in enumerate(curriculum.stages):
        scfg = curriculum.stage_config(i, cfg)
        train_stage(kb, stage, prior, scfg, queries, trace, stage_index=i + 1, rng=rng, connectives=connectives)
        stage_sats.append({q: trace.sats[q][-1] for q in queries})
        prior.extend(r for r in stage if r not in prior)
    return RunResult(curriculum.name, seed, trace, stage_sats)


def make_random_curriculum(
    rule_ids: Sequence[str], n_stages: int = 3, rng: np.random.Generator | None = None, name: str = "random"
) -> Curriculum:
    """Shuffle the rules, then cut them into ``n_stages`` non-empty groups uniformly at random."""
    n = len(rule_ids)
    if n < n_stages:
        raise ValueError(f"cannot split {n} rules into {n_stages} non-empty stages")
    rng = rng if rng is not None else np.random.default_rng()
    order = [rule_ids[i] for i in rng.permutation(n)]
    cuts = sorted(rng.choice(np.arange(1, n), size=n_stages - 1, replace=False).tolist())
    bounds = [0, *cuts, n]
    return Curriculum(name, [order[a:b] for a, b in zip(bounds, bounds[1:])])
