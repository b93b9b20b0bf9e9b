"""Knowledge bases, groundings and validation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ..nn import DenseNetwork
from .ast import And, Atom, Formula, Implies, Not, Or, atoms, free_variables
from .parser import FolSyntaxError, parse_formula

RULE_ID = re.compile(r"[A-Za-z0-9_.\-]+")


@dataclass
class Partition:
    """The individuals a variable ranges over.

    Either ``data`` holds one feature row per individual, or ``indices`` points
    into the grounding table's trainable embedding matrix. Variables sharing a
    ``joint`` key are iterated together row by row (they must be equally long),
    which is how lists of known pairs are grounded.
    """

    data: np.ndarray | None = None
    indices: np.ndarray | None = None
    joint: str | None = None

    def __post_init__(self) -> None:
        if (self.data is None) == (self.indices is None):
            raise ValueError("a partition needs exactly one of data or indices")
        if self.data is not None:
            self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        else:
            self.indices = np.asarray(self.indices, dtype=np.intp).ravel()

    def __len__(self) -> int:
        return len(self.data) if self.data is not None else len(self.indices)


@dataclass
class GroundingTable:
    variables: dict[str, Partition] = field(default_factory=dict)
    predicates: dict[str, DenseNetwork] = field(default_factory=dict)
    embeddings: np.ndarray | None = None

    def axis_key(self, var: str) -> str:
        part = self.variables[var]
        return part.joint if part.joint is not None else var

    def row_dim(self, var: str) -> int:
        part = self.variables[var]
        if part.data is not None:
            return part.data.shape[1]
        return self.embeddings.shape[1]

    def rows(self, var: str) -> np.ndarray:
        """Feature rows of ``var`` (embeddings looked up at their current value)."""
        part = self.variables[var]
        if part.data is not None:
            return part.data
        return self.embeddings[part.indices]

    def parameters(self) -> dict[str, np.ndarray]:
        """Every trainable array, keyed ``<predicate>.<param>`` plus ``embeddings``."""
        out = {}
        for name in sorted(self.predicates):
            for local, arr in self.predicates[name].parameters().items():
                out[f"{name}.{local}"] = arr
        if self.embeddings is not None:
            out["embeddings"] = self.embeddings
        return out

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.parameters().items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, arr in self.parameters().items():
            arr[...] = snap[k]


@dataclass(frozen=True)
class Rule:
    id: str
    formula: Formula
    label: str = ""

    def __post_init__(self) -> None:
        if not self.label:
            object.__setattr__(self, "label", self.id)


class KBError(ValueError):
    pass


@dataclass
class KnowledgeBase:
    rules: list[Rule]
    groundings: GroundingTable | None = None

    def __post_init__(self) -> None:
        seen = set()
        for r in self.rules:
            if r.id in seen:
                raise KBError(f"duplicate rule id {r.id!r}")
            seen.add(r.id)

    def __len__(self) -> int:
        return len(self.rules)

    def __getitem__(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.rules]


def parse_kb(text: str) -> KnowledgeBase:
    """Parse ``id : formula`` lines. A trailing ``# comment`` becomes the rule label."""
    rules = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body, _, comment = raw.partition("#")
        if not body.strip():
            continue
        rid, sep, ftext = body.partition(":")
        rid = rid.strip()
        if not sep:
            raise FolSyntaxError("expected 'id : formula'", lineno, 1)
        if not RULE_ID.fullmatch(rid):
            raise FolSyntaxError(f"bad rule id {rid!r}", lineno, 1)
        if rid in seen:
            raise KBError(f"line {lineno}: duplicate rule id {rid!r} (first defined on line {seen[rid]})")
        seen[rid] = lineno
        col = len(body) - len(body.lstrip()) + len(body.lstrip().partition(":")[0]) + 2
        formula = parse_formula(ftext, lineno, col)
        rules.append(Rule(rid, formula, comment.strip()))
    return KnowledgeBase(rules)


@dataclass(frozen=True)
class Issue:
    rule: str
    message: str
    pos: tuple[int, int] | None = None

    def __str__(self) -> str:
        where = f" at {self.pos[0]}:{self.pos[1]}" if self.pos and self.pos != (0, 0) else ""
        return f"{self.rule}{where}: {self.message}"


def validate_formula(f: Formula, g: GroundingTable, rule: str = "<formula>") -> list[Issue]:
    issues = []
    for v in sorted(free_variables(f)):
        pos = next((a.pos for a in atoms(f) if v in a.args), None)
        issues.append(Issue(rule, f"unbound variable {v!r}", pos))
    _check_scopes(f, g, rule, (), issues)
    _check_atoms(f, g, rule, issues)
    return issues


def _check_scopes(f: Formula, g: GroundingTable, rule: str, bound: tuple[str, ...], issues: list[Issue]) -> None:
    if isinstance(f, Atom):
        return
    if isinstance(f, Not):
        _check_scopes(f.body, g, rule, bound, issues)
    elif isinstance(f, (And, Or, Implies)):
        _check_scopes(f.left, g, rule, bound, issues)
        _check_scopes(f.right, g, rule, bound, issues)
    else:
        if f.var not in g.variables:
            issues.append(Issue(rule, f"no partition for variable {f.var!r}"))
        elif f.var in bound:
            issues.append(Issue(rule, f"variable {f.var!r} is quantified again inside its own scope"))
        _check_scopes(f.body, g, rule, bound + (f.var,), issues)


def _check_atoms(f: Formula, g: GroundingTable, rule: str, issues: list[Issue]) -> None:
    if isinstance(f, Atom):
        net = g.predicates.get(f.predicate)
        if net is None:
            issues.append(Issue(rule, f"unknown predicate {f.predicate!r}", f.pos))
            return
        missing = [v for v in f.args if v not in g.variables]
        for v in missing:
            issues.append(Issue(rule, f"no partition for variable {v!r}", f.pos))
        if not missing:
            width = sum(g.row_dim(v) for v in f.args)
            if width != net.input_dim:
                issues.append(
                    Issue(rule, f"{f.predicate} expects inputs of width {net.input_dim}, arguments give {width}", f.pos)
                )
        return
    if isinstance(f, Not):
        _check_atoms(f.body, g, rule, issues)
    elif isinstance(f, (And, Or, Implies)):
        _check_atoms(f.left, g, rule, issues)
        _check_atoms(f.right, g, rule, issues)
    else:
        _check_atoms(f.body, g, rule, issues)


def _arity_issues(kb_formulas: list[tuple[str, Formula]]) -> list[Issue]:
    first: dict[str, tuple[int, str]] = {}
    issues = []
    for rid, f in kb_formulas:
        for a in atoms(f):
            prev = first.setdefault(a.predicate, (len(a.args), rid))
            if prev[0] != len(a.args):
                issues.append(
                    Issue(rid, f"predicate {a.predicate!r} used with arity {len(a.args)}, "
                          f"but with arity {prev[0]} in {prev[1]}", a.pos)
                )
    return issues


def _grounding_issues(g: GroundingTable) -> list[Issue]:
    issues = []
    lengths: dict[str, tuple[int, str]] = {}
    for name, part in g.variables.items():
        if len(part) == 0:
            issues.append(Issue("<groundings>", f"partition {name!r} is empty"))
        if part.indices is not None:
            if g.embeddings is None:
                issues.append(Issue("<groundings>", f"partition {name!r} indexes embeddings but none are defined"))
            elif len(part) and (part.indices.min() < 0 or part.indices.max() >= len(g.embeddings)):
                issues.append(Issue("<groundings>", f"partition {name!r} indexes past the embedding matrix"))
        if part.joint is not None:
            prev = lengths.setdefault(part.joint, (len(part), name))
            if prev[0] != len(part):
                issues.append(Issue("<groundings>", f"joint partitions {prev[1]!r} and {name!r} differ in length"))
    return issues


def validate_kb(kb: KnowledgeBase, extra: dict[str, Formula] | None = None) -> list[Issue]:
    """Every problem found in ``kb`` (and optional extra formulas such as queries).

    An empty list means the knowledge base is valid.
    """
    if kb.groundings is None:
        return [Issue("<kb>", "no grounding table attached")]
    g = kb.groundings
    issues = _grounding_issues(g)
    formulas = [(r.id, r.formula) for r in kb.rules] + list((extra or {}).items())
    for rid, f in formulas:
        issues.extend(validate_formula(f, g, rid))
    issues.extend(_arity_issues(formulas))
    return issues


def check_kb(kb: KnowledgeBase, extra: dict[str, Formula] | None = None) -> None:
    issues = validate_kb(kb, extra)
    if issues:
        raise KBError("invalid knowledge base:\n  " + "\n  ".join(map(str, issues)))
