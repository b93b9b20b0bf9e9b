"""Formula syntax tree."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Atom:
    predicate: str
    args: tuple[str, ...]
    pos: tuple[int, int] = (0, 0)  # (line, column) in the source text

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Atom) and (self.predicate, self.args) == (other.predicate, other.args)

    def __hash__(self) -> int:
        return hash(("Atom", self.predicate, self.args))


@dataclass(frozen=True)
class Not:
    body: Formula


@dataclass(frozen=True)
class And:
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or:
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies:
    left: Formula
    right: Formula


@dataclass(frozen=True)
class ForAll:
    var: str
    body: Formula


@dataclass(frozen=True)
class Exists:
    var: str
    body: Formula


Formula = Atom | Not | And | Or | Implies | ForAll | Exists

# binding strength used by the printer; quantifiers extend as far right as possible
_PREC = {Implies: 1, Or: 2, And: 3, Not: 4, Atom: 5}


def free_variables(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return frozenset(f.args)
    if isinstance(f, Not):
        return free_variables(f.body)
    if isinstance(f, (And, Or, Implies)):
        return free_variables(f.left) | free_variables(f.right)
    if isinstance(f, (ForAll, Exists)):
        return free_variables(f.body) - {f.var}
    raise TypeError(f"not a formula: {f!r}")


def atoms(f: Formula) -> list[Atom]:
    if isinstance(f, Atom):
        return [f]
    if isinstance(f, Not):
        return atoms(f.body)
    if isinstance(f, (And, Or, Implies)):
        return atoms(f.left) + atoms(f.right)
    return atoms(f.body)


def quantified_variables(f: Formula) -> list[str]:
    if isinstance(f, Atom):
        return []
    if isinstance(f, Not):
        return quantified_variables(f.body)
    if isinstance(f, (And, Or, Implies)):
        return quantified_variables(f.left) + quantified_variables(f.right)
    return [f.var] + quantified_variables(f.body)


def to_text(f: Formula) -> str:
    """Render ``f`` in the rule language with the fewest parentheses that reparse to ``f``."""
    return _fmt(f, tail=True)


def _fmt(f: Formula, tail: bool) -> str:
    # tail: nothing follows this text, so a quantifier here cannot swallow more input
    if isinstance(f, Atom):
        return f"{f.predicate}({', '.join(f.args)})"
    if isinstance(f, (ForAll, Exists)):
        kw = "forall" if isinstance(f, ForAll) else "exists"
        return f"{kw} {f.var}: {_fmt(f.body, tail=True)}"
    if isinstance(f, Not):
        return f"not {_operand(f.body, _PREC[Not], tail)}"
    op = {And: "and", Or: "or", Implies: "=>"}[type(f)]
    prec = _PREC[type(f)]
    if isinstance(f, Implies):
        # right associative
        left = _operand(f.left, prec + 1, False)
        right = _operand(f.right, prec, tail)
    else:
        left = _operand(f.left, prec, False)
        right = _operand(f.right, prec + 1, tail)
    return f"{left} {op} {right}"


def _operand(f: Formula, min_prec: int, tail: bool) -> str:
    if isinstance(f, (ForAll, Exists)):
        return _fmt(f, True) if tail else f"({_fmt(f, True)})"
    if _PREC[type(f)] >= min_prec:
        return _fmt(f, tail)
    return f"({_fmt(f, True)})"
