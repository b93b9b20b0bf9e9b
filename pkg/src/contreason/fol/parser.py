"""Recursive-descent parser for the rule language.

Grammar::

    formula     := implication
    implication := disjunction [ "=>" implication ]
    disjunction := conjunction { "or" conjunction }
    conjunction := unary { "and" unary }
    unary       := "not" unary | primary
    primary     := quantifier | "(" implication ")" | atom
    quantifier  := ("forall" | "exists") VAR ":" implication
    atom        := IDENT "(" VAR { "," VAR } ")"
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import And, Atom, Exists, ForAll, Formula, Implies, Not, Or

KEYWORDS = {"forall", "exists", "not", "and", "or"}

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r\n]+)|(?P<arrow>=>)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<punct>[(),:])"
)


class FolSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, symbol, eof
    text: str
    line: int
    column: int


def tokenize(text: str, line: int = 1, column: int = 1) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FolSyntaxError(f"unexpected character {text[pos]!r}", line, column)
        chunk = m.group()
        if m.lastgroup == "ident":
            kind = "keyword" if chunk in KEYWORDS else "ident"
            tokens.append(Token(kind, chunk, line, column))
        elif m.lastgroup in ("arrow", "punct"):
            tokens.append(Token("symbol", chunk, line, column))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            column = len(chunk) - chunk.rfind("\n")
        else:
            column += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, column))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def fail(self, expected: str) -> FolSyntaxError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        return FolSyntaxError(f"expected {expected}, found {found}", t.line, t.column)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("keyword", "symbol") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            raise self.fail(repr(text))

    def ident(self, what: str) -> Token:
        if self.tok.kind != "ident":
            raise self.fail(what)
        t = self.tok
        self.i += 1
        return t

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.accept("=>"):
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        f = self.conjunction()
        while self.accept("or"):
            f = Or(f, self.conjunction())
        return f

    def conjunction(self) -> Formula:
        f = self.unary()
        while self.accept("and"):
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        if self.accept("not"):
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        for kw, node in (("forall", ForAll), ("exists", Exists)):
            if self.accept(kw):
                var = self.ident("a variable name").text
                self.expect(":")
                return node(var, self.implication())
        if self.accept("("):
            f = self.implication()
            self.expect(")")
            return f
        name = self.ident("a predicate, quantifier, 'not' or '('")
        self.expect("(")
        args = [self.ident("a variable name").text]
        while self.accept(","):
            args.append(self.ident("a variable name").text)
        self.expect(")")
        return Atom(name.text, tuple(args), (name.line, name.column))


def parse_formula(text: str, line: int = 1, column: int = 1) -> Formula:
    """Parse one formula. ``line``/``column`` offset error positions for embedded text."""
    if not text.strip():
        raise FolSyntaxError("empty formula", line, column)
    p = _Parser(tokenize(text, line, column))
    f = p.implication()
    if p.tok.kind != "eof":
        raise p.fail("end of formula")
    return f
