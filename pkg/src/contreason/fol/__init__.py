from .ast import And, Atom, Exists, ForAll, Formula, Implies, Not, Or, atoms, free_variables, to_text
from .kb import (
    GroundingTable,
    Issue,
    KBError,
    KnowledgeBase,
    Partition,
    Rule,
    check_kb,
    parse_kb,
    validate_formula,
    validate_kb,
)
from .parser import FolSyntaxError, parse_formula

__all__ = [
    "And", "Atom", "Exists", "ForAll", "Formula", "Implies", "Not", "Or",
    "atoms", "free_variables", "to_text",
    "GroundingTable", "Issue", "KBError", "KnowledgeBase", "Partition", "Rule",
    "check_kb", "parse_kb", "validate_formula", "validate_kb",
    "FolSyntaxError", "parse_formula",
]
