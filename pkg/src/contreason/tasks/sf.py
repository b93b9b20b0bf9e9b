"""Smokers & Friends over fourteen people with trainable embeddings."""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from ..curriculum import Curriculum
from ..fol import GroundingTable, KnowledgeBase, Partition
from ..nn import DenseNetwork
from . import TaskBundle, data_text, load_curriculum, load_kb

# Query names follow the rows of the published results table; each query is the rule itself.
QUERY_RULES = {
    "F(x,y)": "friend_facts",
    "S(x)": "smoker_facts",
    "C(x)": "cancer_facts",
    "not F(x,x)": "antireflexive",
    "F(x,y) => F(y,x)": "symmetric",
    "exists_y F(x,y)": "has_friend",
    "F(x,y) and S(x) => S(y)": "friends_smoke",
    "S(x) => C(x)": "smokers_have_cancer",
    "not S(x) => not C(x)": "non_smokers_healthy",
}


@dataclass(frozen=True)
class SfConfig:
    n_persons: int = 14
    embedding_dim: int = 8
    groups: tuple[str, ...] = ("abcdefgh", "ijklmn")
    hidden: tuple[int, ...] = (16, 16)
    seed: int = 0

    def __post_init__(self) -> None:
        if not 1 <= self.n_persons <= 26:
            raise ValueError("n_persons must be between 1 and 26")
        if "".join(self.groups) != self.persons:
            raise ValueError("groups must partition the persons in order")

    @property
    def persons(self) -> str:
        return string.ascii_lowercase[: self.n_persons]


class FactsError(ValueError):
    pass


@dataclass
class Facts:
    friends: list[tuple[str, str]] = field(default_factory=list)
    not_friends: list[tuple[str, str]] = field(default_factory=list)
    smokes: list[str] = field(default_factory=list)
    not_smokes: list[str] = field(default_factory=list)
    cancer: list[str] = field(default_factory=list)
    not_cancer: list[str] = field(default_factory=list)


_ARITY = {"friend": 2, "not-friend": 2, "smokes": 1, "not-smokes": 1, "cancer": 1, "not-cancer": 1}


def parse_facts(text: str, cfg: SfConfig = SfConfig()) -> Facts:
    """Read ``friend a b`` / ``smokes a`` / ``cancer a`` / ``not-cancer b`` lines.

    ``not-friend a b`` and ``not-smokes a`` may also be given. Without them,
    every ordered same-group pair whose two people are not listed as friends
    (in either order) is a known non-friendship, and every unlisted person a
    known non-smoker.
    """
    facts = Facts()
    people = set(cfg.persons)
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        words = raw.partition("#")[0].split()
        if not words:
            continue
        kind, args = words[0], words[1:]
        if kind not in _ARITY:
            raise FactsError(f"line {lineno}: unknown fact kind {kind!r}")
        if len(args) != _ARITY[kind]:
            raise FactsError(f"line {lineno}: {kind} takes {_ARITY[kind]} name(s), got {len(args)}")
        for a in args:
            if a not in people:
                raise FactsError(f"line {lineno}: unknown person {a!r}")
        key = (kind, tuple(args))
        if key in seen:
            raise FactsError(f"line {lineno}: duplicate fact {raw.strip()!r}")
        seen.add(key)
        if kind in ("friend", "not-friend"):
            if args[0] == args[1]:
                raise FactsError(f"line {lineno}: a person cannot be their own friend")
            (facts.friends if kind == "friend" else facts.not_friends).append((args[0], args[1]))
        else:
            getattr(facts, kind.replace("-", "_")).append(args[0])

    if not facts.not_friends:
        known = {frozenset(p) for p in facts.friends}
        facts.not_friends = [
            (x, y) for grp in cfg.groups for x, y in permutations(grp, 2) if frozenset((x, y)) not in known
        ]
    if not facts.not_smokes:
        facts.not_smokes = [p for p in cfg.persons if p not in facts.smokes]
    overlap = {frozenset(p) for p in facts.friends} & {frozenset(p) for p in facts.not_friends}
    for pos, neg, what in (
        (facts.smokes, facts.not_smokes, "smokes"),
        (facts.cancer, facts.not_cancer, "cancer"),
    ):
        if set(pos) & set(neg):
            raise FactsError(f"contradictory {what} facts for {sorted(set(pos) & set(neg))}")
    if overlap:
        raise FactsError(f"pairs listed as both friends and non-friends: {sorted(map(sorted, overlap))}")
    return facts


def default_facts(cfg: SfConfig = SfConfig()) -> Facts:
    return parse_facts(data_text("sf_facts.txt"), cfg)


def sf_curricula() -> dict[str, Curriculum]:
    return {name: load_curriculum(f"sf_{name}.cur", name) for name in ("baseline", "kc", "ts")}


def build_sf(cfg: SfConfig = SfConfig(), facts: Facts | None = None) -> TaskBundle:
    facts = facts if facts is not None else default_facts(cfg)
    idx = {p: i for i, p in enumerate(cfg.persons)}

    def part(names, joint=None):
        return Partition(indices=[idx[n] for n in names], joint=joint)

    variables = {
        "x": part(cfg.persons),
        "y": part(cfg.persons),
        "Friend1": part([a for a, _ in facts.friends], "friends"),
        "Friend2": part([b for _, b in facts.friends], "friends"),
        "Stranger1": part([a for a, _ in facts.not_friends], "strangers"),
        "Stranger2": part([b for _, b in facts.not_friends], "strangers"),
        "Smokers": part(facts.smokes),
        "NonSmokers": part(facts.not_smokes),
        "Cancer": part(facts.cancer),
        "NoCancer": part(facts.not_cancer),
    }
    rng = np.random.default_rng(cfg.seed)
    d = cfg.embedding_dim
    embeddings = rng.standard_normal((cfg.n_persons, d))
    predicates = {
        "F": DenseNetwork.init(2 * d, cfg.hidden, rng),
        "S": DenseNetwork.init(d, cfg.hidden, rng),
        "C": DenseNetwork.init(d, cfg.hidden, rng),
    }
    kb = load_kb("sf.kb")
    kb = KnowledgeBase(kb.rules, GroundingTable(variables, predicates, embeddings))
    queries = {name: kb[rid].formula for name, rid in QUERY_RULES.items()}
    return TaskBundle("sf", kb, sf_curricula(), queries)
