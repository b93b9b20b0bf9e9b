"""Fuzzy connectives and quantifier aggregators on [0, 1].

Negation is 1 - a, conjunction the product t-norm, disjunction the
probabilistic sum and implication Reichenbach's 1 - a + a*b. Universal
quantification and the knowledge-base aggregate use the p-mean error
1 - (mean (1 - a)^p)^(1/p); existential quantification uses the p-mean.

These functions work on floats and numpy arrays. The differentiable versions
used during training live in :mod:`contreason.semantics` and follow the same
formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ConnectiveConfig:
    p_forall: float = 2.0
    p_exists: float = 2.0
    p_kb: float = 2.0

    def __post_init__(self) -> None:
        for name in ("p_forall", "p_exists", "p_kb"):
            if not getattr(self, name) >= 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")


def fuzzy_not(a):
    return 1.0 - a


def fuzzy_and(a, b):
    return a * b


def fuzzy_or(a, b):
    return a + b - a * b


def fuzzy_implies(a, b):
    return 1.0 - a + a * b


def _values(values: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot aggregate an empty list of truth values")
    return arr.ravel()


def agg_forall(values: Sequence[float] | np.ndarray, p: float = 2.0) -> float:
    a = _values(values)
    return float(1.0 - np.mean((1.0 - a) ** p) ** (1.0 / p))


def agg_exists(values: Sequence[float] | np.ndarray, p: float = 2.0) -> float:
    a = _values(values)
    return float(np.mean(a**p) ** (1.0 / p))


def kb_sat(rule_sats: Sequence[float] | np.ndarray, cfg: ConnectiveConfig = ConnectiveConfig()) -> float:
    return agg_forall(rule_sats, cfg.p_kb)


def loss(sat: float) -> float:
    return 1.0 - sat
