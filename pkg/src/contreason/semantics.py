"""Truth values of formulas over grounded partitions.

A subformula evaluates to an array with one axis per free variable (variables
sharing a ``joint`` key share an axis). Connectives broadcast over the union of
their operands' axes; a quantifier aggregates its variable's axis away, so a
closed formula yields a scalar.

The same evaluator runs on two backends: :class:`GraphBackend` builds a
differentiable :class:`~contreason.autodiff.Graph` for training, and
:class:`NumpyBackend` computes plain values for monitoring.
"""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from .autodiff import Graph, _elu, _sigmoid, affine
from .fol.ast import And, Atom, Exists, ForAll, Formula, Implies, Not, Or
from .fol.kb import GroundingTable, KBError, validate_formula
from .logic import ConnectiveConfig


class NumpyBackend:
    def __init__(self, groundings: GroundingTable):
        self.g = groundings

    def const(self, v):
        return np.asarray(v, dtype=float)

    def value(self, x) -> np.ndarray:
        return x

    def embeddings(self):
        return self.g.embeddings

    def network(self, predicate: str, x):
        net = self.g.predicates[predicate]
        for layer in net.layers:
            x = affine(x, layer.weight, layer.bias)
            if layer.activation == "elu":
                x = _elu(x)
            elif layer.activation == "sigmoid":
                x = _sigmoid(x)
        return x[:, 0]

    def rsub(self, c, x):
        return c - x

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def pow(self, a, k):
        return np.power(a, k)

    def mean(self, a, axis):
        return a.mean(axis=axis)

    def gather(self, a, idx):
        return a[idx]

    def concat(self, parts, axis):
        return np.concatenate(parts, axis=axis)

    def reshape(self, a, shape):
        return a.reshape(shape)

    def transpose(self, a, axes):
        return a.transpose(axes)


class GraphBackend:
    """Builds nodes on a graph. Predicate parameters become trainable leaves on first use."""

    def __init__(self, groundings: GroundingTable, graph: Graph | None = None):
        self.g = groundings
        self.graph = graph if graph is not None else Graph()
        self._params: dict[str, dict[str, int]] = {}
        self._emb: int | None = None

    def const(self, v):
        return self.graph.const(v)

    def value(self, x) -> np.ndarray:
        return self.graph.value(x)

    def embeddings(self):
        if self._emb is None:
            self._emb = self.graph.leaf("embeddings", self.g.embeddings)
        return self._emb

    def network(self, predicate: str, x):
        net = self.g.predicates[predicate]
        if predicate not in self._params:
            self._params[predicate] = {
                local: self.graph.leaf(f"{predicate}.{local}", arr) for local, arr in net.parameters().items()
            }
        return net.apply_graph(self.graph, x, self._params[predicate])

    def rsub(self, c, x):
        return self.graph.rsub(c, x)

    def add(self, a, b):
        return self.graph.add(a, b)

    def sub(self, a, b):
        return self.graph.sub(a, b)

    def mul(self, a, b):
        return self.graph.mul(a, b)

    def pow(self, a, k):
        return self.graph.pow(a, k)

    def mean(self, a, axis):
        return self.graph.mean(a, axis)

    def gather(self, a, idx):
        return self.graph.gather(a, idx)

    def concat(self, parts, axis):
        return self.graph.concat(list(parts), axis)

    def reshape(self, a, shape):
        return self.graph.reshape(a, shape)

    def transpose(self, a, axes):
        return self.graph.transpose(a, axes)


class Evaluator:
    """Evaluates formulas on one backend, sharing atom groundings between them."""

    def __init__(self, groundings: GroundingTable, cfg: ConnectiveConfig = ConnectiveConfig(), backend=None):
        self.g = groundings
        self.cfg = cfg
        self.be = backend if backend is not None else NumpyBackend(groundings)
        self._atoms: dict[tuple[str, tuple[str, ...]], tuple[Any, tuple[str, ...]]] = {}
        self._sources: dict[str, Any] = {}

    # -- public -----------------------------------------------------------
    def sat(self, f: Formula):
        """Backend value (node id or array) of the closed formula ``f``."""
        val, axes = self._eval(f, frozenset())
        if axes:
            raise KBError(f"formula has free variables on axes {axes}")
        return val

    def kb_sat(self, rule_sats: Sequence[Any]):
        if not rule_sats:
            raise ValueError("cannot aggregate an empty rule list")
        stacked = self.be.concat([self.be.reshape(s, (1,)) for s in rule_sats], 0)
        return self._forall(stacked, 0, self.cfg.p_kb)

    def loss(self, kb_sat):
        return self.be.rsub(1.0, kb_sat)

    # -- aggregators ------------------------------------------------------
    def _forall(self, a, axis: int, p: float):
        err = self.be.pow(self.be.rsub(1.0, a), p)
        return self.be.rsub(1.0, self.be.pow(self.be.mean(err, axis), 1.0 / p))

    def _exists(self, a, axis: int, p: float):
        return self.be.pow(self.be.mean(self.be.pow(a, p), axis), 1.0 / p)

    # -- recursion --------------------------------------------------------
    def _eval(self, f: Formula, bound: frozenset[str]):
        if isinstance(f, Atom):
            return self._atom(f)
        if isinstance(f, Not):
            v, axes = self._eval(f.body, bound)
            return self.be.rsub(1.0, v), axes
        if isinstance(f, (And, Or, Implies)):
            a, axes = self._align(self._eval(f.left, bound), self._eval(f.right, bound))
            va, vb = a
            prod = self.be.mul(va, vb)
            if isinstance(f, And):
                return prod, axes
            if isinstance(f, Or):
                return self.be.sub(self.be.add(va, vb), prod), axes
            return self.be.add(self.be.rsub(1.0, va), prod), axes
        key = self.g.axis_key(f.var)
        if key in bound:
            # a joint partner already quantified this axis further out
            return self._eval(f.body, bound)
        v, axes = self._eval(f.body, bound | {key})
        if key not in axes:
            return v, axes
        i = axes.index(key)
        p = self.cfg.p_forall if isinstance(f, ForAll) else self.cfg.p_exists
        agg = self._forall(v, i, p) if isinstance(f, ForAll) else self._exists(v, i, p)
        return agg, axes[:i] + axes[i + 1 :]

    def _source(self, var: str):
        if var not in self._sources:
            part = self.g.variables[var]
            if part.data is not None:
                self._sources[var] = self.be.const(part.data)
            else:
                self._sources[var] = self.be.gather(self.be.embeddings(), part.indices)
        return self._sources[var]

    def _atom(self, f: Atom):
        memo = (f.predicate, f.args)
        if memo in self._atoms:
            return self._atoms[memo]
        axes: list[str] = []
        for v in f.args:
            k = self.g.axis_key(v)
            if k not in axes:
                axes.append(k)
        sizes = {}
        for v in f.args:
            sizes[self.g.axis_key(v)] = len(self.g.variables[v])
        shape = tuple(sizes[k] for k in axes)
        if len(f.args) == 1:
            x = self._source(f.args[0])
        else:
            grid = np.indices(shape).reshape(len(shape), -1)
            parts = [self.be.gather(self._source(v), grid[axes.index(self.g.axis_key(v))]) for v in f.args]
            x = self.be.concat(parts, 1)
        out = self.be.network(f.predicate, x)
        if len(shape) != 1:
            out = self.be.reshape(out, shape)
        res = (out, tuple(axes))
        self._atoms[memo] = res
        return res

    def _align(self, left, right):
        (va, ax_a), (vb, ax_b) = left, right
        if ax_a == ax_b:
            return (va, vb), ax_a
        union = ax_a + tuple(k for k in ax_b if k not in ax_a)
        sa = self._shape(va)
        sb = self._shape(vb)
        va = self.be.reshape(va, sa + (1,) * (len(union) - len(ax_a)))
        order = sorted(range(len(ax_b)), key=lambda i: union.index(ax_b[i]))
        if order != list(range(len(ax_b))):
            vb = self.be.transpose(vb, tuple(order))
            sb = tuple(sb[i] for i in order)
        present = {ax_b[i]: sb[j] for j, i in enumerate(order)}
        vb = self.be.reshape(vb, tuple(present.get(k, 1) for k in union))
        return (va, vb), union

    def _shape(self, v) -> tuple[int, ...]:
        return tuple(np.shape(self.be.value(v)))


def formula_sat(
    f: Formula,
    groundings: GroundingTable,
    cfg: ConnectiveConfig = ConnectiveConfig(),
    graph: Graph | None = None,
    validate: bool = True,
):
    """Truth value of ``f`` as a node on ``graph`` (a new graph if not given).

    Returns ``(graph, node)``; ``graph.value(node)`` is the scalar truth value
    and ``graph.backward(node)`` its gradient w.r.t. every predicate parameter
    and the embeddings.
    """
    if validate:
        issues = validate_formula(f, groundings)
        if issues:
            raise KBError("; ".join(map(str, issues)))
    be = GraphBackend(groundings, graph)
    node = Evaluator(groundings, cfg, be).sat(f)
    return be.graph, node


def evaluate(f: Formula, groundings: GroundingTable, cfg: ConnectiveConfig = ConnectiveConfig()) -> float:
    return float(Evaluator(groundings, cfg).sat(f))
