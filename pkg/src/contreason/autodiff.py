"""Reverse-mode automatic differentiation over a Wengert list.

A :class:`Graph` is an append-only list of nodes. Each node records its
operation, the ids of its inputs and a cached value. Values are numpy arrays
(a scalar is a 0-d array), which keeps the list short even when a predicate
network is applied to a few hundred individuals at once.

Nodes are referred to by integer id. Leaves carry a name; trainable leaves are
what :meth:`Graph.backward` reports gradients for.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

# Floor applied to the base of fractional powers when computing their derivative.
# It only has to turn 0 * inf into 0 at an exactly-zero base: for exponents in
# (0, 1) the factor base**(k - 1) stays below 1 / POW_GRAD_EPS, which is finite.
# A larger floor (say 1e-7) would visibly bias the gradient of nearly
# satisfied formulas.
POW_GRAD_EPS = 1e-300


class GraphError(Exception):
    pass


class MissingLeafError(GraphError):
    def __init__(self, name: str):
        super().__init__(f"no value for leaf {name!r}")
        self.leaf = name


class NotEvaluatedError(GraphError):
    pass


@dataclass
class Node:
    op: str
    inputs: tuple[int, ...]
    value: np.ndarray | None = None
    attrs: dict[str, Any] = field(default_factory=dict)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # two-branch form avoids overflow in exp for large |x|
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _elu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def affine(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``x @ weight.T + bias`` computed row by row.

    einsum reduces each output entry on its own (no blocked BLAS kernel), so a
    row's result is bit-identical whether it is passed alone or in a batch.
    """
    return np.einsum("ij,kj->ik", x, weight) + bias


# Forward rules: f(attrs, *input_values) -> value
_FORWARD: dict[str, Callable[..., np.ndarray]] = {
    "add": lambda at, a, b: a + b,
    "sub": lambda at, a, b: a - b,
    "mul": lambda at, a, b: a * b,
    "neg": lambda at, a: -a,
    "rsub": lambda at, a: at["c"] - a,
    "scale": lambda at, a: at["c"] * a,
    "pow": lambda at, a: np.power(a, at["k"]),
    "sigmoid": lambda at, a: _sigmoid(a),
    "elu": lambda at, a: _elu(a),
    "affine": lambda at, x, w, b: affine(x, w, b),
    "matmul": lambda at, a, b: a @ b,
    "sum": lambda at, a: a.sum(axis=at["axis"]),
    "mean": lambda at, a: a.mean(axis=at["axis"]),
    "gather": lambda at, a: a[at["index"]],
    "concat": lambda at, *xs: np.concatenate(xs, axis=at["axis"]),
    "reshape": lambda at, a: a.reshape(at["shape"]),
    "transpose": lambda at, a: a.transpose(at["axes"]),
}


def _vjp(node: Node, g: np.ndarray, vals: list[np.ndarray]) -> list[np.ndarray]:
    """Vector-Jacobian products of ``node`` for each of its inputs."""
    op, at = node.op, node.attrs
    out = node.value
    if op == "add":
        return [_unbroadcast(g, vals[0].shape), _unbroadcast(g, vals[1].shape)]
    if op == "sub":
        return [_unbroadcast(g, vals[0].shape), _unbroadcast(-g, vals[1].shape)]
    if op == "mul":
        a, b = vals
        return [_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)]
    if op == "neg":
        return [-g]
    if op == "rsub":
        return [-g]
    if op == "scale":
        return [at["c"] * g]
    if op == "pow":
        k = at["k"]
        a = vals[0]
        if k == int(k) and k >= 1:
            return [g * k * np.power(a, k - 1)]
        # fractional exponent: guard the derivative near zero only
        return [g * k * np.power(np.maximum(a, POW_GRAD_EPS), k - 1)]
    if op == "sigmoid":
        return [g * out * (1.0 - out)]
    if op == "elu":
        a = vals[0]
        return [g * np.where(a > 0, 1.0, out + 1.0)]
    if op == "affine":
        x, w, _ = vals
        return [g @ w, g.T @ x, g.sum(axis=0)]
    if op == "matmul":
        a, b = vals
        if a.ndim == 1 and b.ndim == 1:
            return [g * b, g * a]
        if a.ndim == 1:
            return [b @ g, np.outer(a, g)]
        if b.ndim == 1:
            return [np.outer(g, b), a.T @ g]
        return [g @ b.T, a.T @ g]
    if op in ("sum", "mean"):
        a = vals[0]
        axis = at["axis"]
        if axis is None:
            grad = np.broadcast_to(g, a.shape)
            n = a.size
        else:
            grad = np.broadcast_to(np.expand_dims(g, axis), a.shape)
            n = a.shape[axis]
        grad = np.array(grad, dtype=float)
        return [grad / n if op == "mean" else grad]
    if op == "gather":
        grad = np.zeros_like(vals[0], dtype=float)
        np.add.at(grad, at["index"], g)
        return [grad]
    if op == "concat":
        axis = at["axis"]
        cuts = np.cumsum([v.shape[axis] for v in vals])[:-1]
        return list(np.split(g, cuts, axis=axis))
    if op == "reshape":
        return [g.reshape(vals[0].shape)]
    if op == "transpose":
        return [g.transpose(np.argsort(at["axes"]))]
    raise GraphError(f"no derivative rule for {op!r}")


class Graph:
    """Append-only computation graph.

    Every builder method evaluates eagerly when its inputs have values, and
    returns the id of the new node.
    """

    def __init__(self) -> None:
        self.nodes: list[Node] = []
        self.leaves: dict[str, int] = {}
        self._trainable: set[str] = set()

    def __len__(self) -> int:
        return len(self.nodes)

    def _push(self, op: str, inputs: tuple[int, ...], **attrs: Any) -> int:
        for i in inputs:
            if not 0 <= i < len(self.nodes):
                raise GraphError(f"input {i} does not reference an earlier node")
        node = Node(op, inputs, None, attrs)
        vals = [self.nodes[i].value for i in inputs]
        if all(v is not None for v in vals):
            node.value = np.asarray(_FORWARD[op](attrs, *vals), dtype=float)
        self.nodes.append(node)
        return len(self.nodes) - 1

    # -- leaves -----------------------------------------------------------
    def leaf(self, name: str, value: Any = None, trainable: bool = True) -> int:
        if name in self.leaves:
            raise GraphError(f"duplicate leaf {name!r}")
        v = None if value is None else np.array(value, dtype=float)
        self.nodes.append(Node("leaf", (), v, {"name": name}))
        idx = len(self.nodes) - 1
        self.leaves[name] = idx
        if trainable:
            self._trainable.add(name)
        return idx

    def const(self, value: Any) -> int:
        self.nodes.append(Node("const", (), np.array(value, dtype=float)))
        return len(self.nodes) - 1

    # -- operations -------------------------------------------------------
    def add(self, a: int, b: int) -> int:
        return self._push("add", (a, b))

    def sub(self, a: int, b: int) -> int:
        return self._push("sub", (a, b))

    def mul(self, a: int, b: int) -> int:
        return self._push("mul", (a, b))

    def neg(self, a: int) -> int:
        return self._push("neg", (a,))

    def rsub(self, c: float, a: int) -> int:
        """``c - a`` for a constant ``c``."""
        return self._push("rsub", (a,), c=float(c))

    def scale(self, c: float, a: int) -> int:
        return self._push("scale", (a,), c=float(c))

    def pow(self, a: int, k: float) -> int:
        return self._push("pow", (a,), k=float(k))

    def sigmoid(self, a: int) -> int:
        return self._push("sigmoid", (a,))

    def elu(self, a: int) -> int:
        return self._push("elu", (a,))

    def affine(self, x: int, weight: int, bias: int) -> int:
        return self._push("affine", (x, weight, bias))

    def matmul(self, a: int, b: int) -> int:
        return self._push("matmul", (a, b))

    def sum(self, a: int, axis: int | None = None) -> int:
        return self._push("sum", (a,), axis=axis)

    def mean(self, a: int, axis: int | None = None) -> int:
        return self._push("mean", (a,), axis=axis)

    def gather(self, a: int, index: Any) -> int:
        return self._push("gather", (a,), index=np.asarray(index, dtype=np.intp))

    def concat(self, parts: list[int], axis: int = -1) -> int:
        return self._push("concat", tuple(parts), axis=axis)

    def reshape(self, a: int, shape: tuple[int, ...]) -> int:
        return self._push("reshape", (a,), shape=tuple(shape))

    def transpose(self, a: int, axes: tuple[int, ...]) -> int:
        return self._push("transpose", (a,), axes=tuple(axes))

    # -- evaluation -------------------------------------------------------
    def value(self, node: int) -> np.ndarray:
        v = self.nodes[node].value
        if v is None:
            raise NotEvaluatedError(f"node {node} has no value; run forward() first")
        return v

    def forward(self, leaf_values: Mapping[str, Any] | None = None) -> dict[int, np.ndarray]:
        """Re-evaluate every node, overriding leaf values from ``leaf_values``."""
        leaf_values = leaf_values or {}
        unknown = set(leaf_values) - set(self.leaves)
        if unknown:
            raise GraphError(f"unknown leaves: {sorted(unknown)}")
        out: dict[int, np.ndarray] = {}
        for idx, node in enumerate(self.nodes):
            if node.op == "leaf":
                name = node.attrs["name"]
                if name in leaf_values:
                    node.value = np.array(leaf_values[name], dtype=float)
                elif node.value is None:
                    raise MissingLeafError(name)
            elif node.op != "const":
                vals = [self.nodes[i].value for i in node.inputs]
                node.value = np.asarray(_FORWARD[node.op](node.attrs, *vals), dtype=float)
            out[idx] = node.value
        return out

    def backward(self, root: int) -> dict[str, np.ndarray]:
        """Gradient of the scalar ``root`` with respect to every trainable leaf."""
        rv = self.nodes[root].value
        if rv is None:
            raise NotEvaluatedError(f"root {root} has not been evaluated")
        if rv.size != 1:
            raise GraphError(f"root must be scalar, got shape {rv.shape}")
        adj: dict[int, np.ndarray] = {root: np.ones_like(rv)}
        for idx in range(root, -1, -1):
            g = adj.pop(idx, None)
            if g is None:
                continue
            node = self.nodes[idx]
            if node.op == "leaf":
                adj[idx] = g
                continue
            if not node.inputs:
                continue
            vals = [self.nodes[i].value for i in node.inputs]
            for i, gi in zip(node.inputs, _vjp(node, g, vals)):
                adj[i] = adj[i] + gi if i in adj else gi
        grads = {}
        for name in self._trainable:
            idx = self.leaves[name]
            if idx in adj:
                grads[name] = np.asarray(adj[idx], dtype=float)
            elif idx <= root:
                grads[name] = np.zeros_like(self.nodes[idx].value)
        return grads


def graph_forward(graph: Graph, leaf_values: Mapping[str, Any] | None = None) -> dict[int, np.ndarray]:
    return graph.forward(leaf_values)


def graph_backward(graph: Graph, root: int) -> dict[str, np.ndarray]:
    return graph.backward(root)
