"""Small dense networks used as predicate groundings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Graph, _elu, _sigmoid, affine

ACTIVATIONS = ("elu", "sigmoid", "identity")


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "elu"

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError(f"bad layer shapes: weight {self.weight.shape}, bias {self.bias.shape}")


def _activate(x: np.ndarray, tag: str) -> np.ndarray:
    if tag == "elu":
        return _elu(x)
    if tag == "sigmoid":
        return _sigmoid(x)
    return x


@dataclass
class DenseNetwork:
    layers: list[Layer]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.weight.shape[0] != b.weight.shape[1]:
                raise ValueError(
                    f"layer {i} outputs {a.weight.shape[0]} values but layer {i + 1} "
                    f"expects {b.weight.shape[1]}"
                )

    @classmethod
    def init(
        cls,
        input_dim: int,
        hidden: tuple[int, ...] = (16, 16),
        rng: np.random.Generator | None = None,
        activation: str = "elu",
    ) -> DenseNetwork:
        """Glorot-uniform weights, zero biases, sigmoid head with one output."""
        rng = rng if rng is not None else np.random.default_rng(0)
        dims = [input_dim, *hidden, 1]
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            act = "sigmoid" if i == len(dims) - 2 else activation
            layers.append(Layer(w, np.zeros(fan_out), act))
        return cls(layers)

    @classmethod
    def zeros(cls, input_dim: int, hidden: tuple[int, ...] = (16, 16)) -> DenseNetwork:
        dims = [input_dim, *hidden, 1]
        layers = [
            Layer(np.zeros((o, i)), np.zeros(o), "sigmoid" if k == len(dims) - 2 else "elu")
            for k, (i, o) in enumerate(zip(dims, dims[1:]))
        ]
        return cls(layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    def parameters(self) -> dict[str, np.ndarray]:
        """Parameter arrays keyed by local name. The arrays are the live ones."""
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"W{i}"] = layer.weight
            out[f"b{i}"] = layer.bias
        return out

    def copy(self) -> DenseNetwork:
        return DenseNetwork([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def _check_width(self, width: int) -> None:
        if width != self.input_dim:
            raise ValueError(f"expected input rows of width {self.input_dim}, got {width}")

    def apply(self, rows: np.ndarray) -> np.ndarray:
        """One output per input row."""
        x = np.asarray(rows, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        self._check_width(x.shape[1])
        for layer in self.layers:
            x = _activate(affine(x, layer.weight, layer.bias), layer.activation)
        return x[:, 0]

    def apply_graph(self, g: Graph, x: int, params: dict[str, int]) -> int:
        """Add this network to ``g``; ``params`` maps local parameter names to leaf ids."""
        if g.nodes[x].value is not None:
            self._check_width(g.value(x).shape[1])
        for i, layer in enumerate(self.layers):
            x = g.affine(x, params[f"W{i}"], params[f"b{i}"])
            if layer.activation == "elu":
                x = g.elu(x)
            elif layer.activation == "sigmoid":
                x = g.sigmoid(x)
        return g.reshape(x, (-1,))


def network_apply(net: DenseNetwork, rows: np.ndarray) -> np.ndarray:
    return net.apply(rows)
