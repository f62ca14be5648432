"""Baseline dense regression heads, including the cost-matched variant.

The cost-matched stack inserts a 1125-neuron ReLU layer in front of the
standard in->128->1 shape so its multiply count lands within a few percent
of the default spline head's.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .ops import default_dtype, relu

MATCHED_HIDDEN = 1125


@dataclass
class MlpLayer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "none"  # relu | none

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise ShapeError("weight must be [out, in]")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"bias length {self.bias.shape} != out dim {self.weight.shape[0]}"
            )
        if self.activation not in ("relu", "none"):
            raise ShapeError(f"unsupported mlp activation {self.activation!r}")


class MlpStack:
    """Affine + ReLU chain; the final layer is always linear."""

    def __init__(self, layers: list[MlpLayer]):
        for a, b in zip(layers, layers[1:]):
            if a.weight.shape[0] != b.weight.shape[1]:
                raise ShapeError(
                    f"layer dims do not chain: {a.weight.shape[0]} -> {b.weight.shape[1]}"
                )
        if layers and layers[-1].activation != "none":
            raise ShapeError("final layer must have no activation")
        self.layers = layers

    @classmethod
    def build(cls, dims: list[int], rng: np.random.Generator | None = None) -> "MlpStack":
        """Kaiming-uniform weights (if rng given), zero biases, hidden ReLU."""
        dt = default_dtype()
        layers = []
        for idx, (i, o) in enumerate(zip(dims, dims[1:])):
            if rng is None:
                w = np.zeros((o, i), dtype=dt)
            else:
                bound = np.sqrt(3.0 / i)
                w = rng.uniform(-bound, bound, size=(o, i)).astype(dt)
            act = "relu" if idx < len(dims) - 2 else "none"
            layers.append(MlpLayer(w, np.zeros(o, dtype=dt), act))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def forward(self, x: np.ndarray):
        x = np.asarray(x)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"input dim {x.shape[-1]} != stack in_dim {self.in_dim}")
        single = x.ndim == 1
        h = x[None, :] if single else x
        steps = []
        for layer in self.layers:
            pre = h @ layer.weight.T + layer.bias
            steps.append({"x": h, "pre": pre})
            h = relu(pre) if layer.activation == "relu" else pre
        cache = {"steps": steps, "single": single, "stack_id": id(self)}
        return (h[0] if single else h), cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, grad_y: np.ndarray, cache: dict):
        if cache.get("stack_id") != id(self):
            raise ShapeError("backward called with a cache from a different stack")
        grad_y = np.asarray(grad_y)
        single = cache["single"]
        g = grad_y[None, :] if single else grad_y
        grads = [None] * len(self.layers)
        for i in reversed(range(len(self.layers))):
            layer, step = self.layers[i], cache["steps"][i]
            if layer.activation == "relu":
                g = g * (step["pre"] > 0)
            grads[i] = {"weight": g.T @ step["x"], "bias": g.sum(axis=0)}
            g = g @ layer.weight
        return (g[0] if single else g), grads

    def parameters(self) -> list[dict[str, np.ndarray]]:
        return [{"weight": l.weight, "bias": l.bias} for l in self.layers]

    def set_parameters(self, params: list[dict[str, np.ndarray]]) -> None:
        for layer, p in zip(self.layers, params):
            layer.weight = p["weight"]
            layer.bias = p["bias"]


def build_matched_mlp(in_dim: int, rng: np.random.Generator | None = None) -> MlpStack:
    """in -> 1125 -> 128 -> 1 ReLU stack, multiply-count matched to the
    default spline head of the same input width."""
    return MlpStack.build([in_dim, MATCHED_HIDDEN, 128, 1], rng)
