"""Spline-activation network layers.

Each edge (i -> j) of a layer carries a learnable univariate function

    phi(x) = base_scale * base_weight * silu(x) + sum_g coeff_g * B_g(x)

where B_g are the G+k B-spline basis functions of order ``k`` over a uniform
knot extension of [grid_min, grid_max] into G + 2k + 1 knots.  The silu path
makes phi a residual activation; the spline path is the trainable part.

Bases are evaluated by the Cox-de Boor recursion.  Inputs outside the grid
are not clamped: the recursion simply yields decaying (eventually zero)
basis values there, which is deterministic and differentiable.  Partition of
unity holds on the interior [grid_min, grid_max).

Gradients are analytic.  The basis derivative uses the standard recurrence

    B'_{i,k}(x) = k * ( B_{i,k-1}(x) / (t_{i+k} - t_i)
                      - B_{i+1,k-1}(x) / (t_{i+k+1} - t_{i+1}) ).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .ops import default_dtype, silu, silu_grad

DEFAULT_GRID_SIZE = 5
DEFAULT_SPLINE_ORDER = 3
DEFAULT_GRID_RANGE = (-1.0, 1.0)

# Initialization recipe (recorded in the weights file via the layer hyper
# parameters): base_scale = 1, base_weight ~ Kaiming-uniform over fan-in,
# spline_coeff ~ N(0, 0.1/(G+k)).
SPLINE_INIT_STD_NUM = 0.1


def make_knots(grid_size: int, spline_order: int, grid_min: float, grid_max: float,
               dtype=np.float64) -> np.ndarray:
    """Uniform knot vector extending the grid by ``spline_order`` on each side."""
    if grid_min >= grid_max:
        raise ShapeError("grid_min must be < grid_max")
    if grid_size < 1 or spline_order < 1:
        raise ShapeError("grid_size and spline_order must be >= 1")
    h = (grid_max - grid_min) / grid_size
    idx = np.arange(-spline_order, grid_size + spline_order + 1, dtype=np.float64)
    return (grid_min + idx * h).astype(dtype)


def bspline_bases(x: np.ndarray, knots: np.ndarray, order: int) -> np.ndarray:
    """All order-``order`` basis values at ``x``; output shape x.shape + (n_bases,)."""
    return _bases_with_lower(x, knots, order)[0]


def _bases_with_lower(x: np.ndarray, knots: np.ndarray, order: int):
    """Order-k bases plus the order-(k-1) bases the recursion passes through."""
    x = np.asarray(x)
    t = knots.astype(x.dtype if x.dtype.kind == "f" else np.float64)
    xe = x[..., None]
    b = ((xe >= t[:-1]) & (xe < t[1:])).astype(t.dtype)
    for d in range(1, order):
        left = (xe - t[: -(d + 1)]) / (t[d:-1] - t[: -(d + 1)]) * b[..., :-1]
        right = (t[d + 1 :] - xe) / (t[d + 1 :] - t[1:-d]) * b[..., 1:]
        b = left + right
    b_lower = b  # order k-1, one extra basis
    left = (xe - t[: -(order + 1)]) / (t[order:-1] - t[: -(order + 1)]) * b[..., :-1]
    right = (t[order + 1 :] - xe) / (t[order + 1 :] - t[1:-order]) * b[..., 1:]
    return left + right, b_lower


def _derivs_from_lower(b_lower: np.ndarray, knots: np.ndarray, order: int,
                       n_bases: int) -> np.ndarray:
    t = knots.astype(b_lower.dtype)
    d1 = t[order : order + n_bases] - t[:n_bases]
    d2 = t[order + 1 : order + 1 + n_bases] - t[1 : 1 + n_bases]
    return order * (b_lower[..., :n_bases] / d1 - b_lower[..., 1 : n_bases + 1] / d2)


def bspline_bases_and_derivs(x: np.ndarray, knots: np.ndarray, order: int):
    """Order-k bases and their first derivatives."""
    b_k, b_lower = _bases_with_lower(x, knots, order)
    return b_k, _derivs_from_lower(b_lower, knots, order, b_k.shape[-1])


@dataclass
class KanLayer:
    in_dim: int
    out_dim: int
    grid_size: int = DEFAULT_GRID_SIZE
    spline_order: int = DEFAULT_SPLINE_ORDER
    grid_min: float = DEFAULT_GRID_RANGE[0]
    grid_max: float = DEFAULT_GRID_RANGE[1]
    base_weight: np.ndarray = field(default=None, repr=False)
    spline_coeff: np.ndarray = field(default=None, repr=False)
    base_scale: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.knots = make_knots(self.grid_size, self.spline_order,
                                self.grid_min, self.grid_max)
        n = self.n_bases
        dt = default_dtype()
        if self.base_weight is None:
            self.base_weight = np.zeros((self.out_dim, self.in_dim), dtype=dt)
        if self.spline_coeff is None:
            self.spline_coeff = np.zeros((self.out_dim, self.in_dim, n), dtype=dt)
        if self.base_scale is None:
            self.base_scale = np.ones((self.out_dim, self.in_dim), dtype=dt)
        if self.base_weight.shape != (self.out_dim, self.in_dim):
            raise ShapeError(f"base_weight shape {self.base_weight.shape} != "
                             f"({self.out_dim}, {self.in_dim})")
        if self.spline_coeff.shape != (self.out_dim, self.in_dim, n):
            raise ShapeError(f"spline_coeff shape {self.spline_coeff.shape} != "
                             f"({self.out_dim}, {self.in_dim}, {n})")
        if self.base_scale.shape != (self.out_dim, self.in_dim):
            raise ShapeError(f"base_scale shape {self.base_scale.shape} != "
                             f"({self.out_dim}, {self.in_dim})")

    @property
    def n_bases(self) -> int:
        return self.grid_size + self.spline_order

    def init_random(self, rng: np.random.Generator) -> "KanLayer":
        bound = np.sqrt(3.0 / self.in_dim)
        dt = self.base_weight.dtype
        self.base_weight = rng.uniform(-bound, bound,
                                       size=self.base_weight.shape).astype(dt)
        self.spline_coeff = (rng.normal(0.0, SPLINE_INIT_STD_NUM / self.n_bases,
                                        size=self.spline_coeff.shape)).astype(dt)
        self.base_scale = np.ones_like(self.base_scale)
        return self

    def basis(self, x: float | np.ndarray) -> np.ndarray:
        """Basis vector(s) at x: trailing axis has G+k entries."""
        return bspline_bases(np.asarray(x, dtype=self.base_weight.dtype),
                             self.knots, self.spline_order)

    def forward(self, x: np.ndarray):
        """Returns (y, cache).  ``x`` is [in_dim] or [N, in_dim]."""
        x = np.asarray(x)
        if x.shape[-1] != self.in_dim:
            raise ShapeError(f"input dim {x.shape[-1]} != layer in_dim {self.in_dim}")
        single = x.ndim == 1
        xb = x[None, :] if single else x
        n = xb.shape[0]
        s = silu(xb)
        bases, bases_lower = _bases_with_lower(xb, self.knots, self.spline_order)
        w_eff = self.base_scale * self.base_weight
        flat_b = bases.reshape(n, self.in_dim * self.n_bases)
        flat_c = self.spline_coeff.reshape(self.out_dim, self.in_dim * self.n_bases)
        y = s @ w_eff.T + flat_b @ flat_c.T
        cache = {"x": xb, "silu": s, "bases": bases, "bases_lower": bases_lower,
                 "single": single, "layer_id": id(self)}
        return (y[0] if single else y), cache

    def backward(self, grad_y: np.ndarray, cache: dict):
        """Gradients of the forward map; returns (grad_x, grads dict)."""
        if cache.get("layer_id") != id(self):
            raise ShapeError("backward called with a cache from a different layer")
        grad_y = np.asarray(grad_y)
        single = cache["single"]
        gy = grad_y[None, :] if single else grad_y
        xb, s, bases = cache["x"], cache["silu"], cache["bases"]
        n = xb.shape[0]
        if gy.shape != (n, self.out_dim):
            raise ShapeError(f"grad_y shape {grad_y.shape} does not match forward "
                             f"output ({n}, {self.out_dim})")

        gy_s = gy.T @ s  # [out, in]
        grad_base_weight = gy_s * self.base_scale
        grad_base_scale = gy_s * self.base_weight
        flat_b = bases.reshape(n, self.in_dim * self.n_bases)
        grad_coeff = (gy.T @ flat_b).reshape(self.out_dim, self.in_dim, self.n_bases)

        w_eff = self.base_scale * self.base_weight
        dbases = _derivs_from_lower(cache["bases_lower"], self.knots,
                                    self.spline_order, self.n_bases)
        flat_c = self.spline_coeff.reshape(self.out_dim, self.in_dim * self.n_bases)
        spline_pull = (gy @ flat_c).reshape(n, self.in_dim, self.n_bases)
        grad_x = (gy @ w_eff) * silu_grad(xb) + (spline_pull * dbases).sum(axis=-1)

        grads = {
            "base_weight": grad_base_weight,
            "spline_coeff": grad_coeff,
            "base_scale": grad_base_scale,
        }
        return (grad_x[0] if single else grad_x), grads

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            "base_weight": self.base_weight,
            "spline_coeff": self.spline_coeff,
            "base_scale": self.base_scale,
        }

    def set_parameters(self, params: dict[str, np.ndarray]) -> None:
        self.base_weight = params["base_weight"]
        self.spline_coeff = params["spline_coeff"]
        self.base_scale = params["base_scale"]

    def complexity_descriptor(self) -> dict:
        return {"kind": "kan", "in_dim": self.in_dim, "out_dim": self.out_dim,
                "grid_size": self.grid_size, "spline_order": self.spline_order}


class KanStack:
    """Chain of KanLayers; consecutive dims must agree."""

    def __init__(self, layers: list[KanLayer]):
        for a, b in zip(layers, layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeError(f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
        self.layers = layers

    @classmethod
    def build(cls, dims: list[int], rng: np.random.Generator | None = None,
              grid_size: int = DEFAULT_GRID_SIZE,
              spline_order: int = DEFAULT_SPLINE_ORDER,
              grid_range: tuple[float, float] = DEFAULT_GRID_RANGE) -> "KanStack":
        layers = [
            KanLayer(i, o, grid_size=grid_size, spline_order=spline_order,
                     grid_min=grid_range[0], grid_max=grid_range[1])
            for i, o in zip(dims, dims[1:])
        ]
        if rng is not None:
            for layer in layers:
                layer.init_random(rng)
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def forward(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, grad_y: np.ndarray, caches: list):
        grads = [None] * len(self.layers)
        for i in reversed(range(len(self.layers))):
            grad_y, grads[i] = self.layers[i].backward(grad_y, caches[i])
        return grad_y, grads

    def parameters(self) -> list[dict[str, np.ndarray]]:
        return [layer.parameters() for layer in self.layers]

    def set_parameters(self, params: list[dict[str, np.ndarray]]) -> None:
        for layer, p in zip(self.layers, params):
            layer.set_parameters(p)
