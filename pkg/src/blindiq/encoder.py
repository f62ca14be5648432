"""Forward-only feature extractors producing the 1000-wide embedding.

Two architectures ship:

* ``mobilenet_v3_large`` — the standard large mobile CNN, built from its
  published inverted-bottleneck table, with batch norm folded into each
  convolution's weight/bias at file-creation time.  Squeeze-excitation
  reduces to ``round8(expansion / 4)`` channels.
* ``tiny`` — a four-stage stride-2 CNN (3->16->32->64->128, ReLU) with a
  128->1000 linear top.  Under 500k parameters; the desk-scale stand-in
  used throughout the tests.

An encoder is a flat op plan interpreted by :func:`encoder_forward`; the
same plan drives weight validation, random initialization, and complexity
accounting, so the four can never drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, WeightsValidationError
from .ops import activation, conv2d, default_dtype, global_avg_pool, linear

MOBILENET_V3_LARGE = "mobilenet_v3_large"
TINY = "tiny"
ENCODER_KINDS = (MOBILENET_V3_LARGE, TINY)

FEATURE_DIM = 1000
MIN_INPUT = 32


@dataclass(frozen=True)
class ConvOp:
    name: str
    in_ch: int
    out_ch: int
    kernel: int
    stride: int
    padding: int
    groups: int
    act: str


@dataclass(frozen=True)
class SEOp:
    """Squeeze-excitation: pool -> fc1 relu -> fc2 hard_sigmoid -> rescale."""

    name: str
    channels: int
    squeeze: int


@dataclass(frozen=True)
class GapOp:
    name: str = "pool"


@dataclass(frozen=True)
class LinearOp:
    name: str
    in_dim: int
    out_dim: int
    act: str


@dataclass(frozen=True)
class SaveOp:
    pass


@dataclass(frozen=True)
class AddSavedOp:
    pass


@dataclass(frozen=True)
class EncoderSpec:
    kind: str
    plan: tuple
    feature_dim: int = FEATURE_DIM


def _round8(v: int) -> int:
    new = max(8, (v + 4) // 8 * 8)
    if new < 0.9 * v:
        new += 8
    return new


# (kernel, expansion, out, use_se, activation, stride) per inverted bottleneck.
_V3_LARGE_BLOCKS = (
    (3, 16, 16, False, "relu", 1),
    (3, 64, 24, False, "relu", 2),
    (3, 72, 24, False, "relu", 1),
    (5, 72, 40, True, "relu", 2),
    (5, 120, 40, True, "relu", 1),
    (5, 120, 40, True, "relu", 1),
    (3, 240, 80, False, "hard_swish", 2),
    (3, 200, 80, False, "hard_swish", 1),
    (3, 184, 80, False, "hard_swish", 1),
    (3, 184, 80, False, "hard_swish", 1),
    (3, 480, 112, True, "hard_swish", 1),
    (3, 672, 112, True, "hard_swish", 1),
    (5, 672, 160, True, "hard_swish", 2),
    (5, 960, 160, True, "hard_swish", 1),
    (5, 960, 160, True, "hard_swish", 1),
)


def _mobilenet_v3_large_plan() -> tuple:
    plan: list = [ConvOp("stem", 3, 16, 3, 2, 1, 1, "hard_swish")]
    in_ch = 16
    for i, (k, exp, out, use_se, act, stride) in enumerate(_V3_LARGE_BLOCKS, start=1):
        block = f"block{i:02d}"
        residual = stride == 1 and in_ch == out
        if residual:
            plan.append(SaveOp())
        if exp != in_ch:
            plan.append(ConvOp(f"{block}.expand", in_ch, exp, 1, 1, 0, 1, act))
        plan.append(ConvOp(f"{block}.depthwise", exp, exp, k, stride, k // 2, exp, act))
        if use_se:
            plan.append(SEOp(f"{block}.se", exp, _round8(exp // 4)))
        plan.append(ConvOp(f"{block}.project", exp, out, 1, 1, 0, 1, "none"))
        if residual:
            plan.append(AddSavedOp())
        in_ch = out
    plan.append(ConvOp("top.conv", in_ch, 960, 1, 1, 0, 1, "hard_swish"))
    plan.append(GapOp())
    plan.append(LinearOp("top.fc1", 960, 1280, "hard_swish"))
    plan.append(LinearOp("top.fc2", 1280, FEATURE_DIM, "none"))
    return tuple(plan)


def _tiny_plan() -> tuple:
    chans = (16, 32, 64, 128)
    plan: list = []
    in_ch = 3
    for i, out in enumerate(chans, start=1):
        plan.append(ConvOp(f"stage{i}", in_ch, out, 3, 2, 1, 1, "relu"))
        in_ch = out
    plan.append(GapOp())
    plan.append(LinearOp("fc", in_ch, FEATURE_DIM, "none"))
    return tuple(plan)


def make_encoder_spec(kind: str) -> EncoderSpec:
    if kind == MOBILENET_V3_LARGE:
        return EncoderSpec(kind, _mobilenet_v3_large_plan())
    if kind == TINY:
        return EncoderSpec(kind, _tiny_plan())
    raise ShapeError(f"unknown encoder kind {kind!r}")


def expected_tensors(spec: EncoderSpec) -> dict[str, tuple[int, ...]]:
    """name -> shape for every tensor the plan needs."""
    out: dict[str, tuple[int, ...]] = {}
    for op in spec.plan:
        if isinstance(op, ConvOp):
            out[f"{op.name}.weight"] = (op.out_ch, op.in_ch // op.groups, op.kernel, op.kernel)
            out[f"{op.name}.bias"] = (op.out_ch,)
        elif isinstance(op, SEOp):
            out[f"{op.name}.fc1.weight"] = (op.squeeze, op.channels)
            out[f"{op.name}.fc1.bias"] = (op.squeeze,)
            out[f"{op.name}.fc2.weight"] = (op.channels, op.squeeze)
            out[f"{op.name}.fc2.bias"] = (op.channels,)
        elif isinstance(op, LinearOp):
            out[f"{op.name}.weight"] = (op.out_dim, op.in_dim)
            out[f"{op.name}.bias"] = (op.out_dim,)
    return out


@dataclass
class ValidationReport:
    missing: list[str]
    extra: list[str]
    mismatched: list[tuple[str, tuple, tuple]]  # name, expected, actual

    @property
    def ok(self) -> bool:
        return not (self.missing or self.extra or self.mismatched)

    def summary(self) -> str:
        lines = []
        for name in self.missing:
            lines.append(f"missing tensor {name}")
        for name, want, got in self.mismatched:
            lines.append(f"shape mismatch for {name}: expected {want}, found {got}")
        for name in self.extra:
            lines.append(f"unexpected tensor {name}")
        return "\n".join(lines) if lines else "ok"


def validate_weights(spec: EncoderSpec, store: dict[str, np.ndarray]) -> ValidationReport:
    expected = expected_tensors(spec)
    missing = sorted(set(expected) - set(store))
    extra = sorted(set(store) - set(expected))
    mismatched = [
        (name, expected[name], tuple(store[name].shape))
        for name in sorted(set(expected) & set(store))
        if tuple(store[name].shape) != expected[name]
    ]
    return ValidationReport(missing, extra, mismatched)


def init_random_weights(spec: EncoderSpec, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Kaiming-uniform weights, zero biases, in the engine's default dtype."""
    dt = default_dtype()
    store: dict[str, np.ndarray] = {}
    for name, shape in expected_tensors(spec).items():
        if name.endswith(".bias"):
            store[name] = np.zeros(shape, dtype=dt)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(3.0 / fan_in)
            store[name] = rng.uniform(-bound, bound, size=shape).astype(dt)
    return store


def _check_store(spec: EncoderSpec, store: dict[str, np.ndarray]) -> None:
    report = validate_weights(spec, store)
    if report.missing or report.mismatched:
        first = report.missing[0] if report.missing else report.mismatched[0][0]
        raise WeightsValidationError(
            f"weight store does not match {spec.kind} (first problem: {first})\n"
            + report.summary()
        )


def encoder_forward(spec: EncoderSpec, store: dict[str, np.ndarray],
                    x: np.ndarray) -> np.ndarray:
    """Run the plan on a [3,H,W] tensor; returns the 1000-dim embedding."""
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[0] != 3:
        raise ShapeError(f"encoder input must be [3,H,W], got {x.shape}")
    if x.shape[1] < MIN_INPUT or x.shape[2] < MIN_INPUT:
        raise ShapeError(
            f"encoder input {x.shape[1]}x{x.shape[2]} below minimum {MIN_INPUT}x{MIN_INPUT}"
        )
    _check_store(spec, store)
    saved = None
    vec: np.ndarray | None = None
    for op in spec.plan:
        if isinstance(op, SaveOp):
            saved = x
        elif isinstance(op, AddSavedOp):
            x = x + saved
        elif isinstance(op, ConvOp):
            x = conv2d(
                x,
                store[f"{op.name}.weight"],
                store[f"{op.name}.bias"],
                stride=(op.stride, op.stride),
                padding=(op.padding, op.padding),
                groups=op.groups,
            )
            if op.act != "none":
                x = activation(x, op.act)
        elif isinstance(op, SEOp):
            pooled = global_avg_pool(x)
            hidden = np.maximum(
                store[f"{op.name}.fc1.weight"] @ pooled + store[f"{op.name}.fc1.bias"], 0
            )
            gate = store[f"{op.name}.fc2.weight"] @ hidden + store[f"{op.name}.fc2.bias"]
            gate = np.clip(gate / 6.0 + 0.5, 0.0, 1.0)
            x = x * gate[:, None, None]
        elif isinstance(op, GapOp):
            vec = global_avg_pool(x)
        elif isinstance(op, LinearOp):
            vec = linear(vec, store[f"{op.name}.weight"], store[f"{op.name}.bias"])
            if op.act != "none":
                vec = activation(vec, op.act)
        else:
            raise ShapeError(f"unknown plan op {op!r}")
    if vec is None or vec.shape != (spec.feature_dim,):
        raise ShapeError("encoder plan did not produce the feature vector")
    return vec


class Encoder:
    """Spec plus validated weights; immutable after construction."""

    def __init__(self, spec: EncoderSpec, store: dict[str, np.ndarray]):
        _check_store(spec, store)
        self.spec = spec
        self.store = store

    @classmethod
    def random(cls, kind: str, rng: np.random.Generator) -> "Encoder":
        spec = make_encoder_spec(kind)
        return cls(spec, init_random_weights(spec, rng))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return encoder_forward(self.spec, self.store, x)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)
