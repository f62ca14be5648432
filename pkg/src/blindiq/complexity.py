"""MAC and parameter accounting.

Conventions (also printed in every report header):

* 1 MAC = one multiply-accumulate, so 1 MAC is roughly 2 FLOPs.
* conv:   macs = K_h*K_w*(C_in/groups)*C_out*H_out*W_out,
          params = K_h*K_w*(C_in/groups)*C_out + C_out
* linear: macs = in*out, params = in*out + out
* spline (KAN) layer: macs = in*out*(G+k+2)  [spline dot products + base
          path + scale], params = in*out*(G+k) + 2*in*out
* activations and pooling: 0 MACs.
* squeeze-excitation: 0 MACs in the default "headline" mode (matching the
  common profiler convention); ``strict`` mode adds its fc multiplies, the
  per-pixel channel rescale, and the hard-activation multiplies.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

from .encoder import AddSavedOp, ConvOp, EncoderSpec, GapOp, LinearOp, SaveOp, SEOp
from .errors import ShapeError
from .kan import KanLayer, KanStack
from .mlp import MlpLayer, MlpStack

HEADLINE = "headline"
STRICT = "strict"

_HARD_ACT_MULTS = {"hard_swish": 2, "hard_sigmoid": 1, "relu": 0, "none": 0, "silu": 0}


@dataclass
class LayerCount:
    name: str
    kind: str
    macs: int
    params: int


@dataclass
class ComplexityReport:
    rows: list[LayerCount]
    mode: str
    inputs: dict[str, tuple[int, int]]

    @property
    def total_macs(self) -> int:
        return sum(r.macs for r in self.rows)

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    def header(self) -> str:
        dims = ", ".join(f"{k}={h}x{w}" for k, (h, w) in self.inputs.items())
        return (f"# complexity ({self.mode} mode; 1 MAC = 1 multiply-accumulate "
                f"~= 2 FLOPs); inputs: {dims or 'n/a'}")

    def to_text(self) -> str:
        out = io.StringIO()
        print(self.header(), file=out)
        width = max([len(r.name) for r in self.rows] + [5])
        print(f"{'layer':<{width}}  {'kind':<6}  {'MACs':>14}  {'params':>12}", file=out)
        for r in self.rows:
            print(f"{r.name:<{width}}  {r.kind:<6}  {r.macs:>14,}  {r.params:>12,}", file=out)
        print(f"{'TOTAL':<{width}}  {'':<6}  {self.total_macs:>14,}  "
              f"{self.total_params:>12,}", file=out)
        return out.getvalue()

    def to_csv(self) -> str:
        lines = ["layer,kind,macs,params"]
        lines += [f"{r.name},{r.kind},{r.macs},{r.params}" for r in self.rows]
        lines.append(f"TOTAL,,{self.total_macs},{self.total_params}")
        return "\n".join(lines) + "\n"


def conv_out_hw(h: int, w: int, op: ConvOp) -> tuple[int, int]:
    h_out = (h + 2 * op.padding - op.kernel) // op.stride + 1
    w_out = (w + 2 * op.padding - op.kernel) // op.stride + 1
    if h_out < 1 or w_out < 1:
        raise ShapeError(f"conv {op.name}: input {h}x{w} too small")
    return h_out, w_out


def count_layer(desc, input_hw: tuple[int, int] | None = None,
                mode: str = HEADLINE) -> tuple[int, int]:
    """(macs, params) for one layer descriptor.

    ``input_hw`` is required for spatial layers (conv / squeeze-excitation).
    """
    if isinstance(desc, ConvOp):
        h, w = input_hw
        h_out, w_out = conv_out_hw(h, w, desc)
        per_pos = desc.kernel * desc.kernel * (desc.in_ch // desc.groups) * desc.out_ch
        macs = per_pos * h_out * w_out
        if mode == STRICT:
            macs += _HARD_ACT_MULTS[desc.act] * desc.out_ch * h_out * w_out
        params = per_pos + desc.out_ch
        return macs, params
    if isinstance(desc, SEOp):
        params = (desc.channels * desc.squeeze + desc.squeeze
                  + desc.squeeze * desc.channels + desc.channels)
        macs = 0
        if mode == STRICT:
            h, w = input_hw
            macs = (desc.channels * desc.squeeze * 2  # the two fc layers
                    + desc.channels  # hard_sigmoid on the gate
                    + desc.channels * h * w)  # per-pixel rescale
        return macs, params
    if isinstance(desc, LinearOp):
        macs = desc.in_dim * desc.out_dim
        if mode == STRICT:
            macs += _HARD_ACT_MULTS[desc.act] * desc.out_dim
        return macs, desc.in_dim * desc.out_dim + desc.out_dim
    if isinstance(desc, KanLayer):
        edges = desc.in_dim * desc.out_dim
        n = desc.grid_size + desc.spline_order
        return edges * (n + 2), edges * n + 2 * edges
    if isinstance(desc, MlpLayer):
        out_dim, in_dim = desc.weight.shape
        return in_dim * out_dim, in_dim * out_dim + out_dim
    raise ShapeError(f"cannot count layer descriptor {desc!r}")


def count_encoder(spec: EncoderSpec, input_hw: tuple[int, int],
                  mode: str = HEADLINE, prefix: str = "") -> list[LayerCount]:
    h, w = input_hw
    rows: list[LayerCount] = []
    for op in spec.plan:
        if isinstance(op, (SaveOp, AddSavedOp, GapOp)):
            continue
        if isinstance(op, ConvOp):
            macs, params = count_layer(op, (h, w), mode)
            rows.append(LayerCount(prefix + op.name, "conv", macs, params))
            h, w = conv_out_hw(h, w, op)
        elif isinstance(op, SEOp):
            macs, params = count_layer(op, (h, w), mode)
            rows.append(LayerCount(prefix + op.name, "se", macs, params))
        elif isinstance(op, LinearOp):
            macs, params = count_layer(op, None, mode)
            rows.append(LayerCount(prefix + op.name, "linear", macs, params))
    return rows


def count_head(stack, prefix: str = "") -> list[LayerCount]:
    rows = []
    if isinstance(stack, KanStack):
        for i, layer in enumerate(stack.layers):
            macs, params = count_layer(layer)
            rows.append(LayerCount(f"{prefix}layer{i}", "kan", macs, params))
    elif isinstance(stack, MlpStack):
        for i, layer in enumerate(stack.layers):
            macs, params = count_layer(layer)
            rows.append(LayerCount(f"{prefix}layer{i}", "linear", macs, params))
    else:
        raise ShapeError(f"cannot count head of type {type(stack).__name__}")
    return rows


def count_model(model, auth_hw: tuple[int, int], synth_hw: tuple[int, int],
                mode: str = HEADLINE) -> ComplexityReport:
    """Both branches at their post-preprocessing sizes, plus the heads."""
    rows = count_encoder(model.authentic.encoder.spec, auth_hw, mode, "authentic.")
    rows += count_encoder(model.synthetic.encoder.spec, synth_hw, mode, "synthetic.")
    rows += count_head(model.down_auth, "authentic.down.")
    rows += count_head(model.down_synth, "synthetic.down.")
    rows += count_head(model.fusion, "fusion.")
    return ComplexityReport(rows, mode, {"authentic": auth_hw, "synthetic": synth_hw})
