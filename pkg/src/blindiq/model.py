"""Dual-branch scoring model: two encoders, per-branch down-samplers, and a
fusion regression head.

The score path is

    score = fusion(concat(down_auth(enc_a(prep_a(img))),
                          down_synth(enc_s(prep_s(img)))))

with the concatenation order fixed as [authentic || synthetic] and recorded
by the serialized layout.  A model on disk is a ``.larw`` tensor container
(see :mod:`blindiq.weights_io`) plus a plain-text ``.cfg`` key=value sidecar
holding everything that is not a tensor: encoder kinds, head width, geometry,
normalization constants, and spline hyperparameters.

The 1000-wide embedding is the encoder's full classifier output (recorded in
the config as ``embedding=classifier-logits``).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import colorspace as cs
from . import preprocess as pp
from .encoder import Encoder, make_encoder_spec, validate_weights
from .errors import ModelConfigError, ShapeError, WeightsValidationError
from .kan import DEFAULT_GRID_RANGE, DEFAULT_GRID_SIZE, DEFAULT_SPLINE_ORDER, KanLayer, KanStack
from .mlp import MlpLayer, MlpStack
from .weights_io import read_tensors, write_tensors

CONFIG_SUFFIX = ".cfg"
FORMAT = 1

_KAN_KEYS = ("base_weight", "spline_coeff", "base_scale")
_MLP_KEYS = ("weight", "bias")


class Branch:
    """One encoder plus its geometry and per-space normalization table."""

    def __init__(self, name: str, encoder: Encoder,
                 resize_to: tuple[int, int] | None = None,
                 center_crop_to: tuple[int, int] | None = None,
                 norms: dict[str, tuple[tuple, tuple]] | None = None):
        self.name = name
        self.encoder = encoder
        self.resize_to = resize_to
        self.center_crop_to = center_crop_to
        if norms is None:
            norms = {
                cs.RGB: (pp.RGB_MEAN, pp.RGB_STD),
                cs.YUV: (pp.NEUTRAL_MEAN, pp.NEUTRAL_STD),
                cs.LAB: (pp.NEUTRAL_MEAN, pp.NEUTRAL_STD),
            }
        self.norms = norms

    def preprocess_config(self, space: str) -> pp.BranchPreprocessConfig:
        mean, std = self.norms[space]
        return pp.BranchPreprocessConfig(
            self.name, resize_to=self.resize_to, center_crop_to=self.center_crop_to,
            mean=mean, std=std,
        )

    def embed(self, img: cs.Image, space: str = cs.RGB) -> np.ndarray:
        tensor = pp.prepare(img, self.preprocess_config(space), space)
        return self.encoder.forward(tensor)


class DualBranchModel:
    def __init__(self, authentic: Branch, synthetic: Branch,
                 down_auth: KanStack, down_synth: KanStack,
                 fusion: KanStack | MlpStack):
        if down_auth.out_dim != down_synth.out_dim:
            raise ShapeError("branch down-samplers must share their output width")
        if fusion.in_dim != 2 * down_auth.out_dim:
            raise ShapeError(
                f"fusion input dim {fusion.in_dim} != 2*d = {2 * down_auth.out_dim}"
            )
        self.authentic = authentic
        self.synthetic = synthetic
        self.down_auth = down_auth
        self.down_synth = down_synth
        self.fusion = fusion

    @property
    def d(self) -> int:
        return self.down_auth.out_dim

    def branch_features(self, img: cs.Image, space: str = cs.RGB) -> np.ndarray:
        """Concatenated [authentic || synthetic] encoder embeddings (2000-dim)."""
        return np.concatenate([
            self.authentic.embed(img, space),
            self.synthetic.embed(img, space),
        ])

    def head_forward(self, embeddings: np.ndarray) -> float:
        """Head on a 2000-dim concatenated embedding vector."""
        n = self.down_auth.in_dim
        a = self.down_auth(embeddings[..., :n])
        s = self.down_synth(embeddings[..., n:])
        fused = np.concatenate([a, s], axis=-1)
        return self.fusion(fused)

    def predict(self, img: cs.Image, space: str = cs.RGB) -> float:
        out = self.head_forward(self.branch_features(img, space))
        return float(out[0])


def build_model(auth_kind: str = "tiny", synth_kind: str = "tiny",
                d: int = 128, fusion_kind: str = "kan",
                rng: np.random.Generator | None = None,
                auth_resize: tuple[int, int] = (384, 384),
                synth_crop: tuple[int, int] | None = (1280, 1280),
                grid_size: int = DEFAULT_GRID_SIZE,
                spline_order: int = DEFAULT_SPLINE_ORDER,
                grid_range: tuple[float, float] = DEFAULT_GRID_RANGE) -> DualBranchModel:
    """Assemble a model with freshly initialized heads (seeded via ``rng``)."""
    rng = rng or np.random.default_rng(0)
    auth = Branch(pp.AUTHENTIC, Encoder.random(auth_kind, rng), resize_to=auth_resize)
    synth = Branch(pp.SYNTHETIC, Encoder.random(synth_kind, rng), center_crop_to=synth_crop)
    feat = auth.encoder.spec.feature_dim
    kan_args = dict(grid_size=grid_size, spline_order=spline_order, grid_range=grid_range)
    down_a = KanStack.build([feat, d], rng, **kan_args)
    down_s = KanStack.build([feat, d], rng, **kan_args)
    if fusion_kind == "kan":
        fusion: KanStack | MlpStack = KanStack.build([2 * d, 1], rng, **kan_args)
    elif fusion_kind == "mlp":
        fusion = MlpStack.build([2 * d, 1], rng)
    else:
        raise ModelConfigError(f"unknown fusion kind {fusion_kind!r}")
    return DualBranchModel(auth, synth, down_a, down_s, fusion)


# --------------------------------------------------------------------------
# Serialization
# --------------------------------------------------------------------------

def _fmt_floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _fmt_size(wh: tuple[int, int]) -> str:
    return f"{wh[0]}x{wh[1]}"


def _parse_size(text: str) -> tuple[int, int]:
    w, h = text.split("x")
    return int(w), int(h)


def model_config_text(model: DualBranchModel) -> str:
    fusion_kind = "kan" if isinstance(model.fusion, KanStack) else "mlp"
    ref = model.down_auth.layers[0]
    lines = [
        f"format={FORMAT}",
        f"d={model.d}",
        f"fusion={fusion_kind}",
        f"kan.grid_size={ref.grid_size}",
        f"kan.spline_order={ref.spline_order}",
        f"kan.grid_min={ref.grid_min!r}",
        f"kan.grid_max={ref.grid_max!r}",
        "embedding=classifier-logits",
    ]
    for branch in (model.authentic, model.synthetic):
        lines.append(f"{branch.name}.encoder={branch.encoder.spec.kind}")
        if branch.resize_to is not None:
            lines.append(f"{branch.name}.resize={_fmt_size(branch.resize_to)}")
        if branch.center_crop_to is not None:
            lines.append(f"{branch.name}.crop={_fmt_size(branch.center_crop_to)}")
        for space in cs.SPACES:
            mean, std = branch.norms[space]
            lines.append(f"{branch.name}.norm.{space}.mean={_fmt_floats(mean)}")
            lines.append(f"{branch.name}.norm.{space}.std={_fmt_floats(std)}")
    return "\n".join(lines) + "\n"


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ModelConfigError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _stack_tensors(prefix: str, stack: KanStack | MlpStack,
                   out: dict[str, np.ndarray]) -> None:
    if isinstance(stack, KanStack):
        for i, layer in enumerate(stack.layers):
            params = layer.parameters()
            for key in _KAN_KEYS:
                out[f"{prefix}.layer{i}.{key}"] = params[key]
    else:
        for i, layer in enumerate(stack.layers):
            out[f"{prefix}.layer{i}.weight"] = layer.weight
            out[f"{prefix}.layer{i}.bias"] = layer.bias


def model_tensors(model: DualBranchModel) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for branch in (model.authentic, model.synthetic):
        for name, arr in branch.encoder.store.items():
            out[f"{branch.name}.encoder.{name}"] = arr
    _stack_tensors("authentic.down", model.down_auth, out)
    _stack_tensors("synthetic.down", model.down_synth, out)
    _stack_tensors("fusion", model.fusion, out)
    return out


def config_path_for(weights_path: str | Path) -> Path:
    return Path(weights_path).with_suffix(CONFIG_SUFFIX)


def save_weights(model: DualBranchModel, path: str | Path) -> None:
    """Write ``<path>`` (tensor container) and its ``.cfg`` sidecar."""
    write_tensors(path, model_tensors(model))
    config_path_for(path).write_text(model_config_text(model))


def _collect_stack(tensors: dict[str, np.ndarray], prefix: str, kind: str,
                   cfg: dict[str, str]) -> KanStack | MlpStack:
    keys = _KAN_KEYS if kind == "kan" else _MLP_KEYS
    layers = []
    i = 0
    while f"{prefix}.layer{i}.{keys[0]}" in tensors:
        if kind == "kan":
            layers.append(KanLayer(
                in_dim=tensors[f"{prefix}.layer{i}.base_weight"].shape[1],
                out_dim=tensors[f"{prefix}.layer{i}.base_weight"].shape[0],
                grid_size=int(cfg["kan.grid_size"]),
                spline_order=int(cfg["kan.spline_order"]),
                grid_min=float(cfg["kan.grid_min"]),
                grid_max=float(cfg["kan.grid_max"]),
                base_weight=tensors[f"{prefix}.layer{i}.base_weight"],
                spline_coeff=tensors[f"{prefix}.layer{i}.spline_coeff"],
                base_scale=tensors[f"{prefix}.layer{i}.base_scale"],
            ))
        else:
            weight = tensors[f"{prefix}.layer{i}.weight"]
            act = "relu" if f"{prefix}.layer{i + 1}.weight" in tensors else "none"
            layers.append(MlpLayer(weight, tensors[f"{prefix}.layer{i}.bias"], act))
        i += 1
    if not layers:
        raise WeightsValidationError(f"no tensors found for head {prefix!r}")
    return KanStack(layers) if kind == "kan" else MlpStack(layers)


def _branch_from_config(name: str, cfg: dict[str, str],
                        tensors: dict[str, np.ndarray]) -> Branch:
    kind_key = f"{name}.encoder"
    if kind_key not in cfg:
        raise ModelConfigError(f"config is missing {kind_key}")
    spec = make_encoder_spec(cfg[kind_key])
    prefix = f"{name}.encoder."
    store = {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}
    report = validate_weights(spec, store)
    if not report.ok:
        raise WeightsValidationError(
            f"{name} encoder weights invalid:\n{report.summary()}"
        )
    norms = {}
    for space in cs.SPACES:
        norms[space] = (
            _parse_floats(cfg[f"{name}.norm.{space}.mean"]),
            _parse_floats(cfg[f"{name}.norm.{space}.std"]),
        )
    resize = _parse_size(cfg[f"{name}.resize"]) if f"{name}.resize" in cfg else None
    crop = _parse_size(cfg[f"{name}.crop"]) if f"{name}.crop" in cfg else None
    return Branch(name, Encoder(spec, store), resize_to=resize,
                  center_crop_to=crop, norms=norms)


def load_weights(path: str | Path) -> DualBranchModel:
    path = Path(path)
    cfg_path = config_path_for(path)
    if not cfg_path.exists():
        raise ModelConfigError(f"model config not found: {cfg_path}")
    cfg = parse_config_text(cfg_path.read_text())
    if cfg.get("format") != str(FORMAT):
        raise ModelConfigError(f"unsupported model config format {cfg.get('format')!r}")
    tensors = read_tensors(path)
    authentic = _branch_from_config("authentic", cfg, tensors)
    synthetic = _branch_from_config("synthetic", cfg, tensors)
    down_a = _collect_stack(tensors, "authentic.down", "kan", cfg)
    down_s = _collect_stack(tensors, "synthetic.down", "kan", cfg)
    fusion = _collect_stack(tensors, "fusion", cfg.get("fusion", "kan"), cfg)
    model = DualBranchModel(authentic, synthetic, down_a, down_s, fusion)
    if model.d != int(cfg["d"]):
        raise ModelConfigError(
            f"config d={cfg['d']} does not match serialized head width {model.d}"
        )
    return model
