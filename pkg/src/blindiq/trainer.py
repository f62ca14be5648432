"""Desk-scale head training on frozen encoder features.

Only regression heads train; encoder gradients are never computed.  The
optimizer is decoupled-weight-decay Adam with a linear-warmup + cosine
schedule.  Training is single-threaded and fully deterministic under a
fixed seed: shuffling comes from one seeded generator and accumulation
order is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeError, TrainingError
from .kan import KanStack
from .losses import LossConfig, acc_loss, mse_with_grad
from .mlp import MlpStack

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    epochs: int = 100
    lr_max: float = 5e-5
    weight_decay: float = 1e-4
    batch_size: int = 16
    warmup_fraction: float = 0.05
    seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ShapeError("epochs must be >= 1")
        if self.lr_max <= 0:
            raise ShapeError("lr_max must be positive")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ShapeError("warmup_fraction must lie in [0, 1)")
        if self.batch_size < 1:
            raise ShapeError("batch_size must be >= 1")


def lr_at(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear 0 -> lr_max over the warmup steps, then cosine down to ~0."""
    if not 0 <= step < total_steps:
        raise ShapeError(f"step {step} outside [0, {total_steps})")
    warmup = int(round(cfg.warmup_fraction * total_steps))
    if step < warmup:
        return cfg.lr_max * step / warmup
    if total_steps == warmup:
        return cfg.lr_max
    progress = (step - warmup) / (total_steps - warmup)
    return cfg.lr_max * 0.5 * (1.0 + np.cos(np.pi * progress))


def adamw_init(params: dict[str, np.ndarray]) -> dict:
    return {
        "step": 0,
        "m": {k: np.zeros_like(v) for k, v in params.items()},
        "v": {k: np.zeros_like(v) for k, v in params.items()},
    }


def adamw_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
               state: dict, lr: float, cfg: TrainConfig) -> tuple[dict, dict]:
    """One decoupled-weight-decay Adam update, in place.

    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
    """
    state["step"] += 1
    t = state["step"]
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for key, p in params.items():
        g = grads[key]
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"NaN/Inf gradient for {key!r} at optimizer step {t}")
        m = state["m"][key]
        v = state["v"][key]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        if cfg.weight_decay > 0:
            update = update + cfg.weight_decay * p
        p -= lr * update
    return params, state


def _flatten_params(stack: KanStack | MlpStack) -> dict[str, np.ndarray]:
    flat: dict[str, np.ndarray] = {}
    for i, layer_params in enumerate(stack.parameters()):
        for key, arr in layer_params.items():
            flat[f"layer{i}.{key}"] = arr
    return flat


def _flatten_grads(grads: list[dict[str, np.ndarray]]) -> dict[str, np.ndarray]:
    flat: dict[str, np.ndarray] = {}
    for i, layer_grads in enumerate(grads):
        for key, arr in layer_grads.items():
            flat[f"layer{i}.{key}"] = arr
    return flat


def _accumulate(total: dict[str, np.ndarray] | None, part: dict[str, np.ndarray]):
    if total is None:
        return {k: v.copy() for k, v in part.items()}
    for k, v in part.items():
        total[k] += v
    return total


@dataclass
class TrainResult:
    head: KanStack | MlpStack
    loss_curve: list[float]

    def final_loss(self) -> float:
        return self.loss_curve[-1]


def _batch_starts(n: int, batch_size: int) -> list[int]:
    # A trailing singleton merges into the previous batch: the correlation
    # term needs >= 2 samples and a lone leftover would break it.
    starts = list(range(0, n, batch_size))
    if len(starts) > 1 and n - starts[-1] == 1:
        starts.pop()
    return starts


def _n_batches(n: int, batch_size: int) -> int:
    return len(_batch_starts(n, batch_size))


def _batches(n: int, batch_size: int, perm: np.ndarray):
    starts = _batch_starts(n, batch_size)
    for i, start in enumerate(starts):
        end = n if i == len(starts) - 1 else starts[i + 1]
        yield perm[start:end]


def _head_loss_and_grads(head, feats, targets, loss_cfg: LossConfig):
    """Loss and flat parameter grads for one batch.

    ``feats`` is either an [B, D] array (accuracy loss only) or a mapping
    space -> [B, D] holding per-space feature matrices; the robustness term
    then adds lambda_rob * sum_space MSE(head(features_space), targets).
    """
    if isinstance(feats, dict):
        if "rgb" not in feats:
            raise ShapeError("per-space features must include 'rgb'")
        pred, cache = head.forward(feats["rgb"])
        value, grad_pred = acc_loss(pred[:, 0], targets, loss_cfg)
        _, grads = head.backward(grad_pred[:, None], cache)
        total_grads = _flatten_grads(grads)
        if loss_cfg.lambda_rob > 0:
            for space in loss_cfg.color_spaces:
                pred_s, cache_s = head.forward(feats[space])
                v, g = mse_with_grad(pred_s[:, 0], targets)
                value += loss_cfg.lambda_rob * v
                _, grads_s = head.backward(
                    loss_cfg.lambda_rob * g[:, None], cache_s
                )
                total_grads = _accumulate(total_grads, _flatten_grads(grads_s))
        return value, total_grads
    pred, cache = head.forward(feats)
    value, grad_pred = acc_loss(pred[:, 0], targets, loss_cfg)
    _, grads = head.backward(grad_pred[:, None], cache)
    return value, _flatten_grads(grads)


def _check_features(features, mos):
    n = mos.shape[0]
    mats = features.values() if isinstance(features, dict) else [features]
    for m in mats:
        if m.ndim != 2 or m.shape[0] != n:
            raise ShapeError(f"feature matrix shape {m.shape} does not match {n} scores")


def train_head(features, mos, head: KanStack | MlpStack,
               cfg: TrainConfig) -> TrainResult:
    """Optimize a head on frozen features; returns the per-epoch loss curve."""
    mos = np.asarray(mos, dtype=np.float64)
    _check_features(features, mos)
    n = mos.shape[0]
    if n < cfg.batch_size:
        raise ShapeError(f"need at least batch_size={cfg.batch_size} samples, got {n}")
    rng = np.random.default_rng(cfg.seed)
    params = _flatten_params(head)
    state = adamw_init(params)
    total_steps = cfg.epochs * _n_batches(n, cfg.batch_size)
    step = 0
    curve: list[float] = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for idx in _batches(n, cfg.batch_size, perm):
            batch = ({k: v[idx] for k, v in features.items()}
                     if isinstance(features, dict) else features[idx])
            value, grads = _head_loss_and_grads(head, batch, mos[idx], cfg.loss)
            adamw_step(params, grads, state, lr_at(step, total_steps, cfg), cfg)
            step += 1
            epoch_loss += value * len(idx)
        curve.append(epoch_loss / n)
    return TrainResult(head, curve)


def train_dual_head(features, mos, model, cfg: TrainConfig) -> TrainResult:
    """Jointly optimize a model's down-samplers and fusion head.

    ``features`` holds the frozen concatenated branch embeddings
    [N, 2*feature_dim] (or a space -> matrix mapping, as in train_head).
    The encoders never receive gradients; the score path stays
    fusion(concat(down_auth(a), down_synth(s))).
    """

    class _Composite:
        """Adapter presenting (down_auth, down_synth, fusion) as one head."""

        def __init__(self, m):
            self.m = m
            self.split = m.down_auth.in_dim

        def forward(self, x):
            a, ca = self.m.down_auth.forward(x[..., : self.split])
            s, cs_ = self.m.down_synth.forward(x[..., self.split :])
            fused = np.concatenate([a, s], axis=-1)
            y, cf = self.m.fusion.forward(fused)
            return y, {"auth": ca, "synth": cs_, "fusion": cf}

        def backward(self, grad_y, cache):
            grad_fused, gf = self.m.fusion.backward(grad_y, cache["fusion"])
            d = self.m.down_auth.out_dim
            _, ga = self.m.down_auth.backward(grad_fused[..., :d], cache["auth"])
            _, gs = self.m.down_synth.backward(grad_fused[..., d:], cache["synth"])
            return None, ga + gs + gf

        def parameters(self):
            return (self.m.down_auth.parameters() + self.m.down_synth.parameters()
                    + self.m.fusion.parameters())

    composite = _Composite(model)
    result = train_head(features, mos, composite, cfg)
    return TrainResult(model, result.loss_curve)


@dataclass
class MultiTaskResult:
    heads: dict[str, KanStack | MlpStack]
    loss_curves: dict[str, list[float]]

    def final_losses(self) -> dict[str, float]:
        return {k: v[-1] for k, v in self.loss_curves.items()}


def multi_task_train(datasets: dict[str, tuple[np.ndarray, np.ndarray]],
                     heads: dict[str, KanStack | MlpStack],
                     cfg: TrainConfig) -> MultiTaskResult:
    """Each dataset trains its own head; batches interleave round-robin.

    The per-dataset heads absorb each corpus's subjective scale/bias while
    sharing the (frozen) feature space.
    """
    if not datasets:
        raise ShapeError("multi_task_train needs at least one dataset")
    if set(datasets) != set(heads):
        raise ShapeError("datasets and heads must carry the same names")
    names = list(datasets)
    mos = {k: np.asarray(v[1], dtype=np.float64) for k, v in datasets.items()}
    feats = {k: v[0] for k, v in datasets.items()}
    for k in names:
        _check_features(feats[k], mos[k])
        if mos[k].shape[0] < cfg.batch_size:
            raise ShapeError(f"dataset {k!r} smaller than batch_size")
    rng = np.random.default_rng(cfg.seed)
    params = {k: _flatten_params(heads[k]) for k in names}
    states = {k: adamw_init(params[k]) for k in names}
    counts = {k: mos[k].shape[0] for k in names}
    batches_of = {k: _n_batches(counts[k], cfg.batch_size) for k in names}
    steps_of = {k: cfg.epochs * batches_of[k] for k in names}
    step_idx = {k: 0 for k in names}
    curves: dict[str, list[float]] = {k: [] for k in names}
    for _ in range(cfg.epochs):
        iters = {}
        for k in names:
            perm = rng.permutation(counts[k])
            iters[k] = list(_batches(counts[k], cfg.batch_size, perm))
        epoch_loss = {k: 0.0 for k in names}
        for round_i in range(max(batches_of.values())):
            for k in names:  # round-robin over datasets
                if round_i >= len(iters[k]):
                    continue
                idx = iters[k][round_i]
                batch = (
                    {s: m[idx] for s, m in feats[k].items()}
                    if isinstance(feats[k], dict) else feats[k][idx]
                )
                value, grads = _head_loss_and_grads(heads[k], batch, mos[k][idx], cfg.loss)
                lr = lr_at(step_idx[k], steps_of[k], cfg)
                adamw_step(params[k], grads, states[k], lr, cfg)
                step_idx[k] += 1
                epoch_loss[k] += value * len(idx)
        for k in names:
            curves[k].append(epoch_loss[k] / counts[k])
    return MultiTaskResult(heads, curves)


@dataclass
class FoldPlan:
    k: int
    seed: int
    folds: list[np.ndarray]

    def train_indices(self, fold: int) -> np.ndarray:
        rest = [f for i, f in enumerate(self.folds) if i != fold]
        return np.concatenate(rest)

    def test_indices(self, fold: int) -> np.ndarray:
        return self.folds[fold]


def kfold(n: int, k: int = 10, seed: int = 0) -> FoldPlan:
    """Seeded shuffle then contiguous chunking; fold sizes differ by <= 1."""
    if n < k:
        raise ShapeError(f"cannot split {n} items into {k} folds")
    if k < 1:
        raise ShapeError("k must be >= 1")
    perm = np.random.default_rng(seed).permutation(n)
    return FoldPlan(k, seed, [np.array(f) for f in np.array_split(perm, k)])


def write_loss_curve_csv(path: str | Path, curves: dict[str, list[float]]) -> None:
    """Comma-separated loss curves: one column per named curve."""
    names = list(curves)
    epochs = max(len(c) for c in curves.values())
    lines = ["epoch," + ",".join(names)]
    for e in range(epochs):
        cells = [str(e)]
        for name in names:
            c = curves[name]
            cells.append(repr(c[e]) if e < len(c) else "")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
