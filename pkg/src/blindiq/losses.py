"""Training objectives with analytic prediction-space gradients.

Accuracy loss combines a distance term and a correlation term:

    acc = alpha * mean((p - t)^2) + beta * (1 - pearson(p, t))

The correlation term is realized as ``1 - r`` (not ``(1 - r)/2``); this
choice is configurable in spirit but frozen here as the default.  The
robustness loss sums, over the enabled color spaces, the mean squared error
between the model's prediction on the converted image and the subjective
score; the normalizer is the batch size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import colorspace as cs
from .errors import DegenerateInputError, ShapeError


@dataclass
class LossConfig:
    alpha: float = 1.0
    beta: float = 1.0
    lambda_rob: float = 1.0
    color_spaces: tuple[str, ...] = field(default_factory=lambda: cs.SPACES)

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.lambda_rob < 0:
            raise ShapeError("loss weights must be non-negative")
        if self.lambda_rob > 0 and not self.color_spaces:
            raise ShapeError("color_spaces must be non-empty when lambda_rob > 0")
        for s in self.color_spaces:
            if s not in cs.SPACES:
                raise ShapeError(f"unknown color space {s!r}")


def mse_with_grad(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = pred.shape[0]
    diff = pred - target
    return float((diff * diff).mean()), 2.0 * diff / n


def pearson_with_grad(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Pearson r and dr/dpred.

    With centered vectors p^, t^ and norms Sp, St:
        dr/dp_i = t^_i / (Sp*St) - r * p^_i / Sp^2
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    pc = pred - pred.mean()
    tc = target - target.mean()
    sp = np.sqrt((pc * pc).sum())
    st = np.sqrt((tc * tc).sum())
    if st == 0.0:
        raise DegenerateInputError("correlation loss undefined: constant target")
    if sp == 0.0:
        raise DegenerateInputError("correlation loss undefined: constant predictions")
    r = float((pc * tc).sum() / (sp * st))
    grad = tc / (sp * st) - r * pc / (sp * sp)
    return r, grad


def acc_loss(pred, target, cfg: LossConfig) -> tuple[float, np.ndarray]:
    """Accuracy loss value and its exact gradient w.r.t. the predictions."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.ndim != 1:
        raise ShapeError("pred/target must be equal-length vectors")
    if pred.shape[0] < 2:
        raise ShapeError("acc_loss needs at least 2 samples")
    value = 0.0
    grad = np.zeros_like(pred)
    if cfg.alpha > 0:
        mse, g = mse_with_grad(pred, target)
        value += cfg.alpha * mse
        grad += cfg.alpha * g
    if cfg.beta > 0:
        r, g = pearson_with_grad(pred, target)
        value += cfg.beta * (1.0 - r)
        grad -= cfg.beta * g
    return value, grad


def per_space_mse(preds_by_space: dict[str, np.ndarray], mos: np.ndarray
                  ) -> tuple[float, dict[str, np.ndarray]]:
    """Sum of per-space MSE terms plus per-space prediction gradients."""
    total = 0.0
    grads: dict[str, np.ndarray] = {}
    for space, pred in preds_by_space.items():
        v, g = mse_with_grad(pred, mos)
        total += v
        grads[space] = g
    return total, grads


def predictions_by_space(model, imgs, cfg: LossConfig) -> dict[str, np.ndarray]:
    return {
        space: np.array([model.predict(img, space) for img in imgs], dtype=np.float64)
        for space in cfg.color_spaces
    }


def color_space_loss(model, imgs, mos, cfg: LossConfig) -> float:
    """Sum over enabled spaces of mean((predict(img, space) - mos)^2)."""
    if len(imgs) == 0:
        raise ShapeError("color_space_loss needs a non-empty batch")
    mos = np.asarray(mos, dtype=np.float64)
    preds = predictions_by_space(model, imgs, cfg)
    value, _ = per_space_mse(preds, mos)
    return value


def total_loss(model, imgs, mos, cfg: LossConfig) -> float:
    """acc_loss on RGB predictions plus lambda_rob * color_space_loss."""
    mos = np.asarray(mos, dtype=np.float64)
    rgb_pred = np.array([model.predict(img, cs.RGB) for img in imgs], dtype=np.float64)
    value, _ = acc_loss(rgb_pred, mos, cfg)
    if cfg.lambda_rob > 0:
        value += cfg.lambda_rob * color_space_loss(model, imgs, mos, cfg)
    return value
