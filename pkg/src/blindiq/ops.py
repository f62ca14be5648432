"""Dense-tensor primitives for the encoder forward pass.

Tensors are plain ``numpy.ndarray`` values in row-major (C) order, float32 by
default and float64 when gradient-check mode is switched on globally.  Every
operation here is a pure function; results are freshly allocated arrays and
inputs are never mutated, so values are safe to share across threads.

Non-finite results are treated as errors, not silent states: each operation
validates its output and raises :class:`~blindiq.errors.NonFiniteError`.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NonFiniteError, ShapeError

_DEFAULT_DTYPE = np.float32

ACTIVATION_KINDS = ("relu", "silu", "hard_swish", "hard_sigmoid", "none")


def set_default_dtype(dtype) -> None:
    """Switch the global scalar type (float32 inference / float64 gradcheck)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ShapeError(f"default dtype must be float32 or float64, got {dtype}")
    _DEFAULT_DTYPE = dtype.type


def default_dtype():
    return _DEFAULT_DTYPE


def ensure_finite(name: str, x: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"{name} produced non-finite values")
    return x


def sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def silu(x: np.ndarray) -> np.ndarray:
    return x * sigmoid(x)


def silu_grad(x: np.ndarray) -> np.ndarray:
    s = sigmoid(x)
    return s * (1.0 + x * (1.0 - s))


def hard_sigmoid(x: np.ndarray) -> np.ndarray:
    return np.clip(x / 6.0 + 0.5, 0.0, 1.0)


def hard_swish(x: np.ndarray) -> np.ndarray:
    return x * hard_sigmoid(x)


_ACTIVATIONS = {
    "relu": relu,
    "silu": silu,
    "hard_swish": hard_swish,
    "hard_sigmoid": hard_sigmoid,
    "none": lambda x: x,
}


def activation(x: np.ndarray, kind: str) -> np.ndarray:
    """Elementwise activation; shape preserved."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ShapeError(f"unknown activation kind {kind!r}") from None
    return ensure_finite(f"activation[{kind}]", fn(np.asarray(x)))


def conv2d(
    x: np.ndarray,
    weight: np.ndarray,
    bias: np.ndarray | None = None,
    stride: tuple[int, int] = (1, 1),
    padding: tuple[int, int] = (0, 0),
    groups: int = 1,
) -> np.ndarray:
    """Direct 2-D cross-correlation.

    ``x`` is [C_in, H, W], ``weight`` is [C_out, C_in/groups, K_h, K_w].
    Output is [C_out, H_out, W_out] with
    ``H_out = floor((H + 2*pad_h - K_h)/stride_h) + 1`` (same for W).
    """
    x = np.asarray(x)
    weight = np.asarray(weight)
    if x.ndim != 3:
        raise ShapeError(f"conv2d input must be rank 3 [C,H,W], got rank {x.ndim}")
    if weight.ndim != 4:
        raise ShapeError(f"conv2d weight must be rank 4, got rank {weight.ndim}")
    c_in, h, w = x.shape
    c_out, c_in_g, k_h, k_w = weight.shape
    if c_in % groups != 0:
        raise ShapeError(f"C_in={c_in} not divisible by groups={groups}")
    if c_out % groups != 0:
        raise ShapeError(f"C_out={c_out} not divisible by groups={groups}")
    if c_in_g != c_in // groups:
        raise ShapeError(
            f"weight channel dim {c_in_g} != C_in/groups = {c_in // groups}"
        )
    if bias is not None and bias.shape != (c_out,):
        raise ShapeError(f"bias length {bias.shape} != C_out={c_out}")
    s_h, s_w = stride
    p_h, p_w = padding
    h_pad, w_pad = h + 2 * p_h, w + 2 * p_w
    if k_h > h_pad or k_w > w_pad:
        raise ShapeError(
            f"kernel {k_h}x{k_w} exceeds padded input {h_pad}x{w_pad}"
        )

    if p_h or p_w:
        x = np.pad(x, ((0, 0), (p_h, p_h), (p_w, p_w)))
    h_out = (h_pad - k_h) // s_h + 1
    w_out = (w_pad - k_w) // s_w + 1

    if groups == c_in and c_out == c_in:
        # Depthwise fast path: accumulate shifted views, no im2col buffer.
        out = np.zeros((c_out, h_out, w_out), dtype=x.dtype)
        for i in range(k_h):
            for j in range(k_w):
                view = x[:, i : i + (h_out - 1) * s_h + 1 : s_h,
                         j : j + (w_out - 1) * s_w + 1 : s_w]
                out += weight[:, 0, i, j][:, None, None] * view
    elif groups == 1:
        out = _conv2d_dense(x, weight, s_h, s_w, h_out, w_out)
    else:
        out = np.empty((c_out, h_out, w_out), dtype=x.dtype)
        cg_in, cg_out = c_in // groups, c_out // groups
        for g in range(groups):
            out[g * cg_out : (g + 1) * cg_out] = _conv2d_dense(
                x[g * cg_in : (g + 1) * cg_in],
                weight[g * cg_out : (g + 1) * cg_out],
                s_h, s_w, h_out, w_out,
            )
    if bias is not None:
        out += bias[:, None, None]
    return ensure_finite("conv2d", out)


def _conv2d_dense(x, weight, s_h, s_w, h_out, w_out):
    c_out = weight.shape[0]
    win = sliding_window_view(x, (weight.shape[2], weight.shape[3]), axis=(1, 2))
    win = win[:, ::s_h, ::s_w]  # [C_in, H_out, W_out, K_h, K_w]
    cols = win.transpose(0, 3, 4, 1, 2).reshape(-1, h_out * w_out)
    flat = weight.reshape(c_out, -1) @ cols
    return flat.reshape(c_out, h_out, w_out)


def global_avg_pool(x: np.ndarray) -> np.ndarray:
    """Per-channel mean over the spatial extent: [C,H,W] -> [C]."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ShapeError(f"global_avg_pool input must be rank 3, got {x.ndim}")
    return ensure_finite("global_avg_pool", x.mean(axis=(1, 2)))


def affine_channel(x: np.ndarray, scale: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Per-channel affine map, the folded form of batch normalization."""
    x = np.asarray(x)
    scale = np.asarray(scale)
    shift = np.asarray(shift)
    c = x.shape[0]
    if scale.shape != (c,):
        raise ShapeError(f"scale length {scale.shape} != channels {c}")
    if shift.shape != (c,):
        raise ShapeError(f"shift length {shift.shape} != channels {c}")
    return ensure_finite(
        "affine_channel", scale[:, None, None] * x + shift[:, None, None]
    )


def linear(x: np.ndarray, weight: np.ndarray, bias: np.ndarray | None = None) -> np.ndarray:
    """Affine map y = W @ x + b for a 1-D input vector."""
    x = np.asarray(x)
    if weight.shape[1] != x.shape[-1]:
        raise ShapeError(
            f"linear weight expects input dim {weight.shape[1]}, got {x.shape[-1]}"
        )
    y = x @ weight.T
    if bias is not None:
        y = y + bias
    return ensure_finite("linear", y)
