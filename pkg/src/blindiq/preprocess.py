"""Branch-specific input preparation.

The authentic branch downscales to a fixed size (content-linked quality
survives resizing); the synthetic branch never interpolates and only center
crops, preserving the high-frequency detail that synthetic distortions live
in.  Color conversion happens before the geometric op so every color space
sees identical geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import colorspace as cs
from .errors import ShapeError
from .ops import default_dtype

AUTHENTIC = "authentic"
SYNTHETIC = "synthetic"

# Standard backbone-pretraining statistics for RGB; identity-centered 0.5
# stats for the remapped YUV/LAB channels.
RGB_MEAN = (0.485, 0.456, 0.406)
RGB_STD = (0.229, 0.224, 0.225)
NEUTRAL_MEAN = (0.5, 0.5, 0.5)
NEUTRAL_STD = (0.5, 0.5, 0.5)


@dataclass
class BranchPreprocessConfig:
    branch: str
    resize_to: tuple[int, int] | None = None
    center_crop_to: tuple[int, int] | None = None
    mean: tuple[float, float, float] = RGB_MEAN
    std: tuple[float, float, float] = RGB_STD

    def __post_init__(self):
        if self.branch not in (AUTHENTIC, SYNTHETIC):
            raise ShapeError(f"unknown branch {self.branch!r}")
        if self.branch == AUTHENTIC:
            if self.resize_to is None or self.center_crop_to is not None:
                raise ShapeError("authentic branch resizes and never crops")
        else:
            if self.resize_to is not None:
                raise ShapeError("synthetic branch never resizes")
        if any(s <= 0 for s in self.std):
            raise ShapeError("std components must be strictly positive")


def resize_bilinear(img: cs.Image, w: int, h: int) -> cs.Image:
    """Bilinear resample with half-pixel source centers, clamped at borders."""
    if w < 1 or h < 1:
        raise ShapeError(f"target size {w}x{h} must be positive")
    src = img.data
    src_h, src_w = src.shape[:2]
    if (src_w, src_h) == (w, h):
        return cs.Image(src.copy(), img.space)

    out = _interp_axis(src.astype(np.float64), src_h, h, axis=0)
    out = _interp_axis(out, src_w, w, axis=1)
    return cs.Image(out.astype(np.float32), img.space)


def _interp_axis(data: np.ndarray, src_n: int, dst_n: int, axis: int) -> np.ndarray:
    scale = src_n / dst_n
    coords = (np.arange(dst_n, dtype=np.float64) + 0.5) * scale - 0.5
    coords = np.clip(coords, 0.0, src_n - 1)
    lo = np.floor(coords).astype(np.int64)
    hi = np.minimum(lo + 1, src_n - 1)
    frac = coords - lo
    shape = [1, 1, 1]
    shape[axis] = dst_n
    frac = frac.reshape(shape)
    return np.take(data, lo, axis=axis) * (1.0 - frac) + np.take(data, hi, axis=axis) * frac


def center_crop(img: cs.Image, w: int, h: int) -> cs.Image:
    """Center crop; a crop larger than the image edge-replicates outward."""
    src = img.data
    src_h, src_w = src.shape[:2]
    pad_h = max(0, h - src_h)
    pad_w = max(0, w - src_w)
    if pad_h or pad_w:
        src = np.pad(
            src,
            (
                (pad_h // 2, pad_h - pad_h // 2),
                (pad_w // 2, pad_w - pad_w // 2),
                (0, 0),
            ),
            mode="edge",
        )
        src_h, src_w = src.shape[:2]
    top = (src_h - h) // 2
    left = (src_w - w) // 2
    return cs.Image(src[top : top + h, left : left + w].copy(), img.space)


def prepare(img: cs.Image, cfg: BranchPreprocessConfig, space: str = cs.RGB) -> np.ndarray:
    """Full branch pipeline: convert, resize/crop, range-map, normalize.

    Returns a [3,H,W] tensor in the engine's default dtype.
    """
    if img.space != cs.RGB:
        raise ShapeError("prepare expects an RGB input image")
    converted = cs.convert(img, space)
    if cfg.resize_to is not None:
        converted = resize_bilinear(converted, cfg.resize_to[0], cfg.resize_to[1])
    if cfg.center_crop_to is not None:
        converted = center_crop(converted, cfg.center_crop_to[0], cfg.center_crop_to[1])
    chw = cs.to_network_range(converted)
    mean = np.asarray(cfg.mean, dtype=chw.dtype).reshape(3, 1, 1)
    std = np.asarray(cfg.std, dtype=chw.dtype).reshape(3, 1, 1)
    return ((chw - mean) / std).astype(default_dtype())


def default_config(branch: str, space: str = cs.RGB, *, resize: tuple[int, int] | None = None,
                   crop: tuple[int, int] | None = None) -> BranchPreprocessConfig:
    """Config with the frozen normalization constants for ``space``."""
    if space == cs.RGB:
        mean, std = RGB_MEAN, RGB_STD
    else:
        mean, std = NEUTRAL_MEAN, NEUTRAL_STD
    if branch == AUTHENTIC:
        return BranchPreprocessConfig(branch, resize_to=resize or (384, 384), mean=mean, std=std)
    return BranchPreprocessConfig(branch, center_crop_to=crop, mean=mean, std=std)
