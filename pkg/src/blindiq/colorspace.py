"""Color-space handling: decoded images and RGB -> YUV / CIELAB conversion.

Conversion standards are frozen here (both training corpora are sRGB
consumer photos):

===========  ==================================================
RGB -> YUV   BT.601 full range, exact difference form
                 Y = 0.299 R + 0.587 G + 0.114 B
                 U = 0.436 (B - Y) / (1 - 0.114)
                 V = 0.615 (R - Y) / (1 - 0.299)
             (rows equal the familiar rounded coefficients
             -0.14713/-0.28886/0.436 etc. to five decimals, and
             cancel exactly on the gray axis)
RGB -> LAB   sRGB electro-optical transfer (0.04045 threshold),
             sRGB/D65 linear-RGB -> XYZ matrix,
             CIELAB f(t) with threshold (6/29)^3,
             D65 white (0.95047, 1.0, 1.08883)
===========  ==================================================

Channel ranges: RGB in [0,1]; YUV has Y in [0,1], U in [-0.436,0.436],
V in [-0.615,0.615]; LAB has L in [0,100], a,b in [-128,127].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ColorSpaceError, ShapeError

RGB = "rgb"
YUV = "yuv"
LAB = "lab"
SPACES = (RGB, YUV, LAB)

# U = u_max*(B-Y)/(1-W_b), V = v_max*(R-Y)/(1-W_r): the exact difference
# form whose rows cancel on the gray axis (the familiar rounded constants
# -0.14713/-0.28886/0.436 etc. are these to five decimals).
_W_R, _W_G, _W_B = 0.299, 0.587, 0.114
_RGB_TO_YUV = np.array(
    [
        [_W_R, _W_G, _W_B],
        [0.436 * -_W_R / (1 - _W_B), 0.436 * -_W_G / (1 - _W_B), 0.436],
        [0.615, 0.615 * -_W_G / (1 - _W_R), 0.615 * -_W_B / (1 - _W_R)],
    ],
    dtype=np.float64,
)

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ],
    dtype=np.float64,
)

_D65 = np.array([0.95047, 1.0, 1.08883], dtype=np.float64)

_U_MAX = 0.436
_V_MAX = 0.615


@dataclass
class Image:
    """Decoded raster: ``data`` is [H, W, 3] float32, tagged with its space."""

    data: np.ndarray
    space: str = RGB

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise ShapeError(f"image data must be [H,W,3], got {self.data.shape}")
        if self.space not in SPACES:
            raise ColorSpaceError(f"unknown color space {self.space!r}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def _require_rgb(img: Image, op: str) -> None:
    if img.space != RGB:
        raise ColorSpaceError(f"{op} expects an RGB image, got {img.space!r}")


def rgb_to_yuv(img: Image) -> Image:
    """BT.601 full-range RGB -> YUV."""
    _require_rgb(img, "rgb_to_yuv")
    yuv = img.data.astype(np.float64) @ _RGB_TO_YUV.T
    return Image(yuv.astype(np.float32), YUV)


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    lo = c <= 0.04045
    out = np.empty_like(c)
    out[lo] = c[lo] / 12.92
    out[~lo] = ((c[~lo] + 0.055) / 1.055) ** 2.4
    return out


def _lab_f(t: np.ndarray) -> np.ndarray:
    delta3 = (6.0 / 29.0) ** 3
    lo = t <= delta3
    out = np.empty_like(t)
    out[~lo] = np.cbrt(t[~lo])
    out[lo] = t[lo] / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0
    return out


def rgb_to_lab(img: Image) -> Image:
    """sRGB (D65) -> CIELAB."""
    _require_rgb(img, "rgb_to_lab")
    lin = _srgb_to_linear(img.data.astype(np.float64))
    xyz = lin @ _RGB_TO_XYZ.T
    f = _lab_f(xyz / _D65)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return Image(lab.astype(np.float32), LAB)


def convert(img: Image, space: str) -> Image:
    """Convert an RGB image into ``space`` (RGB passes through)."""
    if space == RGB:
        _require_rgb(img, "convert")
        return img
    if space == YUV:
        return rgb_to_yuv(img)
    if space == LAB:
        return rgb_to_lab(img)
    raise ColorSpaceError(f"unknown color space {space!r}")


def to_network_range(img: Image) -> np.ndarray:
    """Map any space onto [0,1] channels and return a [3,H,W] tensor.

    RGB passes through.  YUV keeps Y and remaps chroma to mid-gray 0.5;
    LAB divides L by 100 and shifts a/b by 128 over a 255 span.  The maps
    are part of the model contract so scores reproduce bit-exactly.
    """
    d = img.data
    if img.space == RGB:
        out = d.copy()
    elif img.space == YUV:
        out = np.empty_like(d)
        out[..., 0] = d[..., 0]
        out[..., 1] = d[..., 1] / _U_MAX * 0.5 + 0.5
        out[..., 2] = d[..., 2] / _V_MAX * 0.5 + 0.5
    elif img.space == LAB:
        out = np.empty_like(d)
        out[..., 0] = d[..., 0] / 100.0
        out[..., 1] = (d[..., 1] + 128.0) / 255.0
        out[..., 2] = (d[..., 2] + 128.0) / 255.0
    else:
        raise ColorSpaceError(f"unknown color space {img.space!r}")
    np.clip(out, 0.0, 1.0, out=out)
    return np.ascontiguousarray(out.transpose(2, 0, 1))
