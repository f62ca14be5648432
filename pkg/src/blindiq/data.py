"""Dataset manifests, image decoding, and cached feature extraction.

A manifest is a comma-separated file with header ``path,mos,split`` (the
``split`` column may be omitted, leaving every entry unassigned).  Optional
``# key=value`` comment directives before the header declare ``source`` and
``mos_range``.  Relative image paths resolve against the manifest's
directory.

Two image formats decode: 8-bit PNG and binary PPM (P6).  PPM is the
bit-exact golden-test format; both map sample k to float k/255.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage, UnidentifiedImageError

from . import colorspace as cs
from .errors import DecodeError, ManifestError, ShapeError
from .weights_io import read_tensors, write_tensors

SPLITS = ("train", "val", "test", "unassigned")
CACHE_ENV = "BLINDIQ_CACHE_DIR"


@dataclass
class ManifestEntry:
    path: str
    mos: float
    split: str = "unassigned"


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    source: str = ""
    mos_range: tuple[float, float] | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def subset(self, split: str | None) -> "Manifest":
        if split is None:
            return self
        kept = [e for e in self.entries if e.split == split]
        return Manifest(kept, self.source, self.mos_range)

    def mos_vector(self) -> np.ndarray:
        return np.array([e.mos for e in self.entries], dtype=np.float64)


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    base = path.parent
    source = path.stem
    mos_range: tuple[float, float] | None = None
    entries: list[ManifestEntry] = []
    header: list[str] | None = None
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            directive = line[1:].strip()
            if "=" in directive:
                key, value = directive.split("=", 1)
                key, value = key.strip(), value.strip()
                if key == "source":
                    source = value
                elif key == "mos_range":
                    try:
                        lo, hi = (float(v) for v in value.split(","))
                    except ValueError:
                        raise ManifestError(
                            f"{path}:{lineno}: malformed mos_range {value!r}"
                        ) from None
                    mos_range = (lo, hi)
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            if cells not in (["path", "mos"], ["path", "mos", "split"]):
                raise ManifestError(
                    f"{path}:{lineno}: header must be 'path,mos[,split]', got {line!r}"
                )
            header = cells
            continue
        if len(cells) != len(header):
            raise ManifestError(
                f"{path}:{lineno}: expected {len(header)} columns, got {len(cells)}"
            )
        if not cells[0]:
            raise ManifestError(f"{path}:{lineno}: empty image path")
        try:
            mos = float(cells[1])
        except ValueError:
            raise ManifestError(
                f"{path}:{lineno}: non-numeric mos {cells[1]!r}"
            ) from None
        if mos_range is not None and not mos_range[0] <= mos <= mos_range[1]:
            raise ManifestError(
                f"{path}:{lineno}: mos {mos} outside declared range {mos_range}"
            )
        split = "unassigned"
        if len(header) == 3:
            split = cells[2] or "unassigned"
            if split not in SPLITS:
                raise ManifestError(f"{path}:{lineno}: unknown split {split!r}")
        resolved = cells[0] if os.path.isabs(cells[0]) else str(base / cells[0])
        entries.append(ManifestEntry(resolved, mos, split))
    if header is None:
        raise ManifestError(f"{path}: missing 'path,mos[,split]' header")
    if mos_range is None and entries:
        vec = [e.mos for e in entries]
        mos_range = (min(vec), max(vec))
    return Manifest(entries, source, mos_range)


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    lines = []
    if manifest.source:
        lines.append(f"# source={manifest.source}")
    if manifest.mos_range is not None:
        lines.append(f"# mos_range={manifest.mos_range[0]!r},{manifest.mos_range[1]!r}")
    lines.append("path,mos,split")
    for e in manifest.entries:
        lines.append(f"{e.path},{e.mos!r},{e.split}")
    Path(path).write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------------
# Decoding
# --------------------------------------------------------------------------

def _read_ppm(data: bytes, path) -> np.ndarray:
    pos = 0

    def token() -> bytes:
        nonlocal pos
        while pos < len(data):
            if data[pos : pos + 1].isspace():
                pos += 1
            elif data[pos : pos + 1] == b"#":
                while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DecodeError(f"{path}: truncated PPM header")
        return data[start:pos]

    if token() != b"P6":
        raise DecodeError(f"{path}: not a binary (P6) PPM")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError:
        raise DecodeError(f"{path}: malformed PPM header") from None
    if maxval != 255:
        raise DecodeError(f"{path}: only 8-bit PPM supported (maxval={maxval})")
    pos += 1  # single whitespace after maxval
    need = width * height * 3
    raw = data[pos : pos + need]
    if len(raw) != need:
        raise DecodeError(
            f"{path}: corrupt PPM stream: need {need} pixel bytes, have {len(raw)}"
        )
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)


def decode_image(path: str | Path) -> cs.Image:
    """Decode PNG or P6 PPM into an RGB image with values k/255."""
    path = Path(path)
    if not path.exists():
        raise DecodeError(f"image not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        arr = _read_ppm(path.read_bytes(), path)
    elif suffix == ".png":
        try:
            with PILImage.open(path) as im:
                if im.mode != "RGB":
                    im = im.convert("RGB")
                arr = np.asarray(im, dtype=np.uint8)
        except (UnidentifiedImageError, OSError, ValueError) as exc:
            raise DecodeError(f"{path}: cannot decode PNG ({exc})") from None
    else:
        raise DecodeError(f"{path}: unsupported image format {suffix!r}")
    return cs.Image((arr.astype(np.float32) / 255.0), cs.RGB)


def write_ppm(path: str | Path, rgb_u8: np.ndarray) -> None:
    """Write a [H,W,3] uint8 raster as binary PPM."""
    rgb_u8 = np.asarray(rgb_u8, dtype=np.uint8)
    if rgb_u8.ndim != 3 or rgb_u8.shape[2] != 3:
        raise ShapeError(f"expected [H,W,3] uint8, got {rgb_u8.shape}")
    h, w = rgb_u8.shape[:2]
    Path(path).write_bytes(f"P6\n{w} {h}\n255\n".encode() + rgb_u8.tobytes())


# --------------------------------------------------------------------------
# Feature extraction with a disk cache
# --------------------------------------------------------------------------

def _branch_fingerprint(h: "hashlib._Hash", branch) -> None:
    h.update(branch.encoder.spec.kind.encode())
    for name in sorted(branch.encoder.store):
        h.update(name.encode())
        h.update(branch.encoder.store[name].tobytes())
    h.update(repr((branch.resize_to, branch.center_crop_to)).encode())
    h.update(repr(sorted(branch.norms.items())).encode())


def _cache_key(model, branch: str, space: str, manifest: Manifest) -> str:
    h = hashlib.sha256()
    h.update(branch.encode())
    h.update(space.encode())
    if branch in ("authentic", "both"):
        _branch_fingerprint(h, model.authentic)
    if branch in ("synthetic", "both"):
        _branch_fingerprint(h, model.synthetic)
    for e in manifest.entries:
        h.update(e.path.encode())
        h.update(repr(e.mos).encode())
    return h.hexdigest()


def _embed_one(model, branch: str, space: str, entry: ManifestEntry) -> np.ndarray:
    img = decode_image(entry.path)
    if branch == "both":
        return model.branch_features(img, space)
    if branch == "authentic":
        return model.authentic.embed(img, space)
    if branch == "synthetic":
        return model.synthetic.embed(img, space)
    raise ShapeError(f"unknown branch {branch!r}")


def extract_features(model, manifest: Manifest, branch: str = "both",
                     space: str = cs.RGB, cache_dir: str | Path | None = None,
                     threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Embed every manifest image; rows follow manifest order.

    Results are cached on disk keyed by (encoder weights, preprocessing,
    space, manifest contents); a hit returns the stored matrix unchanged.
    """
    if cache_dir is None:
        cache_dir = os.environ.get(CACHE_ENV)
    cache_path = None
    if cache_dir:
        cache_path = Path(cache_dir) / f"{_cache_key(model, branch, space, manifest)}.larw"
        if cache_path.exists():
            blob = read_tensors(cache_path)
            return blob["features"], blob["mos"]

    failures: list[str] = []

    def run(entry: ManifestEntry):
        try:
            return _embed_one(model, branch, space, entry)
        except Exception as exc:  # collected and re-raised together
            failures.append(f"{entry.path}: {exc}")
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, manifest.entries))
    else:
        rows = [run(e) for e in manifest.entries]
    if failures:
        raise DecodeError(
            "feature extraction failed for "
            f"{len(failures)} image(s):\n" + "\n".join(failures)
        )
    features = np.stack(rows).astype(np.float32)
    mos = manifest.mos_vector()
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        write_tensors(cache_path, {"features": features, "mos": mos})
    return features, mos
