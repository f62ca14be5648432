"""Synthetic desk-scale corpus: blurred noise textures with blur level as
the quality proxy.

Each image starts as an independent random RGB texture (broadband noise on
a smooth color ramp) and receives one of ``levels`` Gaussian blur strengths.
The subjective score is the inverted blur level on a 1..levels scale, so
sharper images score higher.  Deterministic under the seed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .data import Manifest, ManifestEntry, load_manifest, save_manifest, write_ppm

BLUR_SIGMAS = (0.0, 0.8, 1.6, 2.6, 4.0)


def generate_blur_corpus(directory: str | Path, n: int = 200,
                         size: tuple[int, int] = (96, 96), seed: int = 0,
                         test_fraction: float = 0.2) -> Manifest:
    """Write ``n`` PPM images plus ``manifest.csv``; returns the manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    levels = len(BLUR_SIGMAS)
    h, w = size
    yy, xx = np.mgrid[0:h, 0:w]
    entries: list[ManifestEntry] = []
    for i in range(n):
        level = i % levels
        noise = rng.uniform(0.0, 1.0, size=(h, w, 3))
        phase = rng.uniform(0, 2 * np.pi, size=2)
        freq = rng.uniform(1.0, 3.0, size=2)
        ramp = 0.5 + 0.25 * np.sin(2 * np.pi * freq[0] * xx / w + phase[0])
        ramp += 0.25 * np.sin(2 * np.pi * freq[1] * yy / h + phase[1])
        img = 0.55 * noise + 0.45 * ramp[..., None]
        if BLUR_SIGMAS[level] > 0:
            img = gaussian_filter(img, sigma=(BLUR_SIGMAS[level],) * 2 + (0.0,))
        u8 = np.clip(img * 255.0 + 0.5, 0, 255).astype(np.uint8)
        name = f"img_{i:04d}_l{level}.ppm"
        write_ppm(directory / name, u8)
        split = "test" if rng.uniform() < test_fraction else "train"
        # Bare filenames: the manifest lives beside the images, and loading
        # resolves relative paths against the manifest directory.
        entries.append(ManifestEntry(name, float(levels - level), split))
    manifest = Manifest(entries, source="blur-toy", mos_range=(1.0, float(levels)))
    save_manifest(manifest, directory / "manifest.csv")
    return load_manifest(directory / "manifest.csv")
