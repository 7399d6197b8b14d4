"""
Composition of atomic degradations, aligned multi-task crops and procedural scenes.

file: src/comprestore/data/synthesis.py
"""

from __future__ import annotations

import hashlib
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from comprestore.core.errors import CropError
from comprestore.data.catalog import FACTOR_INDEX, DegradationSpec, DegradationVector, TaskConfig
from comprestore.data.degradations import apply_degradation, sample_severity

Window = Tuple[int, int, int]  # (top, left, size)


def derive_seed(*parts: object) -> int:
    """Stable 63-bit seed from arbitrary parts (names, indices, global seed)."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << 63) - 1)


def plan_specs(cfg: TaskConfig, ranges: Mapping[str, Mapping[str, Tuple[float, float]]], rng_seed: int) -> List[DegradationSpec]:
    """Samples one severity per factor of `cfg`, in canonical application order."""
    rng = np.random.default_rng(derive_seed("severity", rng_seed, cfg.name))
    severities = {f: sample_severity(f, ranges[f], rng) for f in sorted(cfg.factors, key=FACTOR_INDEX.__getitem__)}
    return cfg.specs(severities)


def compose(
    img: np.ndarray,
    cfg: TaskConfig,
    rng_seed: int,
    specs: Optional[Sequence[DegradationSpec]] = None,
    ranges: Optional[Mapping[str, Mapping[str, Tuple[float, float]]]] = None,
) -> Tuple[np.ndarray, DegradationVector]:
    """
    Applies every factor of `cfg` in canonical order and returns (image, label).

    Severities come from `specs` when given, otherwise they are sampled from
    `ranges` under `rng_seed`. The clean config returns its input unchanged.
    """
    if specs is None:
        if cfg.factors and ranges is None:
            raise ValueError("compose needs either explicit specs or severity ranges")
        specs = plan_specs(cfg, ranges or {}, rng_seed)
    if sorted(s.factor for s in specs) != sorted(cfg.factors):
        raise ValueError(f"specs {[s.factor for s in specs]} do not match config {cfg.name!r}")

    out = np.asarray(img, dtype=np.float64)
    for spec in sorted(specs, key=lambda s: FACTOR_INDEX[s.factor]):
        out = apply_degradation(out, spec, derive_seed("apply", rng_seed, cfg.name, spec.factor))
    return out, cfg.label


def crop_window(height: int, width: int, crop_size: int, scene_id: str, rng_seed: int) -> Window:
    if height < crop_size or width < crop_size:
        raise CropError(f"scene {scene_id!r} is {height}x{width}, smaller than crop {crop_size}")
    rng = np.random.default_rng(derive_seed("window", rng_seed, scene_id))
    top = int(rng.integers(0, height - crop_size + 1))
    left = int(rng.integers(0, width - crop_size + 1))
    return top, left, crop_size


def crop(img: np.ndarray, window: Window) -> np.ndarray:
    top, left, size = window
    return img[..., top:top + size, left:left + size]


def aligned_views(
    scene: np.ndarray,
    configs: Sequence[TaskConfig],
    crop_size: int,
    rng_seed: int,
    scene_id: str = "scene",
    ranges: Optional[Mapping[str, Mapping[str, Tuple[float, float]]]] = None,
) -> List[Tuple[np.ndarray, DegradationVector]]:
    """One (crop, label) per config, all cut from the same window of `scene`."""
    _, h, w = scene.shape
    window = crop_window(h, w, crop_size, scene_id, rng_seed)
    views = []
    for cfg in configs:
        degraded, label = compose(scene, cfg, derive_seed(rng_seed, scene_id), ranges=ranges)
        views.append((crop(degraded, window), label))
    return views


def procedural_scene(size: int, seed: int) -> np.ndarray:
    """A deterministic natural-statistics RGB scene: gradient, shapes and 1/f texture."""
    rng = np.random.default_rng(derive_seed("scene", seed))
    yy, xx = np.mgrid[0:size, 0:size] / float(size)

    base = np.stack([rng.uniform(0.2, 0.8) + rng.uniform(-0.3, 0.3) * (xx * rng.uniform(-1, 1) + yy * rng.uniform(-1, 1)) for _ in range(3)])
    for _ in range(int(rng.integers(4, 10))):
        color = rng.uniform(0.0, 1.0, 3)[:, None, None]
        if rng.random() < 0.5:
            y0, x0 = rng.uniform(0, 1, 2)
            hgt, wid = rng.uniform(0.08, 0.4, 2)
            shape = (yy >= y0) & (yy < y0 + hgt) & (xx >= x0) & (xx < x0 + wid)
        else:
            cy, cx = rng.uniform(0, 1, 2)
            shape = np.hypot(yy - cy, xx - cx) < rng.uniform(0.05, 0.25)
        base = np.where(shape[None], color, base)

    # 1/f texture via spectral shaping of white noise
    fy = np.fft.fftfreq(size)[:, None]
    fx = np.fft.fftfreq(size)[None, :]
    radius = np.hypot(fy, fx)
    radius[0, 0] = 1.0
    spectrum = np.fft.fft2(rng.normal(size=(size, size))) / radius
    texture = np.real(np.fft.ifft2(spectrum))
    texture = (texture - texture.mean()) / (texture.std() + 1e-12)

    scene = ndimage.gaussian_filter(base, sigma=(0, 0.7, 0.7)) + 0.06 * texture[None]
    return np.clip(scene, 0.0, 1.0)
