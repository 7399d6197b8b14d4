"""
Synthetic degradation models for the eight atomic factors.

Images are float64 arrays of shape (3, H, W) with values in [0, 1]. Every model
is a pure function of (image, severity, seed).

file: src/comprestore/data/degradations.py
"""

from __future__ import annotations

import math
from typing import Callable, Dict, Mapping, Tuple

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from comprestore.core.errors import SeverityError
from comprestore.data.catalog import FACTOR_INDEX, DegradationSpec

# Hard validity bounds; the catalog's sampling ranges must lie inside these.
VALID_RANGES: Dict[str, Dict[str, Tuple[float, float]]] = {
    "rain": {"density": (0.0, 0.05), "length": (1, 41), "angle": (-60.0, 60.0), "intensity": (0.0, 1.0)},
    "snow": {"density": (0.0, 0.05), "size": (0.5, 8.0), "intensity": (0.0, 1.0)},
    "haze": {"transmission": (0.05, 1.0), "airlight": (0.7, 1.0)},
    "low_light": {"gain": (0.05, 1.0)},
    "over_exposure": {"gain": (1.0, 4.0)},
    "blur": {"sigma": (0.0, 5.0)},
    "noise": {"sigma": (0.0, 0.3)},
    "artifact": {"quality": (1.0, 100.0)},
}

# exponent below 1 lifts shadows slightly relative to the gain alone
LOW_LIGHT_GAMMA = 0.9
BLUR_TRUNCATE = 4.0
DCT_BLOCK = 8

# Standard JPEG luminance quantization table.
JPEG_LUMA_TABLE = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.float64,
)


def validate_severity(spec: DegradationSpec) -> None:
    if spec.factor not in VALID_RANGES:
        raise SeverityError(f"unknown factor {spec.factor!r}")
    bounds = VALID_RANGES[spec.factor]
    missing = set(bounds) - set(spec.severity)
    if missing:
        raise SeverityError(f"{spec.factor}: missing severity parameter(s) {sorted(missing)}")
    for key, value in spec.severity.items():
        if key not in bounds:
            raise SeverityError(f"{spec.factor}: unknown severity parameter {key!r}")
        lo, hi = bounds[key]
        if not (lo <= float(value) <= hi) or not math.isfinite(float(value)):
            raise SeverityError(f"{spec.factor}.{key}={value} outside [{lo}, {hi}]")


def sample_severity(factor: str, ranges: Mapping[str, Tuple[float, float]], rng: np.random.Generator) -> Dict[str, float]:
    """Draws one severity dict uniformly from the catalog's sampling ranges."""
    out: Dict[str, float] = {}
    for key in sorted(ranges):
        lo, hi = ranges[key]
        value = float(rng.uniform(lo, hi))
        if factor == "rain" and key == "length":
            value = float(2 * int(round(value / 2)) + 1)  # odd kernel length
        out[key] = value
    return out


def _line_kernel(length: int, angle_deg: float) -> np.ndarray:
    size = int(length) if int(length) % 2 else int(length) + 1
    kernel = np.zeros((size, size))
    c = (size - 1) / 2
    theta = math.radians(angle_deg)
    for t in np.linspace(-c, c, 4 * size):
        y = int(round(c + t * math.cos(theta)))
        x = int(round(c + t * math.sin(theta)))
        kernel[y, x] = 1.0
    return kernel


def add_rain(img: np.ndarray, severity: Mapping[str, float], rng: np.random.Generator) -> np.ndarray:
    _, h, w = img.shape
    seeds = (rng.random((h, w)) < severity["density"]) * rng.uniform(0.5, 1.0, (h, w))
    streaks = ndimage.convolve(seeds, _line_kernel(int(severity["length"]), severity["angle"]), mode="constant")
    streaks = ndimage.gaussian_filter(np.clip(streaks, 0.0, 1.0), sigma=0.5, mode="reflect")
    return np.clip(img + severity["intensity"] * streaks[None], 0.0, 1.0)


def add_snow(img: np.ndarray, severity: Mapping[str, float], rng: np.random.Generator) -> np.ndarray:
    _, h, w = img.shape
    count = int(rng.binomial(h * w, severity["density"]))
    ys = rng.uniform(0, h, count)
    xs = rng.uniform(0, w, count)
    radii = rng.uniform(0.5 * severity["size"], severity["size"], count)
    yy, xx = np.mgrid[0:h, 0:w]
    flakes = np.zeros((h, w))
    for y, x, r in zip(ys, xs, radii):
        dist = np.hypot(yy + 0.5 - y, xx + 0.5 - x)
        flakes = np.maximum(flakes, np.clip(r + 0.5 - dist, 0.0, 1.0))
    return np.clip(img + severity["intensity"] * flakes[None], 0.0, 1.0)


def add_haze(img: np.ndarray, severity: Mapping[str, float], rng: np.random.Generator) -> np.ndarray:
    t, a = severity["transmission"], severity["airlight"]
    return np.clip(img * t + a * (1.0 - t), 0.0, 1.0)


def darken(img: np.ndarray, severity: Mapping[str, float], rng: np.random.Generator) -> np.ndarray:
    return np.clip(severity["gain"] * img ** LOW_LIGHT_GAMMA, 0.0, 1.0)


def overexpose(img: np.ndarray, severity: Mapping[str, float], rng: np.random.Generator) -> np.ndarray:
    return np.clip(severity["gain"] * img, 0.0, 1.0)


def gaussian_blur(img: np.ndarray, severity: Mapping[str, float], rng: np.random.Generator) -> np.ndarray:
    sigma = severity["sigma"]
    if sigma == 0:
        return img.copy()
    # scipy "reflect" is half-sample symmetric, which keeps the pixel sum.
    out = ndimage.gaussian_filter(img, sigma=(0, sigma, sigma), mode="reflect", truncate=BLUR_TRUNCATE)
    return np.clip(out, 0.0, 1.0)


def gaussian_noise(img: np.ndarray, severity: Mapping[str, float], rng: np.random.Generator) -> np.ndarray:
    return np.clip(img + rng.normal(0.0, severity["sigma"], img.shape), 0.0, 1.0)


def quantization_table(quality: float) -> np.ndarray:
    quality = float(np.clip(quality, 1.0, 100.0))
    scale = 5000.0 / quality if quality < 50 else 200.0 - 2.0 * quality
    return np.clip(np.floor((JPEG_LUMA_TABLE * scale + 50.0) / 100.0), 1.0, None)


def block_dct_artifact(img: np.ndarray, severity: Mapping[str, float], rng: np.random.Generator) -> np.ndarray:
    c, h, w = img.shape
    b = DCT_BLOCK
    ph, pw = (-h) % b, (-w) % b
    padded = np.pad(img * 255.0 - 128.0, ((0, 0), (0, ph), (0, pw)), mode="edge")
    H, W = padded.shape[1:]
    blocks = padded.reshape(c, H // b, b, W // b, b).transpose(0, 1, 3, 2, 4)
    coeffs = sfft.dctn(blocks, axes=(-2, -1), norm="ortho")
    table = quantization_table(severity["quality"])
    coeffs = np.round(coeffs / table) * table
    blocks = sfft.idctn(coeffs, axes=(-2, -1), norm="ortho")
    out = blocks.transpose(0, 1, 3, 2, 4).reshape(c, H, W)[:, :h, :w]
    return np.clip((out + 128.0) / 255.0, 0.0, 1.0)


DEGRADATIONS: Dict[str, Callable[[np.ndarray, Mapping[str, float], np.random.Generator], np.ndarray]] = {
    "rain": add_rain,
    "snow": add_snow,
    "haze": add_haze,
    "low_light": darken,
    "over_exposure": overexpose,
    "blur": gaussian_blur,
    "noise": gaussian_noise,
    "artifact": block_dct_artifact,
}
assert set(DEGRADATIONS) == set(FACTOR_INDEX)


def apply_degradation(img: np.ndarray, spec: DegradationSpec, rng_seed: int) -> np.ndarray:
    """Applies one factor at the given severity; deterministic in (img, spec, rng_seed)."""
    validate_severity(spec)
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or not np.all(np.isfinite(img)):
        raise ValueError("image must be a finite (C, H, W) array")
    rng = np.random.default_rng(np.random.SeedSequence([int(rng_seed), FACTOR_INDEX[spec.factor]]))
    return DEGRADATIONS[spec.factor](img, spec.severity, rng)
