"""
Luminance PSNR/SSIM and multi-label perception metrics.

file: src/comprestore/engine/metrics.py
"""

from __future__ import annotations

import math
from typing import Dict

import torch
import torch.nn.functional as F

from comprestore.data.catalog import FACTORS, NUM_FACTORS

PSNR_CAP = 99.0
BT601 = (0.299, 0.587, 0.114)
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def to_luma(img: torch.Tensor) -> torch.Tensor:
    """(..., 3, H, W) RGB in [0, 1] -> (..., H, W) BT.601 luminance."""
    if img.shape[-3] != 3:
        raise ValueError(f"expected 3 channels, got shape {tuple(img.shape)}")
    w = img.new_tensor(BT601).view(3, 1, 1)
    return (img * w).sum(dim=-3)


def _check_pair(pred: torch.Tensor, target: torch.Tensor) -> None:
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")


def psnr_y(pred: torch.Tensor, target: torch.Tensor) -> float:
    """PSNR on the Y channel of one (3, H, W) pair, peak 1.0, capped at 99 dB."""
    _check_pair(pred, target)
    mse = float(((to_luma(pred.double()) - to_luma(target.double())) ** 2).mean())
    if mse == 0.0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * math.log10(1.0 / mse))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA, dtype=torch.float64) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype) - (size - 1) / 2.0
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    g = g / g.sum()
    return torch.outer(g, g)


def ssim_y(pred: torch.Tensor, target: torch.Tensor) -> float:
    """Single-scale SSIM on Y, 11x11 Gaussian (sigma 1.5), dynamic range 1, valid windows only."""
    _check_pair(pred, target)
    x = to_luma(pred.double())[None, None]
    y = to_luma(target.double())[None, None]
    if min(x.shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"image {tuple(x.shape[-2:])} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    win = gaussian_window().to(x.device)[None, None]
    c1, c2 = SSIM_K1**2, SSIM_K2**2

    mu_x = F.conv2d(x, win)
    mu_y = F.conv2d(y, win)
    var_x = F.conv2d(x * x, win) - mu_x**2
    var_y = F.conv2d(y * y, win) - mu_y**2
    cov = F.conv2d(x * y, win) - mu_x * mu_y
    ssim_map = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / ((mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2))
    return float(ssim_map.mean())


def perception_metrics(logits: torch.Tensor, labels: torch.Tensor) -> Dict[str, object]:
    """
    logits: (N, 9) or (N, 8); labels: (N, >=8) multi-hot. Only the 8 factor bits count.
    Returns bit_accuracy, exact_match and per-factor precision/recall/f1.
    """
    pred = (logits[:, :NUM_FACTORS] >= 0)
    truth = labels[:, :NUM_FACTORS] > 0.5
    tp = (pred & truth).sum(dim=0).double()
    fp = (pred & ~truth).sum(dim=0).double()
    fn = (~pred & truth).sum(dim=0).double()
    precision = torch.where(tp + fp > 0, tp / (tp + fp).clamp_min(1), torch.zeros_like(tp))
    recall = torch.where(tp + fn > 0, tp / (tp + fn).clamp_min(1), torch.zeros_like(tp))
    f1 = torch.where(precision + recall > 0, 2 * precision * recall / (precision + recall).clamp_min(1e-12), torch.zeros_like(tp))
    return {
        "bit_accuracy": float((pred == truth).double().mean()),
        "exact_match": float((pred == truth).all(dim=1).double().mean()),
        "per_factor": {
            f: {"precision": float(precision[i]), "recall": float(recall[i]), "f1": float(f1[i])}
            for i, f in enumerate(FACTORS)
        },
    }
