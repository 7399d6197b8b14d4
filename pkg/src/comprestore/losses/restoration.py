"""
Restoration objectives and the mask-overload augmentation.

total = L1(y_hat, y) + lambda_freq * masked spectral L1 + lambda_base * base L1,
where the base target is the self-guided-filtered clean image.

file: src/comprestore/losses/restoration.py
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from comprestore.data.catalog import FACTOR_INDEX, GLOBAL_INDICES


def _check_shapes(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def spatial_l1(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    _check_shapes(pred, target)
    return (pred - target).abs().mean()


def center_side(height: int, width: int, ratio: float = 0.2) -> int:
    """Side of the removed low-frequency square: floor(ratio * min(H, W))."""
    side = math.floor(ratio * min(height, width))
    if side < 1 or side >= min(height, width):
        raise ValueError(f"degenerate frequency mask: side {side} for {height}x{width} at ratio {ratio}")
    return side


def frequency_keep_mask(height: int, width: int, ratio: float = 0.2, device=None) -> torch.Tensor:
    """Boolean (H, W) mask over the centered spectrum; False inside the center square."""
    side = center_side(height, width, ratio)
    keep = torch.ones(height, width, dtype=torch.bool, device=device)
    top, left = height // 2 - side // 2, width // 2 - side // 2
    keep[top:top + side, left:left + side] = False
    return keep


def masked_freq_l1(pred: torch.Tensor, target: torch.Tensor, ratio: float = 0.2) -> torch.Tensor:
    """
    Mean over retained bins (and channels, batch) of | |F(pred)| - |F(target)| |,
    on the fftshift-centered full spectrum of each channel.
    """
    _check_shapes(pred, target)
    h, w = pred.shape[-2:]
    keep = frequency_keep_mask(h, w, ratio, pred.device)
    mag_p = torch.fft.fftshift(torch.fft.fft2(pred, norm="ortho"), dim=(-2, -1)).abs()
    mag_t = torch.fft.fftshift(torch.fft.fft2(target, norm="ortho"), dim=(-2, -1)).abs()
    return (mag_p - mag_t).abs()[..., keep].mean()


def box_mean(x: torch.Tensor, radius: int) -> torch.Tensor:
    """Mean over (2r+1)^2 windows; border windows divide by their in-image area."""
    return F.avg_pool2d(x, 2 * radius + 1, stride=1, padding=radius, count_include_pad=False)


def guided_filter(guide: torch.Tensor, src: torch.Tensor, radius: int = 15, eps: float = 1e-3) -> torch.Tensor:
    """Classical guided filter, per channel. guide/src: (B, C, H, W) or (C, H, W)."""
    if radius < 1 or eps <= 0:
        raise ValueError(f"guided filter needs radius >= 1 and eps > 0, got r={radius}, eps={eps}")
    squeeze = guide.dim() == 3
    if squeeze:
        guide, src = guide.unsqueeze(0), src.unsqueeze(0)
    _check_shapes(guide, src)
    mean_i = box_mean(guide, radius)
    mean_p = box_mean(src, radius)
    cov_ip = box_mean(guide * src, radius) - mean_i * mean_p
    var_i = box_mean(guide * guide, radius) - mean_i * mean_i
    a = cov_ip / (var_i + eps)
    b = mean_p - a * mean_i
    out = box_mean(a, radius) * guide + box_mean(b, radius)
    return out.squeeze(0) if squeeze else out


class BaseTargetCache:
    """Self-guided-filter targets keyed by sample; one writer per key, oldest entries evicted first."""

    def __init__(self, radius: int = 15, eps: float = 1e-3, max_entries: int = 4096):
        self.radius = radius
        self.eps = eps
        self.max_entries = max_entries
        self._store: "OrderedDict[str, torch.Tensor]" = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._store)

    def compute(self, clean: torch.Tensor) -> torch.Tensor:
        with torch.no_grad():
            return guided_filter(clean, clean, self.radius, self.eps)

    def get(self, clean: torch.Tensor, keys: Optional[Sequence[str]] = None) -> torch.Tensor:
        """clean: (B, 3, H, W). Without keys nothing is cached."""
        if keys is None:
            return self.compute(clean)
        rows = []
        for img, key in zip(clean, keys):
            with self._lock:
                cached = self._store.get(key)
            if cached is None:
                cached = self.compute(img.detach().cpu()[None])[0]
                with self._lock:
                    cached = self._store.setdefault(key, cached)
                    while len(self._store) > self.max_entries:
                        self._store.popitem(last=False)
            rows.append(cached)
        return torch.stack(rows).to(clean)


def base_loss(base_pred: torch.Tensor, target: torch.Tensor, radius: int = 15, eps: float = 1e-3) -> torch.Tensor:
    """L1 between the base prediction and the self-guided-filtered target."""
    return spatial_l1(base_pred, guided_filter(target, target, radius, eps))


class RestorationCriterion(nn.Module):
    def __init__(
        self,
        lambda_freq: float = 0.1,
        lambda_base: float = 0.1,
        center_ratio: float = 0.2,
        gf_radius: int = 15,
        gf_eps: float = 1e-3,
    ):
        super().__init__()
        if lambda_freq < 0 or lambda_base < 0:
            raise ValueError("loss weights must be nonnegative")
        self.lambda_freq = lambda_freq
        self.lambda_base = lambda_base
        self.center_ratio = center_ratio
        self.targets = BaseTargetCache(gf_radius, gf_eps)

    def forward(
        self,
        pred: torch.Tensor,
        base_pred: Optional[torch.Tensor],
        target: torch.Tensor,
        keys: Optional[Sequence[str]] = None,
    ) -> Tuple[torch.Tensor, Dict[str, float]]:
        l1 = spatial_l1(pred, target)
        l_freq = masked_freq_l1(pred, target, self.center_ratio) if self.lambda_freq else pred.new_zeros(())
        if self.lambda_base and base_pred is not None:
            l_base = spatial_l1(base_pred, self.targets.get(target, keys))
        else:
            l_base = pred.new_zeros(())
        total = l1 + self.lambda_freq * l_freq + self.lambda_base * l_base
        return total, {
            "l1": float(l1.detach()),
            "l_freq": float(l_freq.detach()),
            "l_base": float(l_base.detach()),
            "total": float(total.detach()),
        }


def restoration_loss(
    pred: torch.Tensor,
    base_pred: Optional[torch.Tensor],
    target: torch.Tensor,
    lambda_freq: float = 0.1,
    lambda_base: float = 0.1,
    **kwargs,
) -> torch.Tensor:
    total, _ = RestorationCriterion(lambda_freq, lambda_base, **kwargs)(pred, base_pred, target)
    return total


_RAIN, _SNOW = FACTOR_INDEX["rain"], FACTOR_INDEX["snow"]
_HAZE, _LOW_LIGHT = FACTOR_INDEX["haze"], FACTOR_INDEX["low_light"]


def overload_eligible(masks: torch.Tensor) -> torch.Tensor:
    """Rain or snow set, and neither haze nor low-light set. masks: (B, 8)."""
    m = masks > 0.5
    return (m[:, _RAIN] | m[:, _SNOW]) & ~m[:, _HAZE] & ~m[:, _LOW_LIGHT]


def mask_overload(masks: torch.Tensor, rng_seed: int, prob: float = 0.05) -> torch.Tensor:
    """
    With probability `prob`, each eligible mask gets one uniformly chosen
    global-group bit (haze, low-light or over-exposure) set to 1.
    Returns a new tensor; ineligible rows are untouched.
    """
    rng = np.random.default_rng(rng_seed)
    n = masks.shape[0]
    flips = rng.random(n) < prob
    eligible = overload_eligible(masks).cpu().numpy()
    out = masks.clone()
    for i in np.flatnonzero(flips & eligible):
        # over-exposure may already be set; uniform over the unset global bits
        unset = [j for j in GLOBAL_INDICES if out[i, j] <= 0.5]
        out[i, unset[rng.integers(len(unset))]] = 1
    return out
