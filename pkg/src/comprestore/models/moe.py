"""
Degradation-aware mixture-of-experts feed-forward layer.

Experts are split into a global group (haze, low-light, over-exposure) and a
spatial group (rain, snow, blur, noise, artifact), one expert per factor.
Each group has its own gate over concat(GAP(x), g); gate weights are
multiplied by the perception mask and renormalized, so experts of absent
factors receive exactly zero weight. Spatial experts are further modulated
by a per-pixel router. A half-width base FFN is always active.

file: src/comprestore/models/moe.py
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from comprestore.data.catalog import GLOBAL_INDICES, NUM_FACTORS, SPATIAL_INDICES

MOE_MODES = ("decoupled", "shared", "joint_gate")


def renorm(weights: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """(pi * m) / sum(pi * m) along the last dim; rows whose product sums to 0 stay 0."""
    masked = weights * mask.to(weights.dtype)
    total = masked.sum(dim=-1, keepdim=True)
    return masked / torch.where(total > 0, total, torch.ones_like(total))


class GatedDWFFN(nn.Module):
    """1x1 expand to 2 * hidden, 3x3 depthwise, GELU gate, 1x1 project."""

    def __init__(self, channels: int, hidden: int):
        super().__init__()
        self.expand = nn.Conv2d(channels, 2 * hidden, 1)
        self.dwconv = nn.Conv2d(2 * hidden, 2 * hidden, 3, padding=1, groups=2 * hidden)
        self.project = nn.Conv2d(hidden, channels, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        a, b = self.dwconv(self.expand(x)).chunk(2, dim=1)
        return self.project(F.gelu(a) * b)


@dataclass
class Routing:
    global_weights: torch.Tensor             # (B, 3)
    spatial_weights: torch.Tensor            # (B, 5)
    router: Optional[torch.Tensor] = None    # (B, 5, H, W)


class DecoupledMoE(nn.Module):
    def __init__(
        self,
        channels: int,
        token_dim: int = 256,
        expansion: float = 2.0,
        mode: str = "decoupled",
        spatial_router: bool = True,
    ):
        super().__init__()
        if mode not in MOE_MODES:
            raise ValueError(f"unknown moe mode {mode!r}; expected one of {MOE_MODES}")
        self.mode = mode
        self.use_router = spatial_router and mode != "shared"
        hidden = max(1, int(channels * expansion))

        self.base = GatedDWFFN(channels, max(1, hidden // 2))
        self.global_experts = nn.ModuleList(GatedDWFFN(channels, hidden) for _ in GLOBAL_INDICES)
        self.spatial_experts = nn.ModuleList(GatedDWFFN(channels, hidden) for _ in SPATIAL_INDICES)
        gate_in = channels + token_dim
        if mode == "decoupled":
            self.global_gate = nn.Linear(gate_in, len(GLOBAL_INDICES))
            self.spatial_gate = nn.Linear(gate_in, len(SPATIAL_INDICES))
        else:
            self.joint_gate = nn.Linear(gate_in, NUM_FACTORS)
        self.router = nn.Conv2d(channels, len(SPATIAL_INDICES), 1) if self.use_router else None
        self.register_buffer("global_index", torch.tensor(GLOBAL_INDICES), persistent=False)
        self.register_buffer("spatial_index", torch.tensor(SPATIAL_INDICES), persistent=False)

    def route(self, x: torch.Tensor, mask: torch.Tensor, g: torch.Tensor) -> Routing:
        """mask: (B, 8) binary or probabilities in canonical factor order."""
        feats = torch.cat([x.mean(dim=(2, 3)), g], dim=1)
        mask = mask.to(x.dtype)
        if self.mode == "decoupled":
            pi_g = renorm(F.softmax(self.global_gate(feats), dim=-1), mask[:, self.global_index])
            pi_s = renorm(F.softmax(self.spatial_gate(feats), dim=-1), mask[:, self.spatial_index])
        else:
            joint = F.softmax(self.joint_gate(feats), dim=-1)
            if self.mode == "joint_gate":
                joint = renorm(joint, mask)
            pi_g, pi_s = joint[:, self.global_index], joint[:, self.spatial_index]
        router = torch.sigmoid(self.router(x)) if self.router is not None else None
        return Routing(pi_g, pi_s, router)

    def forward(self, x: torch.Tensor, mask: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        routing = self.route(x, mask, g)
        y = self.base(x)
        for i, expert in enumerate(self.global_experts):
            w = routing.global_weights[:, i]
            if torch.any(w != 0):
                y = y + w[:, None, None, None] * expert(x)
        for j, expert in enumerate(self.spatial_experts):
            w = routing.spatial_weights[:, j]
            if torch.any(w != 0):
                out = expert(x)
                if routing.router is not None:
                    out = routing.router[:, j : j + 1] * out
                y = y + w[:, None, None, None] * out
        return y
