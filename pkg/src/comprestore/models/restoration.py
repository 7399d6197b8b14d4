"""
Degradation-conditioned restoration network.

A five-stage U-shaped backbone of conditioned blocks (dual-domain mixer
followed by the degradation-aware MoE feed-forward) produces the detail
prediction; a small low-resolution CNN produces the coarse base. The two
are summed.

file: src/comprestore/models/restoration.py
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from comprestore.core.config import RestorationConfig
from comprestore.core.errors import DivergenceError
from comprestore.core.logger import get_logger
from comprestore.models.blocks import DualDomainMixer, LayerNorm2d
from comprestore.models.conditioning import TokenEncoder
from comprestore.models.moe import DecoupledMoE

logger = get_logger("comprestore.models.restoration")


@dataclass
class ModelOptions:
    """Architecture switches; everything on is the full model."""
    semantic_embedding: bool = True
    global_token: bool = True
    strict_masking: bool = True
    soft_mask: bool = False
    semantic_token: bool = True
    stagewise: bool = True
    freq_branch: bool = True
    learn_gate: bool = True
    moe_mode: str = "decoupled"
    spatial_router: bool = True
    dc_correction: bool = True
    dual_branch: bool = True

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RestorationOutput:
    output: torch.Tensor
    residual: torch.Tensor
    base: Optional[torch.Tensor]
    conditioning: torch.Tensor  # (B, stages, e)


def pad_to_multiple(x: torch.Tensor, multiple: int):
    h, w = x.shape[-2:]
    ph, pw = (-h) % multiple, (-w) % multiple
    if not (ph or pw):
        return x, (h, w)
    mode = "reflect" if ph < h and pw < w else "replicate"
    return F.pad(x, (0, pw, 0, ph), mode=mode), (h, w)


class ConditionedBlock(nn.Module):
    """x -> LN -> dual-domain mix -> +x -> LN -> MoE FFN -> +x."""

    def __init__(self, channels: int, cfg: RestorationConfig, options: ModelOptions):
        super().__init__()
        heads = max(1, channels // cfg.head_dim)
        self.norm1 = LayerNorm2d(channels)
        self.mixer = DualDomainMixer(
            channels,
            token_dim=cfg.token_dim,
            num_heads=heads,
            window=cfg.window_size,
            num_experts=cfg.freq_experts,
            rank=cfg.freq_rank,
            eta=cfg.dc_eta,
            use_freq=options.freq_branch,
            learn_gate=options.learn_gate,
            dc_correction=options.dc_correction,
        )
        self.norm2 = LayerNorm2d(channels)
        self.moe = DecoupledMoE(
            channels,
            token_dim=cfg.token_dim,
            expansion=cfg.expert_expansion,
            mode=options.moe_mode,
            spatial_router=options.spatial_router,
        )

    def forward(self, x: torch.Tensor, mask: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        x = x + self.mixer(self.norm1(x), g)
        return x + self.moe(self.norm2(x), mask, g)


class Stage(nn.Module):
    def __init__(self, channels: int, cfg: RestorationConfig, options: ModelOptions):
        super().__init__()
        self.blocks = nn.ModuleList(ConditionedBlock(channels, cfg, options) for _ in range(cfg.blocks_per_stage))

    def forward(self, x: torch.Tensor, mask: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        for block in self.blocks:
            x = block(x, mask, g)
        return x


class Backbone(nn.Module):
    """
    U-shape over an odd number of stages: encoder stages separated by strided
    convolutions, a bottleneck, and decoder stages fed by transposed convolutions
    plus 1x1-fused additive skips.
    """

    def __init__(self, cfg: RestorationConfig, options: ModelOptions):
        super().__init__()
        widths = list(cfg.widths)
        if len(widths) % 2 == 0:
            raise ValueError(f"backbone needs an odd number of stages, got {len(widths)}")
        self.depth = len(widths) // 2
        self.widths = widths
        self.in_proj = nn.Conv2d(3, widths[0], 3, padding=1)
        self.stages = nn.ModuleList(Stage(w, cfg, options) for w in widths)
        self.downs = nn.ModuleList(
            nn.Conv2d(widths[i], widths[i + 1], 2, stride=2) for i in range(self.depth)
        )
        self.ups = nn.ModuleList(
            nn.ConvTranspose2d(widths[i], widths[i + 1], 2, stride=2)
            for i in range(self.depth, len(widths) - 1)
        )
        # decoder stage i + depth + 1 receives the skip from encoder stage depth - 1 - i
        self.fuses = nn.ModuleList(
            nn.Conv2d(widths[self.depth - 1 - i], widths[self.depth + 1 + i], 1) for i in range(self.depth)
        )
        self.out_proj = nn.Conv2d(widths[-1], 3, 3, padding=1)

    @property
    def multiple(self) -> int:
        return 2 ** self.depth

    def _check(self, x: torch.Tensor, stage: int) -> None:
        if not torch.isfinite(x).all():
            raise DivergenceError(
                f"non-finite activations after stage {stage + 1}/{len(self.widths)} "
                f"({int((~torch.isfinite(x)).sum())} of {x.numel()} values, shape {tuple(x.shape)})"
            )

    def forward(self, x: torch.Tensor, mask: torch.Tensor, conditioning: torch.Tensor) -> torch.Tensor:
        h = self.in_proj(x)
        skips: List[torch.Tensor] = []
        for s in range(self.depth):
            h = self.stages[s](h, mask, conditioning[:, s])
            self._check(h, s)
            skips.append(h)
            h = self.downs[s](h)
        h = self.stages[self.depth](h, mask, conditioning[:, self.depth])
        self._check(h, self.depth)
        for i in range(self.depth):
            s = self.depth + 1 + i
            h = self.ups[i](h) + self.fuses[i](skips[self.depth - 1 - i])
            h = self.stages[s](h, mask, conditioning[:, s])
            self._check(h, s)
        return self.out_proj(h)


class BaseBranch(nn.Module):
    """Coarse reconstruction at 1/4 resolution: bilinear down, small CNN, bilinear up."""

    def __init__(self, width: int = 16, factor: int = 4):
        super().__init__()
        self.factor = factor
        final = nn.Conv2d(width, 3, 3, padding=1)
        nn.init.zeros_(final.weight)
        nn.init.zeros_(final.bias)
        self.body = nn.Sequential(
            nn.Conv2d(3, width, 3, padding=1),
            nn.GELU(),
            nn.Conv2d(width, width, 3, padding=1),
            nn.GELU(),
            final,
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        if h < 8 or w < 8:
            raise ValueError(f"base branch needs H, W >= 8, got {h}x{w}")
        xp, _ = pad_to_multiple(x, self.factor)
        low = F.interpolate(xp, scale_factor=1.0 / self.factor, mode="bilinear", align_corners=False, antialias=True)
        up = F.interpolate(self.body(low), size=xp.shape[-2:], mode="bilinear", align_corners=False)
        return up[..., :h, :w]


class Restorer(nn.Module):
    """y_hat = R(x; m, p): token encoder + conditioned backbone + base branch."""

    def __init__(
        self,
        embed_dim: int,
        cfg: Optional[RestorationConfig] = None,
        options: Optional[ModelOptions] = None,
    ):
        super().__init__()
        self.cfg = cfg or RestorationConfig()
        self.options = options or ModelOptions()
        self.embed_dim = embed_dim
        opts = self.options
        self.encoder = TokenEncoder(
            embed_dim,
            token_dim=self.cfg.token_dim,
            num_stages=len(self.cfg.widths),
            num_heads=self.cfg.token_heads,
            strict_masking=opts.strict_masking,
            use_semantic_token=opts.semantic_token,
            use_global_token=opts.global_token,
            stagewise=opts.stagewise,
        )
        self.backbone = Backbone(self.cfg, opts)
        self.base = BaseBranch(self.cfg.base_width) if opts.dual_branch else None
        logger.debug(
            "Restorer: widths=%s blocks/stage=%d params=%d options=%s",
            self.cfg.widths,
            self.cfg.blocks_per_stage,
            sum(p.numel() for p in self.parameters()),
            opts.to_dict(),
        )

    def conditioning(self, mask: torch.Tensor, p: torch.Tensor) -> torch.Tensor:
        if not self.options.semantic_embedding:
            p = torch.zeros_like(p)
        g, _ = self.encoder(mask, p, soft=self.options.soft_mask)
        return g

    def forward(self, x: torch.Tensor, mask: torch.Tensor, p: torch.Tensor) -> RestorationOutput:
        """
        x: (B, 3, H, W) in [0, 1]; mask: (B, 8) hard mask, or probabilities when
        the soft-mask option is on; p: (B, d) semantic embedding.
        The output is not clamped.
        """
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W) input, got {tuple(x.shape)}")
        mask = mask.to(x.dtype)
        g = self.conditioning(mask, p.to(x.dtype))
        xp, (h, w) = pad_to_multiple(x, self.backbone.multiple)
        residual = self.backbone(xp, mask, g)[..., :h, :w]
        if self.base is None:
            return RestorationOutput(output=residual, residual=residual, base=None, conditioning=g)
        base = self.base(x)
        return RestorationOutput(output=base + residual, residual=residual, base=base, conditioning=g)

    @torch.no_grad()
    def restore(self, x: torch.Tensor, mask: torch.Tensor, p: torch.Tensor) -> torch.Tensor:
        """Evaluation-time prediction, clamped to [0, 1]."""
        return self(x, mask, p).output.clamp(0.0, 1.0)

    def describe(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "restoration": asdict(self.cfg),
            "options": self.options.to_dict(),
        }
