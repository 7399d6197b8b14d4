"""
Degradation token encoder.

Turns the perception outputs (mask m, embedding p) into one conditioning vector
per backbone stage. Learnable stage queries attend over a 10-token key set:
8 degradation tokens, a semantic token built from p and a global token built
from [m, p]. Tokens of absent factors are removed from attention with -inf
logits, so the outputs are exactly independent of them.

file: src/comprestore/models/conditioning.py
"""

from __future__ import annotations

from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from comprestore.data.catalog import NUM_FACTORS

SEMANTIC_KEY = NUM_FACTORS
GLOBAL_KEY = NUM_FACTORS + 1
NUM_KEYS = NUM_FACTORS + 2


class MaskedCrossAttention(nn.Module):
    """Multi-head attention of queries over keys with a hard boolean key mask and optional additive bias."""

    def __init__(self, dim: int, num_heads: int = 4):
        super().__init__()
        if dim % num_heads:
            raise ValueError(f"dim {dim} not divisible by {num_heads} heads")
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(
        self,
        q: torch.Tensor,
        kv: torch.Tensor,
        key_mask: torch.Tensor,
        key_bias: Optional[torch.Tensor] = None,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        q: (B, S, e); kv: (B, N, e); key_mask: (B, N) bool, True = attend;
        key_bias: (B, N) added to logits of every head/query.
        Returns output (B, S, e) and weights (B, heads, S, N).
        """
        h = self.num_heads
        qh = rearrange(self.q_proj(q), "b s (h c) -> b h s c", h=h)
        kh = rearrange(self.k_proj(kv), "b n (h c) -> b h n c", h=h)
        vh = rearrange(self.v_proj(kv), "b n (h c) -> b h n c", h=h)
        logits = (qh @ kh.transpose(-2, -1)) * self.scale
        if key_bias is not None:
            logits = logits + key_bias[:, None, None, :]
        logits = logits.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        weights = F.softmax(logits, dim=-1)
        out = rearrange(weights @ vh, "b h s c -> b s (h c)")
        return self.out_proj(out), weights


class TokenEncoder(nn.Module):
    def __init__(
        self,
        embed_dim: int,
        token_dim: int = 256,
        num_stages: int = 5,
        num_heads: int = 4,
        strict_masking: bool = True,
        use_semantic_token: bool = True,
        use_global_token: bool = True,
        stagewise: bool = True,
    ):
        super().__init__()
        self.num_stages = num_stages
        self.strict_masking = strict_masking
        self.use_semantic_token = use_semantic_token
        self.use_global_token = use_global_token
        self.stagewise = stagewise

        self.tokens = nn.Parameter(torch.randn(NUM_FACTORS, token_dim) * 0.02)
        self.queries = nn.Parameter(torch.randn(num_stages, token_dim) * 0.02)
        self.semantic_proj = nn.Linear(embed_dim, token_dim)
        self.semantic_norm = nn.LayerNorm(token_dim)
        self.global_mlp = nn.Sequential(
            nn.Linear(NUM_FACTORS + embed_dim, token_dim),
            nn.GELU(),
            nn.Linear(token_dim, token_dim),
        )
        self.global_norm = nn.LayerNorm(token_dim)
        self.attn = MaskedCrossAttention(token_dim, num_heads)
        self.attn_norm = nn.LayerNorm(token_dim)
        self.mlp = nn.Sequential(
            nn.Linear(token_dim, 4 * token_dim),
            nn.GELU(),
            nn.Linear(4 * token_dim, token_dim),
        )
        self.ffn_norm = nn.LayerNorm(token_dim)
        # Only used when strict masking is switched off: a soft logit penalty on absent tokens.
        self.soft_bias = nn.Parameter(torch.tensor(-2.0)) if not strict_masking else None

    def build_key_set(self, mask: torch.Tensor, p: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """mask (B, 8), p (B, d) -> U (B, 10, e), key_mask (B, 10) bool."""
        b = mask.shape[0]
        mask = mask.to(p.dtype)
        u_p = self.semantic_norm(self.semantic_proj(p))
        u_g = self.global_norm(self.global_mlp(torch.cat([mask, p], dim=1)))
        tokens = self.tokens.unsqueeze(0).expand(b, -1, -1)
        keys = torch.cat([tokens, u_p[:, None], u_g[:, None]], dim=1)
        key_mask = torch.cat(
            [
                mask > 0,
                torch.full((b, 1), self.use_semantic_token, dtype=torch.bool, device=mask.device),
                torch.full((b, 1), self.use_global_token, dtype=torch.bool, device=mask.device),
            ],
            dim=1,
        )
        if not key_mask[:, NUM_FACTORS:].any():
            raise ValueError("token encoder needs at least one of the semantic/global tokens enabled")
        return keys, key_mask

    def ffn_block(self, z: torch.Tensor) -> torch.Tensor:
        return self.ffn_norm(z + self.mlp(z))

    def stage_conditioning(
        self,
        keys: torch.Tensor,
        key_mask: torch.Tensor,
        key_bias: Optional[torch.Tensor] = None,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Returns G (B, S, e) and attention weights (B, heads, S, 10)."""
        queries = self.queries.unsqueeze(0).expand(keys.shape[0], -1, -1)
        z, weights = self.attn(queries, keys, key_mask, key_bias)
        g = self.ffn_block(self.attn_norm(z))
        if not self.stagewise:
            g = g[:, :1].expand(-1, self.num_stages, -1)
        return g, weights

    def forward(self, mask: torch.Tensor, p: torch.Tensor, soft: bool = False) -> Tuple[torch.Tensor, torch.Tensor]:
        """
        mask: (B, 8) binary (or probabilities when soft=True); p: (B, d).

        soft=True keeps every factor token but adds log(prob) to its logit,
        scaling its attention weight by the predicted probability.
        """
        keys, key_mask = self.build_key_set(mask, p)
        bias = None
        if soft:
            factor_bias = torch.log(mask.to(keys.dtype).clamp_min(1e-6))
            key_mask = key_mask.clone()
            key_mask[:, :NUM_FACTORS] = True
            bias = F.pad(factor_bias, (0, 2))
        elif not self.strict_masking:
            factor_bias = (1.0 - mask.to(keys.dtype)) * self.soft_bias
            key_mask = key_mask.clone()
            key_mask[:, :NUM_FACTORS] = True
            bias = F.pad(factor_bias, (0, 2))
        return self.stage_conditioning(keys, key_mask, bias)
