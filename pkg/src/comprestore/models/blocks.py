"""
Dual-domain correction block components.

- FrequencyBranch: conditioned mixture of low-rank spectral masks with a
  bounded, content-adaptive DC correction.
- SpatialBranch: non-overlapping window self-attention followed by an MLP.
- DualDomainMixer: scalar-gated convex combination of the two branches.

file: src/comprestore/models/blocks.py
"""

from __future__ import annotations

from functools import lru_cache
from typing import Optional, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from einops import rearrange

from comprestore.core.errors import DivergenceError


class LayerNorm2d(nn.Module):
    """LayerNorm over the channel dimension of a (B, C, H, W) map."""

    def __init__(self, channels: int, eps: float = 1e-6):
        super().__init__()
        self.norm = nn.LayerNorm(channels, eps=eps)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.norm(x.permute(0, 2, 3, 1)).permute(0, 3, 1, 2)


@lru_cache(maxsize=64)
def _interp_matrix(n: int, grid: int, half: bool) -> torch.Tensor:
    """
    Linear-interpolation matrix from a grid over |frequency| in [0, 0.5] to
    the bins of an FFT axis of signal length n (half=True: the rfft axis).
    """
    freqs = torch.fft.rfftfreq(n, dtype=torch.float64) if half else torch.fft.fftfreq(n, dtype=torch.float64)
    pos = freqs.abs() / 0.5 * (grid - 1)
    lo = pos.floor().clamp(max=grid - 1).long()
    hi = (lo + 1).clamp(max=grid - 1)
    frac = pos - lo
    mat = torch.zeros(len(freqs), grid, dtype=torch.float64)
    mat[torch.arange(len(freqs)), lo] += 1 - frac
    mat[torch.arange(len(freqs)), hi] += frac
    return mat


class FrequencyBranch(nn.Module):
    def __init__(
        self,
        channels: int,
        token_dim: int = 256,
        num_experts: int = 2,
        rank: int = 4,
        eta: float = 0.1,
        grid: int = 16,
        dc_hidden: int = 64,
        dc_correction: bool = True,
    ):
        super().__init__()
        self.num_experts = num_experts
        self.rank = rank
        self.eta = eta
        self.grid = grid
        self.use_dc = dc_correction

        self.feat_proj = nn.Linear(channels, token_dim)
        self.mix_proj = nn.Linear(token_dim, num_experts)
        # c is a scalar per expert; the logit map is c + V_h V_w^T.
        self.offset = nn.Parameter(torch.full((num_experts,), 3.0))
        self.v_h = nn.Parameter(torch.randn(num_experts, grid, rank) * 0.1)
        self.v_w = nn.Parameter(torch.randn(num_experts, grid, rank) * 0.1)
        self.b_dc = nn.Parameter(torch.zeros(()))
        self.dc_mlp = nn.Sequential(
            nn.Linear(token_dim + 2 * channels, dc_hidden),
            nn.GELU(),
            nn.Linear(dc_hidden, num_experts * channels),
        )
        self.out_proj = nn.Conv2d(channels, channels, 1)

    def mixture_weights(self, x: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        """pi = softmax(W_pi(g + W_f GAP(x))), shape (B, M)."""
        return F.softmax(self.mix_proj(g + self.feat_proj(x.mean(dim=(2, 3)))), dim=-1)

    def logit_map(self, height: int, width: int) -> torch.Tensor:
        """Pre-sigmoid spectral logits over the half-spectrum, (M, H, W//2 + 1)."""
        a_h = _interp_matrix(height, self.grid, False).to(self.v_h)
        a_w = _interp_matrix(width, self.grid, True).to(self.v_w)
        rows = torch.einsum("hg,mgr->mhr", a_h, self.v_h)
        cols = torch.einsum("wg,mgr->mwr", a_w, self.v_w)
        return self.offset[:, None, None] + rows @ cols.transpose(1, 2)

    def dc_correction(
        self,
        mask: torch.Tensor,
        g: torch.Tensor,
        mu: torch.Tensor,
        sigma: torch.Tensor,
        dc_offset: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """
        Overwrites the zero-frequency entry of each (batch, expert, channel) mask
        with 1 + b_dc + eta * tanh(MLP([g, mu, sigma])).

        mask: (B, M, C, H, Wf) or broadcastable (1, M, 1, H, Wf); returns (B, M, C, H, Wf).
        """
        b, c = mu.shape
        if dc_offset is None:
            dc_offset = self.dc_mlp(torch.cat([g, mu, sigma], dim=1))
        dc = 1.0 + self.b_dc + self.eta * torch.tanh(dc_offset.view(b, self.num_experts, c))
        h, wf = mask.shape[-2:]
        is_dc = torch.zeros(h, wf, dtype=torch.bool, device=mask.device)
        is_dc[0, 0] = True
        return torch.where(is_dc, dc[..., None, None], mask)

    def spectral_masks(self, x: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        masks = torch.sigmoid(self.logit_map(h, w))[None, :, None]  # (1, M, 1, H, Wf)
        if self.use_dc:
            mu = x.mean(dim=(2, 3))
            sigma = x.std(dim=(2, 3), unbiased=False)
            return self.dc_correction(masks, g, mu, sigma)
        return masks.expand(b, -1, c, -1, -1)

    def forward(self, x: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        h, w = x.shape[-2:]
        if h < 2 or w < 2:
            raise ValueError(f"frequency branch needs H, W >= 2, got {h}x{w}")
        pi = self.mixture_weights(x, g)
        spectrum = torch.fft.rfft2(x, norm="ortho")
        if not torch.isfinite(spectrum).all():
            raise DivergenceError("non-finite spectrum in frequency branch")
        masks = self.spectral_masks(x, g)
        # Sum of per-expert inverse transforms equals one inverse of the mixed mask.
        mixed = torch.einsum("bm,bmchw->bchw", pi, masks.to(spectrum.real.dtype))
        restored = torch.fft.irfft2(spectrum * mixed, s=(h, w), norm="ortho")
        return self.out_proj(restored)


class WindowAttention(nn.Module):
    """Multi-head self-attention inside each window of N tokens."""

    def __init__(self, dim: int, num_heads: int):
        super().__init__()
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, return_weights: bool = False):
        q, k, v = rearrange(self.qkv(x), "b n (three h c) -> three b h n c", three=3, h=self.num_heads)
        attn = F.softmax((q * self.scale) @ k.transpose(-2, -1), dim=-1)
        out = self.proj(rearrange(attn @ v, "b h n c -> b n (h c)"))
        return (out, attn) if return_weights else out


class SpatialBranch(nn.Module):
    def __init__(self, channels: int, num_heads: int = 2, window: int = 8, mlp_ratio: float = 2.0):
        super().__init__()
        self.window = window
        self.norm1 = nn.LayerNorm(channels)
        self.attn = WindowAttention(channels, num_heads)
        self.norm2 = nn.LayerNorm(channels)
        hidden = int(channels * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(channels, hidden), nn.GELU(), nn.Linear(hidden, channels))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        ws = self.window
        ph, pw = (-h) % ws, (-w) % ws
        xp = F.pad(x, (0, pw, 0, ph), mode="replicate") if ph or pw else x
        nh, nw = xp.shape[2] // ws, xp.shape[3] // ws
        tokens = rearrange(xp, "b c (nh wh) (nw ww) -> (b nh nw) (wh ww) c", wh=ws, ww=ws)
        tokens = tokens + self.attn(self.norm1(tokens))
        tokens = tokens + self.mlp(self.norm2(tokens))
        out = rearrange(tokens, "(b nh nw) (wh ww) c -> b c (nh wh) (nw ww)", b=b, nh=nh, nw=nw, wh=ws, ww=ws)
        return out[:, :, :h, :w]


class DualDomainMixer(nn.Module):
    """X_out = w * X_freq + (1 - w) * X_spatial with w = sigmoid(gate_logit)."""

    def __init__(
        self,
        channels: int,
        token_dim: int = 256,
        num_heads: int = 2,
        window: int = 8,
        num_experts: int = 2,
        rank: int = 4,
        eta: float = 0.1,
        use_freq: bool = True,
        learn_gate: bool = True,
        dc_correction: bool = True,
    ):
        super().__init__()
        self.use_freq = use_freq
        self.freq = FrequencyBranch(channels, token_dim, num_experts, rank, eta, dc_correction=dc_correction) if use_freq else None
        self.spatial = SpatialBranch(channels, num_heads, window)
        self.gate_logit = nn.Parameter(torch.zeros(()), requires_grad=learn_gate)

    @property
    def gate(self) -> torch.Tensor:
        return torch.sigmoid(self.gate_logit)

    def mix(self, x_freq: torch.Tensor, x_spatial: torch.Tensor) -> torch.Tensor:
        w = self.gate
        return w * x_freq + (1.0 - w) * x_spatial

    def forward(self, x: torch.Tensor, g: torch.Tensor) -> torch.Tensor:
        x_spatial = self.spatial(x)
        if not self.use_freq:
            return x_spatial
        return self.mix(self.freq(x, g), x_spatial)


def branch_outputs(mixer: DualDomainMixer, x: torch.Tensor, g: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    """(X_freq, X_spatial) for inspection."""
    return mixer.freq(x, g), mixer.spatial(x)
