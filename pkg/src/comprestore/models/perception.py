"""
Factor-wise degradation perception.

An image encoder produces an embedding f_i; a small multi-label head maps it to
9 logits (8 factors + clean). The thresholded factor logits form the hard mask
consumed by restoration, and f_i itself is the semantic embedding p.

Two embedding backends are available:
- "tiny": a strided convolutional image encoder trained from scratch, with a
  frozen hashed-word text encoder (works offline);
- "vlm": a pretrained CLIP model via `transformers` (optional extra).

file: src/comprestore/models/perception.py
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

from comprestore.data.catalog import FACTORS, NUM_FACTORS, DegradationVector, TaskConfig
from comprestore.data.synthesis import derive_seed

NUM_LOGITS = NUM_FACTORS + 1
CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)


def factor_phrase(factor: str) -> str:
    return factor.replace("_", "-")


def prompt_for(cfg: TaskConfig) -> str:
    if cfg.is_clean:
        return "This image is clean."
    return f"This image contains {' and '.join(factor_phrase(f) for f in cfg.factors)}."


def threshold_mask(logits: torch.Tensor) -> torch.Tensor:
    """Hard mask from logits: bit j is set iff z_j >= 0 (sigmoid >= 0.5). Clean bit dropped."""
    return (logits[..., :NUM_FACTORS] >= 0).to(torch.int64)


@dataclass
class PerceptionOutput:
    logits: torch.Tensor      # (9,)
    mask: torch.Tensor        # (8,) int64
    embedding: torch.Tensor   # (d,)

    @property
    def vector(self) -> DegradationVector:
        return DegradationVector(tuple(int(b) for b in self.mask.tolist()))

    @property
    def probabilities(self) -> Dict[str, float]:
        probs = torch.sigmoid(self.logits[:NUM_FACTORS]).tolist()
        return {f: round(float(p), 6) for f, p in zip(FACTORS, probs)}


class MultiLabelHead(nn.Module):
    """LayerNorm -> Linear(d, 2d) -> GELU -> Linear(2d, 9)."""

    def __init__(self, dim: int, num_outputs: int = NUM_LOGITS):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.fc1 = nn.Linear(dim, 2 * dim)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(2 * dim, num_outputs)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(self.norm(f))))


class TinyImageEncoder(nn.Module):
    def __init__(self, dim: int = 128, width: int = 32, blocks: int = 4):
        super().__init__()
        layers: List[nn.Module] = []
        ch_in = 3
        for i in range(blocks):
            ch_out = width * 2 ** min(i, 2)
            layers += [
                nn.Conv2d(ch_in, ch_out, 3, stride=2, padding=1),
                nn.GroupNorm(4, ch_out),
                nn.GELU(),
                nn.Conv2d(ch_out, ch_out, 3, padding=1),
                nn.GELU(),
            ]
            ch_in = ch_out
        self.features = nn.Sequential(*layers)
        self.proj = nn.Linear(ch_in * 2, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.features(x)
        # mean and std pooling keep global statistics such as exposure and contrast
        pooled = torch.cat([h.mean(dim=(2, 3)), h.std(dim=(2, 3))], dim=1)
        return self.proj(pooled)


class HashedTextEncoder(nn.Module):
    """
    Frozen bag-of-words text encoder: each word maps to a fixed Gaussian vector
    seeded from the word itself, and a prompt is the mean of its word vectors.
    Prompts that share factor words therefore share embedding directions.
    """

    def __init__(self, dim: int, seed: int = 0):
        super().__init__()
        self.dim = dim
        self.seed = seed

    def word_vector(self, word: str) -> torch.Tensor:
        gen = torch.Generator().manual_seed(derive_seed("word", self.seed, word))
        return torch.randn(self.dim, generator=gen)

    def forward(self, prompts: Sequence[str]) -> torch.Tensor:
        rows = []
        for prompt in prompts:
            words = re.findall(r"[a-z\-]+", prompt.lower())
            rows.append(torch.stack([self.word_vector(w) for w in words]).mean(dim=0))
        return torch.stack(rows)


class TinyBackend(nn.Module):
    name = "tiny"

    def __init__(self, dim: int = 128, input_size: int = 64, seed: int = 0):
        super().__init__()
        self.dim = dim
        self.input_size = input_size
        self.image_encoder = TinyImageEncoder(dim)
        self.text_encoder = HashedTextEncoder(dim, seed)

    def encode_image(self, x: torch.Tensor) -> torch.Tensor:
        return self.image_encoder(x)

    @torch.no_grad()
    def encode_text(self, prompts: Sequence[str]) -> torch.Tensor:
        return self.text_encoder(prompts)


class ClipBackend(nn.Module):
    """Pretrained CLIP image/text towers; the text tower is always frozen."""
    name = "vlm"

    def __init__(self, model_name: str = "openai/clip-vit-base-patch32", input_size: int = 224):
        super().__init__()
        try:
            from transformers import CLIPModel, CLIPTokenizer  # lazy import
        except ImportError as e:
            raise RuntimeError("the vlm backend needs `pip install comprestore[vlm]`") from e
        self.model = CLIPModel.from_pretrained(model_name)
        self.tokenizer = CLIPTokenizer.from_pretrained(model_name)
        for p in self.model.text_model.parameters():
            p.requires_grad_(False)
        for p in self.model.text_projection.parameters():
            p.requires_grad_(False)
        self.dim = int(self.model.config.projection_dim)
        self.input_size = input_size
        self.register_buffer("mean", torch.tensor(CLIP_MEAN).view(1, 3, 1, 1), persistent=False)
        self.register_buffer("std", torch.tensor(CLIP_STD).view(1, 3, 1, 1), persistent=False)

    def encode_image(self, x: torch.Tensor) -> torch.Tensor:
        return self.model.get_image_features(pixel_values=(x - self.mean) / self.std)

    @torch.no_grad()
    def encode_text(self, prompts: Sequence[str]) -> torch.Tensor:
        tokens = self.tokenizer(list(prompts), padding=True, return_tensors="pt").to(self.mean.device)
        return self.model.get_text_features(**tokens)


def build_backend(name: str, dim: int, input_size: int, vlm_model: str = "", seed: int = 0) -> nn.Module:
    if name == "tiny":
        return TinyBackend(dim, input_size, seed)
    if name == "vlm":
        return ClipBackend(vlm_model or "openai/clip-vit-base-patch32", input_size)
    raise ValueError(f"unknown perception backend {name!r} (expected 'tiny' or 'vlm')")


class PerceptionModel(nn.Module):
    """Image encoder + multi-label head, with the prompt embeddings cached once."""

    def __init__(self, backend: nn.Module, prompts: Sequence[str]):
        super().__init__()
        self.backend = backend
        self.head = MultiLabelHead(backend.dim)
        self.prompts = list(prompts)
        self.register_buffer("text_cache", backend.encode_text(self.prompts).detach().clone())

    @property
    def dim(self) -> int:
        return self.backend.dim

    def prepare(self, x: torch.Tensor) -> torch.Tensor:
        size = self.backend.input_size
        if x.shape[-2:] != (size, size):
            x = F.interpolate(x, size=(size, size), mode="bilinear", align_corners=False, antialias=True)
        return x

    def forward(self, x: torch.Tensor):
        """Returns (logits (B, 9), image embedding (B, d))."""
        f_i = self.backend.encode_image(self.prepare(x))
        return self.head(f_i), f_i

    def text_embeddings(self, indices: Optional[Sequence[int]] = None) -> torch.Tensor:
        return self.text_cache if indices is None else self.text_cache[list(indices)]

    @torch.no_grad()
    def perceive(self, x: torch.Tensor):
        """Batched inference: (logits, mask, embedding)."""
        logits, f_i = self(x)
        return logits, threshold_mask(logits), f_i

    @torch.no_grad()
    def infer(self, img: torch.Tensor) -> PerceptionOutput:
        """Single image (3, H, W) -> PerceptionOutput."""
        logits, mask, f_i = self.perceive(img.unsqueeze(0))
        return PerceptionOutput(logits=logits[0], mask=mask[0], embedding=f_i[0])

    @torch.no_grad()
    def retrieve_config(self, img: torch.Tensor, k: int = 1) -> List[int]:
        """Indices of the k prompts closest to the image embedding (diagnostic)."""
        _, f_i = self(img.unsqueeze(0))
        sims = F.normalize(f_i, dim=1) @ F.normalize(self.text_cache, dim=1).T
        return sims[0].topk(min(k, sims.shape[1])).indices.tolist()
