"""
Perception objectives: label-similarity soft targets, cross-modal alignment and
the multi-label classification term.

file: src/comprestore/losses/alignment.py
"""

from __future__ import annotations

from typing import Dict, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F

KL_DIRECTIONS = ("forward", "reverse")


def label_similarity(labels: torch.Tensor) -> torch.Tensor:
    """Cosine similarity between the rows of a (K, 9) multi-hot label matrix."""
    labels = labels.to(torch.get_default_dtype()) if not labels.is_floating_point() else labels
    norms = labels.norm(dim=1)
    if torch.any(norms == 0):
        raise ValueError("label_similarity: every label row needs at least one set bit")
    unit = labels / norms[:, None]
    return (unit @ unit.T).clamp(0.0, 1.0)


def soft_targets(similarity: torch.Tensor, alpha: float = 2.0) -> Tuple[torch.Tensor, torch.Tensor]:
    """Row-wise softmax of alpha*S (image to text) and alpha*S^T (text to image)."""
    if similarity.dim() != 2 or similarity.shape[0] != similarity.shape[1]:
        raise ValueError(f"similarity must be square, got {tuple(similarity.shape)}")
    return F.softmax(alpha * similarity, dim=1), F.softmax(alpha * similarity.T, dim=1)


def _rowwise_kl(log_p: torch.Tensor, log_q: torch.Tensor) -> torch.Tensor:
    """Mean over rows of sum_j p_j (log p_j - log q_j)."""
    return (log_p.exp() * (log_p - log_q)).sum(dim=1).mean()


def similarity_logits(image_emb: torch.Tensor, text_emb: torch.Tensor, temperature: float = 0.07) -> torch.Tensor:
    if torch.any(image_emb.norm(dim=1) == 0) or torch.any(text_emb.norm(dim=1) == 0):
        raise ValueError("alignment: zero-norm embedding row")
    return F.normalize(image_emb, dim=1) @ F.normalize(text_emb, dim=1).T / temperature


def alignment_loss(
    image_emb: torch.Tensor,
    text_emb: torch.Tensor,
    similarity: torch.Tensor,
    temperature: float = 0.07,
    alpha: float = 2.0,
    direction: str = "forward",
) -> torch.Tensor:
    """
    Symmetric KL between the image/text similarity distributions and the
    label-similarity soft targets.

    direction="forward" computes KL(P || Q) with P the model distribution;
    "reverse" computes KL(Q || P).
    """
    if direction not in KL_DIRECTIONS:
        raise ValueError(f"direction must be one of {KL_DIRECTIONS}")
    logits = similarity_logits(image_emb, text_emb, temperature)
    log_p_it = F.log_softmax(logits, dim=1)
    log_p_ti = F.log_softmax(logits.T, dim=1)
    log_q_it = F.log_softmax(alpha * similarity, dim=1)
    log_q_ti = F.log_softmax(alpha * similarity.T, dim=1)
    if direction == "forward":
        return 0.5 * (_rowwise_kl(log_p_it, log_q_it) + _rowwise_kl(log_p_ti, log_q_ti))
    return 0.5 * (_rowwise_kl(log_q_it, log_p_it) + _rowwise_kl(log_q_ti, log_p_ti))


def classification_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean element-wise BCE over all 9 bits, computed from logits."""
    return F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype), reduction="mean")


class PerceptionCriterion(nn.Module):
    def __init__(
        self,
        lambda_align: float = 0.1,
        lambda_cls: float = 0.9,
        temperature: float = 0.07,
        alpha: float = 2.0,
        direction: str = "forward",
    ):
        super().__init__()
        self.lambda_align = lambda_align
        self.lambda_cls = lambda_cls
        self.temperature = temperature
        self.alpha = alpha
        self.direction = direction

    def forward(
        self,
        logits: torch.Tensor,
        labels: torch.Tensor,
        image_emb: torch.Tensor,
        text_emb: torch.Tensor,
        similarity: torch.Tensor,
    ) -> Tuple[torch.Tensor, Dict[str, float]]:
        l_cls = classification_loss(logits, labels)
        if self.lambda_align:
            l_align = alignment_loss(image_emb, text_emb, similarity, self.temperature, self.alpha, self.direction)
        else:
            l_align = logits.new_zeros(())
        total = self.lambda_align * l_align + self.lambda_cls * l_cls
        return total, {"l_align": float(l_align.detach()), "l_cls": float(l_cls.detach()), "total": float(total.detach())}


def perception_loss(
    logits: torch.Tensor,
    labels: torch.Tensor,
    image_emb: torch.Tensor,
    text_emb: torch.Tensor,
    similarity: torch.Tensor,
    lambda_align: float = 0.1,
    lambda_cls: float = 0.9,
    **kwargs,
) -> torch.Tensor:
    total, _ = PerceptionCriterion(lambda_align, lambda_cls, **kwargs)(logits, labels, image_emb, text_emb, similarity)
    return total
