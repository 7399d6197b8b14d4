"""
Named model/training variants used by `train-restoration --variant` and `ablate`.

file: src/comprestore/engine/variants.py
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

from comprestore.core.errors import UnknownVariantError
from comprestore.models.restoration import ModelOptions


@dataclass(frozen=True)
class Variant:
    name: str
    description: str
    options: ModelOptions = field(default_factory=ModelOptions)
    freq_loss: bool = True
    mask_overload: bool = True
    base_loss: bool = True


def _v(name: str, description: str, training: Optional[Dict[str, bool]] = None, **options) -> Variant:
    return Variant(name, description, replace(ModelOptions(), **options), **(training or {}))


VARIANTS: Dict[str, Variant] = {
    v.name: v
    for v in [
        _v("full", "complete model"),
        _v("no_semantic_embedding", "semantic embedding p replaced by zeros", semantic_embedding=False),
        _v("no_global_token", "global token removed from the key set", global_token=False),
        _v("no_strict_masking", "learned soft attention penalty instead of hard token masking", strict_masking=False),
        _v("soft_mask", "sigmoid probabilities instead of the binarized mask", soft_mask=True),
        _v("no_semantic_token", "semantic token removed from the key set", semantic_token=False),
        _v("no_stagewise", "first stage condition broadcast to every stage", stagewise=False),
        _v("no_freq_branch", "spatial branch only", freq_branch=False),
        _v("no_gate", "branch gate fixed at 0.5", learn_gate=False),
        _v("shared_moe", "single expert pool, mask ignored", moe_mode="shared"),
        _v("no_decouple_gate", "one gate over all eight experts, masked jointly", moe_mode="joint_gate"),
        _v("no_spatial_router", "spatial experts without per-pixel routing", spatial_router=False),
        _v("no_dc_correction", "no zero-frequency correction", dc_correction=False),
        _v("no_dual_branch", "no base branch; output is the backbone prediction", dual_branch=False),
        _v("no_freq_loss", "spectral loss weight 0", {"freq_loss": False}),
        _v("no_mask_overload", "no mask-overload augmentation", {"mask_overload": False}),
        _v("no_base_loss", "base loss weight 0", {"base_loss": False}),
    ]
}


def variant_names() -> List[str]:
    return list(VARIANTS)


def resolve_variant(name: str) -> Variant:
    try:
        return VARIANTS[name]
    except KeyError:
        raise UnknownVariantError(
            f"unknown variant {name!r}; choose one of: {', '.join(VARIANTS)}"
        ) from None
