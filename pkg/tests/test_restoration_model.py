import pytest
import torch
import torch.nn as nn

from comprestore.core.config import RestorationConfig
from comprestore.core.errors import DivergenceError
from comprestore.data.catalog import FACTOR_INDEX, GLOBAL_INDICES
from comprestore.models.moe import DecoupledMoE
from comprestore.models.restoration import BaseBranch, ModelOptions, Restorer, pad_to_multiple

CFG = RestorationConfig(widths=[4, 8, 4], blocks_per_stage=1, token_dim=16, token_heads=2,
                        freq_rank=2, window_size=4, head_dim=4, base_width=4)


def _model(**options):
    torch.manual_seed(0)
    return Restorer(embed_dim=16, cfg=CFG, options=ModelOptions(**options)).eval()


def test_output_shapes_for_every_catalog_mask(catalog):
    model = _model()
    x = torch.rand(1, 3, 20, 20)
    p = torch.randn(1, 16)
    with torch.no_grad():
        for cfg in catalog.configs:
            mask = torch.tensor([cfg.label.bits], dtype=torch.float32)
            out = model(x, mask, p)
            assert out.output.shape == x.shape
            assert out.conditioning.shape == (1, 3, 16)
            assert torch.isfinite(out.output).all()


def test_output_is_base_plus_residual():
    model = _model()
    x = torch.rand(2, 3, 16, 16)
    with torch.no_grad():
        out = model(x, torch.zeros(2, 8), torch.randn(2, 16))
    assert torch.allclose(out.output, out.base + out.residual)


def test_without_base_branch_output_is_residual():
    model = _model(dual_branch=False)
    assert model.base is None
    with torch.no_grad():
        out = model(torch.rand(1, 3, 16, 16), torch.zeros(1, 8), torch.randn(1, 16))
    assert out.base is None
    assert torch.equal(out.output, out.residual)


def test_odd_sizes_are_padded_and_cropped():
    model = _model()
    with torch.no_grad():
        out = model.restore(torch.rand(1, 3, 17, 23), torch.zeros(1, 8), torch.randn(1, 16))
    assert out.shape == (1, 3, 17, 23)
    assert out.min() >= 0 and out.max() <= 1


def test_inactive_token_values_do_not_change_output():
    model = _model()
    x, p = torch.rand(1, 3, 16, 16), torch.randn(1, 16)
    mask = torch.tensor([[0, 0, 1, 0, 0, 1, 0, 0]], dtype=torch.float32)
    with torch.no_grad():
        ref = model(x, mask, p).output
        model.encoder.tokens[0].add_(5.0)
        model.encoder.tokens[7].add_(-5.0)
        assert torch.equal(model(x, mask, p).output, ref)


def test_semantic_embedding_switch():
    model = _model(semantic_embedding=False)
    x, mask = torch.rand(1, 3, 16, 16), torch.zeros(1, 8)
    with torch.no_grad():
        a = model(x, mask, torch.randn(1, 16)).output
        b = model(x, mask, torch.randn(1, 16)).output
    assert torch.equal(a, b)


def test_even_stage_count_rejected():
    with pytest.raises(ValueError):
        Restorer(16, RestorationConfig(widths=[4, 8, 8, 4]))


def test_bad_input_rank():
    with pytest.raises(ValueError):
        _model()(torch.rand(3, 16, 16), torch.zeros(1, 8), torch.randn(1, 16))


def test_non_finite_activations_raise():
    model = _model()
    x = torch.rand(1, 3, 16, 16)
    x[0, 0, 0, 0] = float("nan")
    with pytest.raises(DivergenceError):
        model(x, torch.zeros(1, 8), torch.randn(1, 16))


def test_base_branch_starts_at_zero_and_needs_size():
    base = BaseBranch(width=4)
    assert torch.equal(base(torch.rand(1, 3, 16, 16)), torch.zeros(1, 3, 16, 16))
    with pytest.raises(ValueError):
        base(torch.rand(1, 3, 6, 16))


def test_base_branch_keeps_constants_at_ragged_sizes():
    base = BaseBranch(width=4)
    base.body = nn.Identity()
    x = torch.full((1, 3, 18, 22), 0.3)
    out = base(x)
    assert out.shape == x.shape
    assert torch.allclose(out, x, atol=1e-6)


def test_haze_only_output_ignores_other_experts():
    model = _model()
    x, p = torch.rand(1, 3, 16, 16), torch.randn(1, 16)
    mask = torch.zeros(1, 8)
    mask[0, FACTOR_INDEX["haze"]] = 1
    with torch.no_grad():
        ref = model(x, mask, p).output
        for moe in (m for m in model.modules() if isinstance(m, DecoupledMoE)):
            for expert in moe.spatial_experts:
                for param in expert.parameters():
                    param.add_(torch.randn_like(param))
            for k, idx in enumerate(GLOBAL_INDICES):
                if idx != FACTOR_INDEX["haze"]:
                    for param in moe.global_experts[k].parameters():
                        param.add_(torch.randn_like(param))
        assert torch.equal(model(x, mask, p).output, ref)
        for moe in (m for m in model.modules() if isinstance(m, DecoupledMoE)):
            haze = moe.global_experts[GLOBAL_INDICES.index(FACTOR_INDEX["haze"])]
            for param in haze.parameters():
                param.add_(torch.randn_like(param))
        assert not torch.allclose(model(x, mask, p).output, ref)


def test_pad_to_multiple():
    x = torch.rand(1, 3, 5, 8)
    padded, (h, w) = pad_to_multiple(x, 4)
    assert padded.shape[-2:] == (8, 8) and (h, w) == (5, 8)
    assert torch.equal(padded[..., :5, :], x)


def test_describe_round_trips_options():
    model = _model(moe_mode="joint_gate")
    d = model.describe()
    assert d["options"]["moe_mode"] == "joint_gate"
    assert d["restoration"]["widths"] == [4, 8, 4]
