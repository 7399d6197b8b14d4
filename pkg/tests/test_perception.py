import torch

from comprestore.data.catalog import NUM_FACTORS
from comprestore.engine.perception_trainer import build_perception_model, frozen_text_hash
from comprestore.models.perception import HashedTextEncoder, MultiLabelHead, prompt_for, threshold_mask


def test_prompts(catalog):
    assert prompt_for(catalog.get("clean")) == "This image is clean."
    assert "rain" in prompt_for(catalog.get("rain+haze"))


def test_threshold_drops_clean_bit():
    logits = torch.tensor([[0.0, -0.1, 2.0, -3.0, 0.5, -1.0, 1.0, -2.0, 5.0]])
    assert threshold_mask(logits).tolist() == [[1, 0, 1, 0, 1, 0, 1, 0]]


def test_threshold_agrees_with_sigmoid_on_factor_bits():
    torch.manual_seed(0)
    logits = torch.randn(64, 9) * 3
    logits[0, :8] = 0.0
    expected = (torch.sigmoid(logits[:, :8]) >= 0.5).to(torch.int64)
    assert torch.equal(threshold_mask(logits), expected)


def test_head_with_zero_weights_returns_bias():
    head = MultiLabelHead(12)
    with torch.no_grad():
        head.fc2.weight.zero_()
        head.fc2.bias.copy_(torch.linspace(-1, 1, 9))
    z = head(torch.randn(5, 12))
    assert torch.allclose(z, torch.linspace(-1, 1, 9).expand(5, 9))


def test_hashed_text_encoder_is_deterministic():
    enc = HashedTextEncoder(16, seed=3)
    a = enc(["This image contains rain."])
    assert torch.equal(a, HashedTextEncoder(16, seed=3)(["This image contains rain."]))
    assert not torch.equal(a, HashedTextEncoder(16, seed=4)(["This image contains rain."]))


def test_model_outputs(tiny_cfg, catalog):
    torch.manual_seed(0)
    model = build_perception_model(tiny_cfg, catalog.training_tasks).eval()
    logits, emb = model(torch.rand(2, 3, 40, 40))
    assert logits.shape == (2, 9)
    assert emb.shape == (2, tiny_cfg.perception.embed_dim)
    out = model.infer(torch.rand(3, 32, 32))
    assert out.mask.shape == (NUM_FACTORS,)
    assert set(out.probabilities) == {"rain", "snow", "haze", "low_light", "over_exposure", "blur", "noise", "artifact"}
    assert len(model.retrieve_config(torch.rand(3, 32, 32), k=3)) == 3


def test_text_cache_has_no_grad(tiny_cfg, catalog):
    model = build_perception_model(tiny_cfg, catalog.training_tasks)
    before = frozen_text_hash(model)
    assert not model.text_cache.requires_grad
    assert all("text" not in name for name, _ in model.named_parameters())
    assert frozen_text_hash(model) == before
