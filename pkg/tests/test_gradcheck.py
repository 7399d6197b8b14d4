import torch
from torch.autograd import gradcheck

from comprestore.losses.alignment import alignment_loss, label_similarity, perception_loss
from comprestore.losses.restoration import base_loss, guided_filter, masked_freq_l1, spatial_l1
from comprestore.models.blocks import DualDomainMixer, FrequencyBranch
from comprestore.models.conditioning import TokenEncoder
from comprestore.models.moe import DecoupledMoE, renorm


def test_renorm_gradcheck():
    pi = torch.softmax(torch.randn(2, 5, dtype=torch.float64), -1).requires_grad_()
    mask = torch.tensor([[1.0, 0, 1, 1, 0], [0, 0, 0, 0, 0]], dtype=torch.float64)
    assert gradcheck(lambda p: renorm(p, mask), (pi,))


def test_frequency_branch_gradcheck():
    torch.manual_seed(0)
    branch = FrequencyBranch(2, token_dim=4, num_experts=2, rank=1, grid=4, dc_hidden=4).double()
    x = torch.randn(1, 2, 6, 5, dtype=torch.float64, requires_grad=True)
    g = torch.randn(1, 4, dtype=torch.float64, requires_grad=True)
    assert gradcheck(branch, (x, g))


def test_token_encoder_gradcheck():
    torch.manual_seed(0)
    enc = TokenEncoder(4, token_dim=4, num_stages=2, num_heads=1).double()
    mask = torch.tensor([[1.0, 0, 0, 1, 0, 0, 0, 0]], dtype=torch.float64)
    p = torch.randn(1, 4, dtype=torch.float64, requires_grad=True)
    assert gradcheck(lambda q: enc(mask, q)[0], (p,))


def test_moe_gradcheck():
    torch.manual_seed(0)
    moe = DecoupledMoE(2, token_dim=4, expansion=1.0).double()
    x = torch.randn(1, 2, 4, 4, dtype=torch.float64, requires_grad=True)
    mask = torch.tensor([[1.0, 0, 1, 0, 0, 1, 0, 0]], dtype=torch.float64)
    g = torch.randn(1, 4, dtype=torch.float64, requires_grad=True)
    assert gradcheck(lambda a, b: moe(a, mask, b), (x, g))


def test_loss_gradchecks():
    torch.manual_seed(0)
    target = torch.rand(1, 1, 10, 10, dtype=torch.float64)
    pred = (target + 0.2 * torch.randn_like(target)).requires_grad_()
    assert gradcheck(lambda p: masked_freq_l1(p, target), (pred,))
    src = torch.rand(1, 1, 8, 8, dtype=torch.float64, requires_grad=True)
    assert gradcheck(lambda s: guided_filter(s, s, 2, 1e-2), (src,))
    base = torch.rand(1, 1, 8, 8, dtype=torch.float64, requires_grad=True)
    clean = torch.rand(1, 1, 8, 8, dtype=torch.float64)
    assert gradcheck(lambda b: base_loss(b, clean, 2, 1e-2), (base,))
    assert gradcheck(lambda p: spatial_l1(p, target), (pred,))


def _labels():
    return torch.tensor(
        [[1.0, 0, 0, 0, 0, 0, 0, 0, 0], [1, 0, 1, 0, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 1, 0, 0, 0]],
        dtype=torch.float64,
    )


def test_alignment_loss_gradcheck():
    torch.manual_seed(0)
    similarity = label_similarity(_labels())
    img = torch.randn(3, 4, dtype=torch.float64, requires_grad=True)
    txt = torch.randn(3, 4, dtype=torch.float64, requires_grad=True)
    for direction in ("forward", "reverse"):
        assert gradcheck(lambda a, b: alignment_loss(a, b, similarity, 0.5, 2.0, direction), (img, txt))


def test_perception_loss_gradcheck():
    torch.manual_seed(0)
    labels = _labels()
    similarity = label_similarity(labels)
    logits = torch.randn(3, 9, dtype=torch.float64, requires_grad=True)
    img = torch.randn(3, 4, dtype=torch.float64, requires_grad=True)
    txt = torch.randn(3, 4, dtype=torch.float64)
    assert gradcheck(
        lambda z, a: perception_loss(z, labels, a, txt, similarity, temperature=0.5),
        (logits, img),
    )


def test_gate_gradcheck():
    torch.manual_seed(0)
    mixer = DualDomainMixer(2, token_dim=4, num_heads=1, window=4, num_experts=2, rank=1).double()
    x = torch.randn(1, 2, 4, 4, dtype=torch.float64)
    g = torch.randn(1, 4, dtype=torch.float64)
    logit = torch.tensor(0.3, dtype=torch.float64, requires_grad=True)
    assert gradcheck(lambda w: torch.func.functional_call(mixer, {"gate_logit": w}, (x, g)), (logit,))
