import math

import numpy as np
import pytest
import torch
from scipy import ndimage

from comprestore.engine.metrics import PSNR_CAP, gaussian_window, perception_metrics, psnr_y, ssim_y, to_luma


def test_luma_weights():
    img = torch.zeros(3, 2, 2)
    img[1] = 1.0
    assert torch.allclose(to_luma(img), torch.full((2, 2), 0.587))


def test_psnr_of_uniform_offset_is_20db():
    y = torch.full((3, 16, 16), 0.5)
    assert psnr_y(y + 0.1, y) == pytest.approx(20.0, abs=1e-4)


def test_identical_images_hit_the_cap():
    y = torch.rand(3, 16, 16)
    assert psnr_y(y, y) == PSNR_CAP
    assert ssim_y(y, y) == pytest.approx(1.0, abs=1e-12)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        psnr_y(torch.rand(3, 8, 8), torch.rand(3, 8, 9))


def test_ssim_rejects_small_images():
    with pytest.raises(ValueError):
        ssim_y(torch.rand(3, 10, 10), torch.rand(3, 10, 10))


def _reference_ssim(x, y):
    """SSIM with scipy correlation over valid windows."""
    win = gaussian_window().numpy()
    c1, c2 = 0.01**2, 0.03**2

    def filt(a):
        full = ndimage.correlate(a, win, mode="constant")
        r = win.shape[0] // 2
        return full[r:-r, r:-r]

    mx, my = filt(x), filt(y)
    vx, vy, cxy = filt(x * x) - mx**2, filt(y * y) - my**2, filt(x * y) - mx * my
    return float((((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2))).mean())


def test_ssim_matches_reference():
    rng = np.random.default_rng(0)
    a = rng.random((3, 24, 20))
    b = np.clip(a + 0.1 * rng.standard_normal(a.shape), 0, 1)
    weights = np.array([0.299, 0.587, 0.114])[:, None, None]
    ref = _reference_ssim((a * weights).sum(0), (b * weights).sum(0))
    assert ssim_y(torch.from_numpy(b), torch.from_numpy(a)) == pytest.approx(ref, abs=1e-10)


def test_gaussian_window_is_normalised():
    w = gaussian_window()
    assert w.shape == (11, 11)
    assert w.sum().item() == pytest.approx(1.0)


def test_perception_metrics():
    logits = torch.tensor([[1.0, -1.0, 1.0, -1, -1, -1, -1, -1, 0.0],
                           [-1.0, -1.0, 1.0, -1, -1, -1, -1, -1, 0.0]])
    labels = torch.tensor([[1.0, 0, 1, 0, 0, 0, 0, 0, 0],
                           [1.0, 0, 1, 0, 0, 0, 0, 0, 0]])
    m = perception_metrics(logits, labels)
    assert m["bit_accuracy"] == pytest.approx(15 / 16)
    assert m["exact_match"] == pytest.approx(0.5)
    assert m["per_factor"]["rain"]["precision"] == 1.0
    assert m["per_factor"]["rain"]["recall"] == 0.5
    assert m["per_factor"]["rain"]["f1"] == pytest.approx(2 / 3)
    assert m["per_factor"]["snow"]["f1"] == 0.0
    assert not math.isnan(m["per_factor"]["blur"]["precision"])
