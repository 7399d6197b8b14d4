import numpy as np
import pytest

from comprestore.core.errors import SeverityError
from comprestore.data.catalog import DegradationSpec
from comprestore.data.degradations import (
    LOW_LIGHT_GAMMA,
    apply_degradation,
    quantization_table,
    sample_severity,
)


@pytest.fixture
def image():
    rng = np.random.default_rng(0)
    return rng.uniform(0.1, 0.9, (3, 24, 24))


def test_haze_is_affine(image):
    out = apply_degradation(image, DegradationSpec("haze", {"transmission": 0.6, "airlight": 0.9}), 1)
    np.testing.assert_allclose(out, image * 0.6 + 0.9 * 0.4)


def test_low_light_gain_and_gamma(image):
    out = apply_degradation(image, DegradationSpec("low_light", {"gain": 0.3}), 1)
    np.testing.assert_allclose(out, 0.3 * image**LOW_LIGHT_GAMMA)
    assert LOW_LIGHT_GAMMA < 1
    # darker than the input, brighter than the gain alone
    assert np.all(out > 0.3 * image) and np.all(out < image)


def test_zero_blur_is_identity(image):
    out = apply_degradation(image, DegradationSpec("blur", {"sigma": 0.0}), 1)
    np.testing.assert_array_equal(out, image)


def test_blur_preserves_mean_away_from_clipping():
    img = np.full((3, 32, 32), 0.5)
    img[:, 8:24, 8:24] = 0.7
    out = apply_degradation(img, DegradationSpec("blur", {"sigma": 1.5}), 1)
    assert abs(out.mean() - img.mean()) < 1e-9


def test_noise_is_seeded(image):
    spec = DegradationSpec("noise", {"sigma": 0.05})
    a = apply_degradation(image, spec, 7)
    b = apply_degradation(image, spec, 7)
    c = apply_degradation(image, spec, 8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize(
    "spec",
    [
        DegradationSpec("rain", {"density": 0.01, "length": 7, "angle": 10.0, "intensity": 0.7}),
        DegradationSpec("snow", {"density": 0.01, "size": 2.0, "intensity": 0.8}),
        DegradationSpec("over_exposure", {"gain": 2.0}),
        DegradationSpec("artifact", {"quality": 10.0}),
    ],
)
def test_outputs_stay_in_range(image, spec):
    out = apply_degradation(image, spec, 3)
    assert out.shape == image.shape
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_rain_and_snow_only_brighten(image):
    rain = apply_degradation(image, DegradationSpec("rain", {"density": 0.02, "length": 9, "angle": 0.0, "intensity": 0.8}), 5)
    assert np.all(rain >= image - 1e-12)
    assert rain.sum() > image.sum()


def test_quality_100_table_is_all_ones():
    np.testing.assert_array_equal(quantization_table(100.0), np.ones((8, 8)))


def test_out_of_range_severity_is_rejected(image):
    with pytest.raises(SeverityError):
        apply_degradation(image, DegradationSpec("haze", {"transmission": 0.0, "airlight": 0.9}), 0)
    with pytest.raises(SeverityError):
        apply_degradation(image, DegradationSpec("noise", {}), 0)
    with pytest.raises(SeverityError):
        apply_degradation(image, DegradationSpec("noise", {"sigma": 0.1, "mu": 0.0}), 0)


def test_non_finite_image_is_rejected(image):
    image[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        apply_degradation(image, DegradationSpec("noise", {"sigma": 0.1}), 0)


def test_sampled_rain_length_is_odd():
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = sample_severity("rain", {"density": (0.002, 0.006), "length": (5, 11), "angle": (-20, 20), "intensity": (0.5, 0.8)}, rng)
        assert int(s["length"]) % 2 == 1
