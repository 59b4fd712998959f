import math

import numpy as np
import pytest

from spcomplete import metrics

from _oracles import indices, ssim_naive


@pytest.fixture
def rng():
    return np.random.default_rng(5)


def mse_naive(a, b):
    total, n = 0.0, 0
    for idx in indices(a.shape):
        total += (a[idx] - b[idx]) ** 2
        n += 1
    return total / n


def test_mse(rng):
    a = rng.uniform(0, 255, (4, 5, 3))
    assert metrics.mse(a, a) == 0.0
    assert metrics.mse(a, a + 3.0) == pytest.approx(9.0, rel=1e-12)
    b = rng.uniform(0, 255, a.shape)
    assert metrics.mse(a, b) == pytest.approx(mse_naive(a, b), rel=1e-12)
    sub = rng.random(a.shape) > 0.5
    assert metrics.mse(a, b, sub) == pytest.approx(np.mean((a - b)[sub] ** 2), rel=1e-12)
    with pytest.raises(ValueError):
        metrics.mse(a, b, np.zeros(a.shape, bool))
    with pytest.raises(ValueError):
        metrics.mse(a, b[:2])


def test_psnr():
    a = np.zeros((4, 4))
    assert metrics.psnr(a, a + 255.0) == pytest.approx(0.0, abs=1e-12)
    assert metrics.psnr(a, a + 1.0) == pytest.approx(10 * math.log10(65025), rel=1e-12)
    assert abs(metrics.psnr(a, a + 1.0) - 48.1308) < 1e-4
    assert metrics.psnr(a, a) == float("inf")


def test_sdr(rng):
    t = rng.standard_normal((5, 6))
    assert metrics.sdr(t, t) == float("inf")
    assert metrics.sdr(t, np.zeros_like(t)) == pytest.approx(0.0, abs=1e-12)
    e = rng.standard_normal(t.shape)
    e *= np.sqrt(np.sum(t**2) / 1000 / np.sum(e**2))
    assert metrics.sdr(t, t + e) == pytest.approx(30.0, abs=1e-9)
    with pytest.raises(ValueError):
        metrics.sdr(np.zeros((3, 3)), np.ones((3, 3)))


def test_ssim_examples(rng):
    a = rng.uniform(0, 255, (16, 20))
    assert metrics.ssim(a, a) == pytest.approx(1.0, abs=1e-12)
    assert metrics.ssim(a, 255 - a) < 1.0
    c1, c2 = 40.0, 200.0
    C1 = (0.01 * 255) ** 2
    expected = (2 * c1 * c2 + C1) / (c1**2 + c2**2 + C1)
    got = metrics.ssim(np.full((10, 10), c1), np.full((10, 10), c2))
    assert got == pytest.approx(expected, abs=1e-9)
    with pytest.raises(ValueError):
        metrics.ssim(np.zeros((7, 20)), np.zeros((7, 20)))


def test_ssim_matches_loop_oracle(rng):
    a = rng.uniform(0, 255, (14, 12))
    b = np.clip(a + rng.normal(0, 20, a.shape), 0, 255)
    assert metrics.ssim(a, b) == pytest.approx(ssim_naive(a, b), abs=1e-9)
    img = rng.uniform(0, 255, (12, 13, 3))
    noisy = img + rng.normal(0, 10, img.shape)
    per_channel = np.mean([ssim_naive(img[:, :, c], noisy[:, :, c]) for c in range(3)])
    assert metrics.ssim(img, noisy) == pytest.approx(per_channel, abs=1e-9)
