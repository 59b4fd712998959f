"""Completion quality measures.

``subset`` arguments select the entries a metric is computed on: ``None``
means every entry, otherwise a boolean array of the tensor's shape. Pass
``~mask`` to score the missing entries only.
"""

import numpy as np

__all__ = ["mse", "psnr", "ssim", "sdr", "SSIM_WINDOW", "SSIM_K1", "SSIM_K2", "SSIM_RANGE"]

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 255.0


def _pair(a, b, subset):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if subset is not None:
        subset = np.asarray(subset, dtype=bool)
        if subset.shape != a.shape:
            raise ValueError(f"subset shape {subset.shape} does not match {a.shape}")
        a, b = a[subset], b[subset]
    if a.size == 0:
        raise ValueError("empty evaluation subset")
    return a.ravel(), b.ravel()


def mse(a, b, subset=None):
    a, b = _pair(a, b, subset)
    d = a - b
    return float(d @ d / d.size)


def psnr(a, b, subset=None, data_range=SSIM_RANGE):
    """``10 log10(range^2 / MSE)`` in dB; ``inf`` when the inputs agree."""
    m = mse(a, b, subset)
    if m == 0.0:
        return float("inf")
    return float(10.0 * np.log10(data_range**2 / m))


def sdr(truth, estimate, subset=None):
    """Signal-to-distortion ratio ``10 log10(||t||^2 / ||t - e||^2)`` in dB."""
    t, e = _pair(truth, estimate, subset)
    signal = float(t @ t)
    if signal == 0.0:
        raise ValueError("truth has zero energy on the evaluation subset")
    d = t - e
    err = float(d @ d)
    if err == 0.0:
        return float("inf")
    return float(10.0 * np.log10(signal / err))


def _box_mean(img, k):
    """Means over every fully contained ``k x k`` window."""
    c = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    c[1:, 1:] = img.cumsum(0).cumsum(1)
    s = c[k:, k:] - c[:-k, k:] - c[k:, :-k] + c[:-k, :-k]
    return s / (k * k)


def _ssim2d(a, b, k, c1, c2):
    mu_a = _box_mean(a, k)
    mu_b = _box_mean(b, k)
    var_a = _box_mean(a * a, k) - mu_a**2
    var_b = _box_mean(b * b, k) - mu_b**2
    cov = _box_mean(a * b, k) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def ssim(a, b, window=SSIM_WINDOW, data_range=SSIM_RANGE):
    """Mean structural similarity over all ``window x window`` blocks.

    Uniform weights, stride 1, population (co)variances. Inputs of order
    three or more are treated as stacks of 2-D channels along the trailing
    modes and the per-channel values are averaged.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim < 2:
        raise ValueError("ssim needs at least a 2-D image")
    if a.shape[0] < window or a.shape[1] < window:
        raise ValueError(f"image {a.shape[:2]} smaller than the {window}x{window} window")
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    a = a.reshape(a.shape[0], a.shape[1], -1)
    b = b.reshape(b.shape[0], b.shape[1], -1)
    vals = [_ssim2d(a[:, :, c], b[:, :, c], window, c1, c2) for c in range(a.shape[2])]
    return float(np.mean(vals))
