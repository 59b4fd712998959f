"""Synthetic smooth tensors and observation masks."""

import numpy as np

__all__ = [
    "gaussian_mixture_tensor",
    "default_phantom_components",
    "phantom",
    "random_mask",
    "dead_pixel_mask",
]


def gaussian_mixture_tensor(dims, components, value_scale=1.0):
    """Sum of axis-aligned Gaussian bumps sampled on the integer grid.

    Parameters
    ----------
    dims : sequence of int
    components : sequence of (center, widths, weight)
        ``center`` and ``widths`` hold one value per mode, in index units
        (0-based grid positions).
    value_scale : float

    Returns
    -------
    ndarray of shape ``dims``
    """
    dims = tuple(int(d) for d in dims)
    if any(d < 1 for d in dims):
        raise ValueError(f"invalid dims {dims}")
    out = np.zeros(dims)
    for center, widths, weight in components:
        center = np.asarray(center, dtype=float)
        widths = np.asarray(widths, dtype=float)
        if center.shape != (len(dims),) or widths.shape != (len(dims),):
            raise ValueError("center and widths need one entry per mode")
        if not np.all(widths > 0):
            raise ValueError("Gaussian widths must be positive")
        # each bump is separable: an outer product of 1-D profiles
        bump = np.array(float(weight))
        for n, d in enumerate(dims):
            grid = np.arange(d)
            bump = np.multiply.outer(bump, np.exp(-((grid - center[n]) ** 2) / (2 * widths[n] ** 2)))
        out += bump
    return value_scale * out


def default_phantom_components(dims, n_components=4, seed=0):
    """Seeded bump parameters used by :func:`phantom`.

    Centers are uniform over the middle 60% of each axis, widths uniform in
    ``[0.1, 0.25]`` of the axis length, weights uniform in ``[0.5, 1]``.
    """
    rng = np.random.default_rng(seed)
    dims = np.asarray(dims, dtype=float)
    comps = []
    for _ in range(n_components):
        center = rng.uniform(0.2, 0.8, size=len(dims)) * (dims - 1)
        widths = rng.uniform(0.1, 0.25, size=len(dims)) * dims
        weight = rng.uniform(0.5, 1.0)
        comps.append((center, widths, weight))
    return comps


def phantom(dims=(30, 30, 30), seed=0, value_scale=1.0):
    """Four-bump smooth test tensor."""
    return gaussian_mixture_tensor(dims, default_phantom_components(dims, 4, seed), value_scale)


def _n_missing(total, ratio):
    if not 0 <= ratio < 1:
        raise ValueError(f"missing ratio must lie in [0, 1), got {ratio}")
    n = int(round(ratio * total))
    if n >= total:
        raise ValueError("missing ratio leaves no observed entries")
    return n


def random_mask(dims, missing_ratio, seed=None):
    """Mask with exactly ``round(missing_ratio * size)`` missing entries."""
    dims = tuple(int(d) for d in dims)
    total = int(np.prod(dims))
    n = _n_missing(total, missing_ratio)
    rng = np.random.default_rng(seed)
    flat = np.ones(total, dtype=bool)
    flat[rng.choice(total, size=n, replace=False)] = False
    return flat.reshape(dims)


def dead_pixel_mask(height, width, channels, missing_ratio, seed=None):
    """Mask whose missing pixels lose every channel at once."""
    pixels = random_mask((height, width), missing_ratio, seed)
    return np.repeat(pixels[:, :, None], channels, axis=2)
