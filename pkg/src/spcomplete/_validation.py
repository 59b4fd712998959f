"""Input validation helpers shared by the solvers, estimators and CLI."""

import numbers

import numpy as np

from .smoothness import SmoothnessOperator


def check_tensor(T, name="T", allow_nan=False):
    """Return ``T`` as a float64 array of order >= 2 with finite entries."""
    T = np.asarray(T, dtype=np.float64)
    if T.ndim < 2:
        raise ValueError(f"{name} must have at least 2 modes, got shape {T.shape}")
    if min(T.shape) < 1:
        raise ValueError(f"{name} has an empty mode: shape {T.shape}")
    bad = ~np.isfinite(T)
    if allow_nan:
        bad &= ~np.isnan(T)
    if bad.any():
        raise ValueError(f"{name} contains non-finite entries")
    return T


def check_mask(mask, shape, require_observed=True):
    mask = np.asarray(mask)
    if mask.dtype != bool:
        if not np.isin(mask, (0, 1)).all():
            raise ValueError("mask entries must be boolean or 0/1")
        mask = mask.astype(bool)
    if mask.shape != tuple(shape):
        raise ValueError(f"mask shape {mask.shape} does not match tensor shape {tuple(shape)}")
    if require_observed and not mask.any():
        raise ValueError("mask has no observed entries")
    return mask


def split_missing(X, mask=None):
    """Separate data and observation mask.

    Missing entries are either given by ``mask`` (``True`` = observed) or
    marked as NaN in ``X``. Returns ``(T, mask)`` with NaNs replaced by 0.
    """
    X = check_tensor(X, "X", allow_nan=True)
    nan = np.isnan(X)
    if mask is None:
        mask = ~nan
    else:
        mask = check_mask(mask, X.shape, require_observed=False)
        if (nan & mask).any():
            raise ValueError("X has NaN entries marked as observed")
    if not mask.any():
        raise ValueError("mask has no observed entries")
    return np.where(mask, X, 0.0), mask


def resolve_rho(rho, ndim):
    if isinstance(rho, numbers.Real):
        rho = np.full(ndim, float(rho))
    else:
        rho = np.asarray(rho, dtype=float)
        if rho.shape != (ndim,):
            raise ValueError(f"rho must be a scalar or have {ndim} entries, got {rho.shape}")
    if not np.all(np.isfinite(rho)) or (rho < 0).any():
        raise ValueError("rho entries must be finite and non-negative")
    return rho


def resolve_operators(operators, shape, rho=None):
    """Per-mode smoothness operators.

    ``None`` picks a chain operator for every mode of extent >= 2. Entries
    may be :class:`SmoothnessOperator` instances, spec strings (``"chain"``,
    ``"grid:HxW"``, ``"none"``) or ``None`` for the default. Modes with zero
    ``rho`` are never evaluated, so their operator is irrelevant.
    """
    if operators is None or isinstance(operators, str):
        operators = [operators] * len(shape)
    operators = list(operators)
    if len(operators) != len(shape):
        raise ValueError(f"expected {len(shape)} smoothness operators, got {len(operators)}")
    out = []
    for n, (op, size) in enumerate(zip(operators, shape)):
        if op is None:
            op = SmoothnessOperator.chain(size) if size >= 2 else SmoothnessOperator.disabled(size)
        elif isinstance(op, str):
            op = SmoothnessOperator.parse(op, size)
        elif not isinstance(op, SmoothnessOperator):
            raise TypeError(f"invalid smoothness operator for mode {n}: {op!r}")
        if op.size != size:
            raise ValueError(f"operator for mode {n} has size {op.size}, mode has {size}")
        out.append(op)
    return out
