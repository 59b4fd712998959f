"""Dense multilinear kernels.

Tensors are plain ``numpy.ndarray`` objects of dtype float64 and masks are
boolean arrays of the same shape (``True`` marks an observed entry). Modes are
numbered from zero.

The canonical *linear* order of a tensor is the one where the first index
varies fastest (Fortran order). It fixes the column order of :func:`unfold`
and the payload order of the on-disk format; the in-memory layout of the
array itself is irrelevant.
"""

from functools import reduce

import numpy as np

__all__ = [
    "frobenius_norm_sq",
    "unfold",
    "fold",
    "mode_product",
    "mode_vector_product",
    "contract_all_but",
    "outer",
    "rank1_accumulate",
    "inner_with_rank1",
    "masked_overwrite",
    "to_canonical",
    "from_canonical",
]


def _check_mode(ndim, mode):
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for a tensor of order {ndim}")


def _check_vectors(shape, vectors, skip=None):
    if len(vectors) != len(shape):
        raise ValueError(
            f"expected {len(shape)} vectors, got {len(vectors)}"
        )
    for n, (size, v) in enumerate(zip(shape, vectors)):
        if n == skip:
            continue
        if np.ndim(v) != 1 or len(v) != size:
            raise ValueError(
                f"vector for mode {n} has shape {np.shape(v)}, expected ({size},)"
            )


def frobenius_norm_sq(t):
    """Sum of squared entries."""
    t = np.asarray(t, dtype=float)
    return float(np.vdot(t, t))


def to_canonical(t):
    """Flatten ``t`` with the first index varying fastest."""
    return np.asarray(t).ravel(order="F")


def from_canonical(data, shape):
    """Inverse of :func:`to_canonical`."""
    return np.reshape(np.asarray(data), shape, order="F")


def unfold(t, mode):
    """Mode-``mode`` unfolding of ``t``.

    Row index is ``i_mode``; the remaining indices are laid out along the
    columns with the smallest remaining mode varying fastest, so that for a
    third-order tensor ``unfold(t, 0)[i1, i3 * I2 + i2] == t[i1, i2, i3]``.
    """
    t = np.asarray(t)
    _check_mode(t.ndim, mode)
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order="F")


def fold(matrix, mode, shape):
    """Inverse of :func:`unfold`."""
    shape = tuple(shape)
    _check_mode(len(shape), mode)
    moved = (shape[mode],) + shape[:mode] + shape[mode + 1:]
    matrix = np.asarray(matrix)
    if matrix.size != np.prod(shape, dtype=int):
        raise ValueError(f"cannot fold a {matrix.shape} matrix into {shape}")
    return np.moveaxis(np.reshape(matrix, moved, order="F"), 0, mode)


def mode_product(t, mode, A):
    """Compute ``t x_mode A.T`` for ``A`` of shape ``(I_mode, R)``.

    The result has extent ``R`` along ``mode`` and satisfies
    ``unfold(result, mode) == A.T @ unfold(t, mode)``.
    """
    t = np.asarray(t, dtype=float)
    A = np.asarray(A, dtype=float)
    _check_mode(t.ndim, mode)
    if A.ndim != 2 or A.shape[0] != t.shape[mode]:
        raise ValueError(
            f"matrix of shape {A.shape} does not match mode {mode} of extent {t.shape[mode]}"
        )
    out = np.tensordot(t, A, axes=([mode], [0]))
    return np.moveaxis(out, -1, mode)


def mode_vector_product(t, mode, v):
    """Contract mode ``mode`` of ``t`` with ``v``; that mode is removed."""
    t = np.asarray(t, dtype=float)
    _check_mode(t.ndim, mode)
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != t.shape[mode]:
        raise ValueError(
            f"vector of shape {v.shape} does not match mode {mode} of extent {t.shape[mode]}"
        )
    return np.tensordot(t, v, axes=([mode], [0]))


def contract_all_but(t, mode, vectors):
    """Contract every mode of ``t`` except ``mode`` with the given vectors.

    ``vectors`` is either one entry per mode (the entry at ``mode`` is
    ignored and may be ``None``) or one entry per mode other than ``mode``.
    Returns a vector of length ``t.shape[mode]``.
    """
    t = np.asarray(t, dtype=float)
    _check_mode(t.ndim, mode)
    vectors = list(vectors)
    if len(vectors) == t.ndim - 1:
        vectors.insert(mode, None)
    _check_vectors(t.shape, vectors, skip=mode)
    out = t
    # Highest mode first keeps the remaining axis numbers valid.
    for n in range(t.ndim - 1, -1, -1):
        if n != mode:
            out = np.tensordot(out, vectors[n], axes=([n], [0]))
    return np.asarray(out, dtype=float)


def outer(vectors):
    """Outer product ``v1 o v2 o ... o vN``."""
    vectors = [np.asarray(v, dtype=float) for v in vectors]
    return reduce(np.multiply.outer, vectors)


def rank1_accumulate(t, coeff, vectors):
    """In place ``t += coeff * outer(vectors)``; returns ``t``."""
    _check_vectors(t.shape, vectors)
    if coeff != 0.0:
        t += coeff * outer(vectors)
    return t


def inner_with_rank1(t, vectors):
    """Full contraction ``<t, v1 o ... o vN>``."""
    t = np.asarray(t, dtype=float)
    _check_vectors(t.shape, vectors)
    out = t
    for n in range(t.ndim - 1, -1, -1):
        out = np.tensordot(out, vectors[n], axes=([n], [0]))
    return float(out)


def masked_overwrite(dst, src, mask, region="observed"):
    """Copy ``src`` into ``dst`` on one region of ``mask``, in place.

    ``region`` is ``"observed"`` or ``"unobserved"``. ``src`` may be a tensor
    of the same shape or a scalar (``E[~mask] = 0`` style resets).
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != dst.shape:
        raise ValueError(f"mask shape {mask.shape} does not match {dst.shape}")
    if region == "observed":
        sel = mask
    elif region == "unobserved":
        sel = ~mask
    else:
        raise ValueError(f"unknown region {region!r}")
    if np.ndim(src) == 0:
        dst[sel] = src
    else:
        src = np.asarray(src)
        if src.shape != dst.shape:
            raise ValueError(f"source shape {src.shape} does not match {dst.shape}")
        dst[sel] = src[sel]
    return dst
