"""SPCT tensor/mask container and PNG conversion.

SPCT layout (all integers little-endian)::

    magic         4 bytes   b"SPCT"
    version       uint32    1
    payload_kind  uint8     0 = float64 tensor, 1 = uint8 mask
    ndim          uint32
    dims          ndim x uint64
    payload       prod(dims) elements, first index varying fastest;
                  float64 LE for tensors, one byte (0/1) per entry for masks
"""

import os
import struct

import numpy as np
from PIL import Image

__all__ = [
    "FormatError",
    "write_tensor",
    "read_tensor",
    "write_mask",
    "read_mask",
    "png_to_tensor",
    "tensor_to_png",
    "mask_from_image",
    "ZERO_IS_MISSING",
    "NONZERO_IS_MISSING",
]

MAGIC = b"SPCT"
VERSION = 1
KIND_TENSOR = 0
KIND_MASK = 1
_FIXED = struct.Struct("<4sIBI")

ZERO_IS_MISSING = "zero-is-missing"
NONZERO_IS_MISSING = "nonzero-is-missing"


class FormatError(ValueError):
    """Malformed or unsupported file contents."""


def _write(path, kind, shape, payload):
    header = _FIXED.pack(MAGIC, VERSION, kind, len(shape))
    header += struct.pack(f"<{len(shape)}Q", *shape)
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(payload)
    os.replace(tmp, path)


def _read(path, expected_kind):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _FIXED.size:
        raise FormatError(f"{path}: truncated header")
    magic, version, kind, ndim = _FIXED.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if kind != expected_kind:
        raise FormatError(f"{path}: payload kind {kind}, expected {expected_kind}")
    off = _FIXED.size
    if len(raw) < off + 8 * ndim:
        raise FormatError(f"{path}: truncated dims")
    shape = struct.unpack_from(f"<{ndim}Q", raw, off)
    off += 8 * ndim
    itemsize = 8 if kind == KIND_TENSOR else 1
    count = int(np.prod(shape, dtype=np.uint64)) if ndim else 1
    if len(raw) - off != count * itemsize:
        raise FormatError(
            f"{path}: payload has {len(raw) - off} bytes, header declares {count * itemsize}"
        )
    return tuple(int(d) for d in shape), raw[off:]


def write_tensor(path, t):
    t = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t)):
        raise ValueError("refusing to write non-finite values")
    _write(path, KIND_TENSOR, t.shape, t.astype("<f8").tobytes(order="F"))


def read_tensor(path):
    shape, payload = _read(path, KIND_TENSOR)
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return data.reshape(shape, order="F")


def write_mask(path, mask):
    mask = np.asarray(mask)
    if mask.dtype != bool:
        if not np.isin(mask, (0, 1)).all():
            raise ValueError("mask entries must be 0/1")
        mask = mask.astype(bool)
    _write(path, KIND_MASK, mask.shape, mask.astype(np.uint8).tobytes(order="F"))


def read_mask(path):
    shape, payload = _read(path, KIND_MASK)
    data = np.frombuffer(payload, dtype=np.uint8)
    if (data > 1).any():
        raise FormatError(f"{path}: mask bytes must be 0 or 1")
    return data.astype(bool).reshape(shape, order="F")


def _load_pixels(path):
    with Image.open(path) as img:
        if img.mode == "P":
            raise FormatError(f"{path}: palette images are not supported")
        if img.mode not in ("L", "RGB", "1"):
            raise FormatError(f"{path}: unsupported image mode {img.mode!r}")
        arr = np.asarray(img)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    return arr


def png_to_tensor(path):
    """Read an 8-bit RGB or grayscale PNG as an ``H x W x 3`` float tensor in 0..255."""
    arr = _load_pixels(path)
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return arr.astype(np.float64)


def tensor_to_png(t, path):
    """Write ``H x W``, ``H x W x 1`` or ``H x W x 3`` values as an 8-bit PNG.

    Values are clamped to [0, 255] and rounded half away from zero.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 3 and t.shape[2] == 1:
        t = t[:, :, 0]
    if not (t.ndim == 2 or (t.ndim == 3 and t.shape[2] == 3)):
        raise ValueError(f"cannot write a tensor of shape {t.shape} as an image")
    pix = np.floor(np.clip(t, 0.0, 255.0) + 0.5).astype(np.uint8)
    Image.fromarray(pix, mode="L" if pix.ndim == 2 else "RGB").save(path, format="PNG")


def mask_from_image(path, shape=None, rule=ZERO_IS_MISSING):
    """Derive a dead-pixel mask from an image.

    A pixel is black when all its channels are zero. With
    ``rule="zero-is-missing"`` black pixels are missing, with
    ``"nonzero-is-missing"`` every other pixel is. The per-pixel decision is
    repeated over the channels of ``shape`` (``H x W x C``, default 3
    channels at the image size).
    """
    arr = _load_pixels(path)
    black = (arr == 0) if arr.ndim == 2 else (arr == 0).all(axis=2)
    if rule == ZERO_IS_MISSING:
        observed = ~black
    elif rule == NONZERO_IS_MISSING:
        observed = black
    else:
        raise ValueError(f"unknown mask rule {rule!r}")
    if shape is None:
        shape = observed.shape + (3,)
    shape = tuple(shape)
    if shape[:2] != observed.shape:
        raise ValueError(f"mask image is {observed.shape}, target is {shape[:2]}")
    channels = shape[2] if len(shape) == 3 else 1
    mask = np.repeat(observed[:, :, None], channels, axis=2).reshape(shape)
    if not mask.any():
        raise ValueError(f"{path}: mask leaves no observed entries")
    return mask
