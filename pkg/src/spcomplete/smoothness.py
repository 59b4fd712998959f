"""First-difference operators and the TV/QV penalties built on them."""

from dataclasses import dataclass
import re

import numpy as np

__all__ = [
    "SmoothnessOperator",
    "sgn_vec",
    "penalty",
    "penalty_subgradient",
]

CHAIN = "chain"
GRID = "grid"
DISABLED = "none"


@dataclass(frozen=True)
class SmoothnessOperator:
    """Difference operator acting on vectors of length ``size``.

    Three kinds are supported:

    ``chain``
        ``(Lu)[i] = u[i] - u[i+1]``, ``size - 1`` rows.
    ``grid``
        ``u`` is an ``H x W`` image in canonical order (row index fastest).
        Vertical differences come first, then horizontal ones.
    ``none``
        Zero rows; used for modes that carry no smoothness penalty.

    Build instances through :meth:`chain`, :meth:`grid`, :meth:`disabled`
    or :meth:`parse`.
    """

    kind: str
    size: int
    height: int = 0
    width: int = 0

    def __post_init__(self):
        if self.kind == CHAIN:
            if self.size < 2:
                raise ValueError("a chain operator needs at least 2 entries")
        elif self.kind == GRID:
            if self.height < 1 or self.width < 1:
                raise ValueError("grid extents must be positive")
            if self.height * self.width != self.size:
                raise ValueError(
                    f"grid {self.height}x{self.width} does not cover {self.size} entries"
                )
        elif self.kind == DISABLED:
            if self.size < 1:
                raise ValueError("size must be positive")
        else:
            raise ValueError(f"unknown operator kind {self.kind!r}")

    @classmethod
    def chain(cls, size):
        return cls(CHAIN, int(size))

    @classmethod
    def grid(cls, height, width):
        return cls(GRID, int(height) * int(width), int(height), int(width))

    @classmethod
    def disabled(cls, size):
        return cls(DISABLED, int(size))

    @classmethod
    def parse(cls, text, size):
        """Build an operator from ``"chain"``, ``"grid:HxW"`` or ``"none"``."""
        text = text.strip().lower()
        if text == CHAIN:
            return cls.chain(size)
        if text == DISABLED:
            return cls.disabled(size)
        m = re.fullmatch(r"grid:(\d+)x(\d+)", text)
        if m:
            op = cls.grid(int(m.group(1)), int(m.group(2)))
            if op.size != size:
                raise ValueError(f"grid {text} does not match mode size {size}")
            return op
        raise ValueError(f"cannot parse smoothness spec {text!r}")

    @property
    def n_rows(self):
        if self.kind == CHAIN:
            return self.size - 1
        if self.kind == GRID:
            h, w = self.height, self.width
            return (h - 1) * w + h * (w - 1)
        return 0

    def _check_len(self, x, expected):
        if x.ndim != 1 or x.shape[0] != expected:
            raise ValueError(f"expected a vector of length {expected}, got shape {x.shape}")

    def apply(self, u):
        u = np.asarray(u, dtype=float)
        self._check_len(u, self.size)
        return self._apply(u)

    def apply_transpose(self, w):
        w = np.asarray(w, dtype=float)
        self._check_len(w, self.n_rows)
        return self._apply_t(w)

    # unchecked kernels for the solver's inner loop

    def _apply(self, u):
        if self.kind == CHAIN:
            return u[:-1] - u[1:]
        if self.kind == GRID:
            img = u.reshape((self.height, self.width), order="F")
            vert = img[:-1, :] - img[1:, :]
            horiz = img[:, :-1] - img[:, 1:]
            return np.concatenate([vert.ravel(order="F"), horiz.ravel(order="F")])
        return np.zeros(0)

    def _apply_t(self, w):
        if self.kind == CHAIN:
            out = np.empty(self.size)
            out[0] = w[0]
            out[1:-1] = w[1:] - w[:-1]
            out[-1] = -w[-1]
            return out
        if self.kind == GRID:
            h, wd = self.height, self.width
            nv = (h - 1) * wd
            vert = w[:nv].reshape((h - 1, wd), order="F")
            horiz = w[nv:].reshape((h, wd - 1), order="F")
            img = np.zeros((h, wd))
            img[:-1, :] += vert
            img[1:, :] -= vert
            img[:, :-1] += horiz
            img[:, 1:] -= horiz
            return img.ravel(order="F")
        return np.zeros(self.size)

    def dense(self):
        """Explicit ``n_rows x size`` matrix. Meant for tests and debugging."""
        eye = np.eye(self.size)
        if self.n_rows == 0:
            return np.zeros((0, self.size))
        return np.column_stack([self.apply(eye[:, j]) for j in range(self.size)])


def sgn_vec(x):
    """Entrywise sign with ``sgn(0) == 0``."""
    return np.sign(np.asarray(x, dtype=float))


def _check_p(p):
    if p not in (1, 2):
        raise ValueError(f"p must be 1 (TV) or 2 (QV), got {p!r}")


def penalty(op, u, p):
    """``||L u||_p^p`` for ``p`` in {1, 2}."""
    _check_p(p)
    d = op.apply(u)
    if p == 1:
        return float(np.abs(d).sum())
    return float(d @ d)


def penalty_subgradient(op, u, p):
    """``L^T sgn(L u)`` for ``p == 1``, ``2 L^T L u`` for ``p == 2``."""
    _check_p(p)
    d = op.apply(u)
    if p == 1:
        return op.apply_transpose(sgn_vec(d))
    return 2.0 * op.apply_transpose(d)
