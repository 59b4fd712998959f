"""Compiled inner loops.

The sphere descent runs tens of iterations on short vectors for every
factor column of every component; interpreter overhead dominates unless it
is compiled.
"""

import math

import numpy as np
from numba import njit

KIND_CHAIN = 0
KIND_GRID = 1
KIND_NONE = 2


@njit(cache=True)
def diff_apply(kind, h, w, u, out):
    if kind == KIND_CHAIN:
        for i in range(u.shape[0] - 1):
            out[i] = u[i] - u[i + 1]
    elif kind == KIND_GRID:
        k = 0
        for j in range(w):
            for i in range(h - 1):
                out[k] = u[i + j * h] - u[i + 1 + j * h]
                k += 1
        for j in range(w - 1):
            for i in range(h):
                out[k] = u[i + j * h] - u[i + (j + 1) * h]
                k += 1


@njit(cache=True)
def diff_apply_t(kind, h, w, d, out):
    out[:] = 0.0
    if kind == KIND_CHAIN:
        for i in range(d.shape[0]):
            out[i] += d[i]
            out[i + 1] -= d[i]
    elif kind == KIND_GRID:
        k = 0
        for j in range(w):
            for i in range(h - 1):
                out[i + j * h] += d[k]
                out[i + 1 + j * h] -= d[k]
                k += 1
        for j in range(w - 1):
            for i in range(h):
                out[i + j * h] += d[k]
                out[i + (j + 1) * h] -= d[k]
                k += 1


@njit(cache=True)
def _value(u, y, g, c, p, kind, h, w, d):
    n = u.shape[0]
    uu = 0.0
    uy = 0.0
    for i in range(n):
        uu += u[i] * u[i]
        uy += u[i] * y[i]
    f = 0.5 * g * g * uu - g * uy
    if kind != KIND_NONE:
        diff_apply(kind, h, w, u, d)
        pen = 0.0
        for k in range(d.shape[0]):
            pen += abs(d[k]) if p == 1 else d[k] * d[k]
        f += c * pen
    return f


@njit(cache=True)
def sphere_descent(u0, y, g, c, p, kind, h, w, n_rows,
                   alpha0, shrink, max_backtracks, max_iter, tol, warm_start):
    """Backtracking (sub)gradient descent on the unit sphere.

    Minimizes ``c ||L u||_p^p - g u.y + (g^2/2) u.u``. Returns the final
    iterate, the objective at every accepted iterate and their count.
    """
    n = u0.shape[0]
    u = u0.copy()
    values = np.empty(max_iter + 1)
    d = np.empty(max(n_rows, 1))
    d_cand = np.empty(max(n_rows, 1))
    s = np.empty(max(n_rows, 1))
    lt = np.empty(n)
    v = np.empty(n)
    cand = np.empty(n)
    f = _value(u, y, g, c, p, kind, h, w, d)
    values[0] = f
    count = 1
    if g == 0.0:
        return u, values, count
    gg = g * g
    tiny = 2.2250738585072014e-308
    alpha = alpha0
    for _ in range(max_iter):
        for i in range(n):
            v[i] = gg * u[i] - g * y[i]
        if kind != KIND_NONE:
            if p == 1:
                for k in range(n_rows):
                    s[k] = 1.0 if d[k] > 0 else (-1.0 if d[k] < 0 else 0.0)
                diff_apply_t(kind, h, w, s[:n_rows], lt)
                for i in range(n):
                    v[i] += c * lt[i]
            else:
                diff_apply_t(kind, h, w, d[:n_rows], lt)
                for i in range(n):
                    v[i] += 2.0 * c * lt[i]
        vnorm = 0.0
        for i in range(n):
            vnorm += v[i] * v[i]
        vnorm = math.sqrt(vnorm)
        if vnorm == 0.0:
            break
        a = alpha
        accepted = False
        f_cand = f
        for _ in range(max_backtracks + 1):
            wn = 0.0
            for i in range(n):
                cand[i] = u[i] - a * v[i]
                wn += cand[i] * cand[i]
            wn = math.sqrt(wn)
            if wn > 1e-12 * (1.0 + a * vnorm):
                for i in range(n):
                    cand[i] /= wn
                f_cand = _value(cand, y, g, c, p, kind, h, w, d_cand)
                if f_cand <= f:
                    accepted = True
                    break
            a *= shrink
        if not accepted:
            break
        change = f - f_cand
        u[:] = cand
        d[:] = d_cand
        f = f_cand
        values[count] = f
        count += 1
        if change <= tol * max(abs(f), tiny):
            break
        if warm_start:
            alpha = min(alpha0, a / shrink)
    return u, values, count
