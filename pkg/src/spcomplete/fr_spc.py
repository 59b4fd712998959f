"""Fixed-rank smooth PARAFAC completion.

The model is ``Z = sum_r g_r u_r^(1) o ... o u_r^(N)`` with unit-norm factor
columns. It is fitted to the observed entries of ``T`` by hierarchical ALS:
one rank-1 component at a time, each factor column is moved along the unit
sphere with a backtracking (sub)gradient method, then the weight ``g_r`` is
set in closed form. Missing entries are imputed from the current model.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from . import _kernels
from . import tensor_core as tc
from ._validation import check_mask, check_tensor, resolve_operators, resolve_rho
from .smoothness import CHAIN, GRID, DISABLED, penalty, penalty_subgradient

logger = logging.getLogger(__name__)

_OP_KIND = {CHAIN: _kernels.KIND_CHAIN, GRID: _kernels.KIND_GRID, DISABLED: _kernels.KIND_NONE}

__all__ = [
    "FactorModel",
    "StepPolicy",
    "FrSpcConfig",
    "FrSpcState",
    "FrSpcResult",
    "StepTooLarge",
    "local_objective",
    "local_gradient",
    "sphere_update_step",
    "update_component_vector",
    "update_weight",
    "objective",
    "init_state",
    "fr_spc_sweep",
    "fr_spc_solve",
]


class StepTooLarge(ArithmeticError):
    """The sphere step lands on (or next to) the origin."""


@dataclass
class FactorModel:
    """Weights ``g`` of shape ``(R,)`` and factor matrices ``U^(n)`` of shape ``(I_n, R)``."""

    weights: np.ndarray
    factors: list

    @classmethod
    def random(cls, shape, n_components, rng):
        factors = [_random_unit_columns(rng, size, n_components) for size in shape]
        return cls(np.zeros(n_components), factors)

    @property
    def n_components(self):
        return len(self.weights)

    @property
    def shape(self):
        return tuple(U.shape[0] for U in self.factors)

    def component(self, r):
        return [U[:, r].copy() for U in self.factors]

    def set_component(self, r, g, vectors):
        self.weights[r] = g
        for U, v in zip(self.factors, vectors):
            U[:, r] = v

    def append(self, g, vectors):
        self.weights = np.append(self.weights, g)
        self.factors = [
            np.column_stack([U, v]) for U, v in zip(self.factors, vectors)
        ]

    def reconstruct(self):
        out = np.zeros(self.shape)
        for r in range(self.n_components):
            tc.rank1_accumulate(out, self.weights[r], self.component(r))
        return out

    def penalties(self, rho, operators, p):
        """Per-component smoothness sums ``sum_n rho_n ||L_n u_r^(n)||_p^p``."""
        out = np.zeros(self.n_components)
        for n, (U, op) in enumerate(zip(self.factors, operators)):
            if rho[n] == 0.0:
                continue
            for r in range(self.n_components):
                out[r] += rho[n] * penalty(op, U[:, r], p)
        return out

    def copy(self):
        return FactorModel(self.weights.copy(), [U.copy() for U in self.factors])


def _random_unit_columns(rng, size, n_columns):
    A = rng.standard_normal((size, n_columns))
    return A / np.linalg.norm(A, axis=0)


@dataclass
class StepPolicy:
    """Backtracking policy for the sphere (sub)gradient iterations.

    Each trial step starts at ``initial_step`` (or, with ``warm_start``, at
    twice the last accepted step, capped by ``initial_step``) and is halved
    until the local objective does not increase.

    With ``relative=True`` the step is measured in units of ``1/g^2``, the
    inverse curvature of the data term. The first trial step then lands
    exactly on the unpenalized minimizer, and the policy does not depend on
    the scale of the data.
    """

    initial_step: float = 1.0
    relative: bool = True
    shrink: float = 0.5
    max_backtracks: int = 30
    max_iter: int = 50
    tol: float = 1e-8
    warm_start: bool = True

    def __post_init__(self):
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")
        if self.max_backtracks < 0 or self.max_iter < 1:
            raise ValueError("iteration limits must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


_DEFAULT_STEP = StepPolicy()


@dataclass
class FrSpcConfig:
    n_components: int
    p: int = 2
    rho: object = 0.0
    operators: object = None
    step: StepPolicy = field(default_factory=StepPolicy)
    tol: float = 1e-6
    max_sweeps: int = 500
    seed: object = None

    def __post_init__(self):
        if int(self.n_components) < 1:
            raise ValueError("n_components must be >= 1")
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p!r}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if int(self.max_sweeps) < 1:
            raise ValueError("max_sweeps must be >= 1")


@dataclass
class FrSpcState:
    """Solver state. ``E`` is the residual ``T - Z`` on observed entries, zero elsewhere."""

    T: np.ndarray
    mask: np.ndarray
    E: np.ndarray
    model: FactorModel
    rho: np.ndarray
    operators: list
    p: int
    zero_contractions: int = 0

    def __post_init__(self):
        self._keep = self.mask.astype(float)

    def zero_unobserved(self, t):
        """In place ``t[~mask] = 0``."""
        np.multiply(t, self._keep, out=t)
        return t

    @property
    def Z(self):
        return self.model.reconstruct()

    @property
    def X(self):
        return np.where(self.mask, self.T, self.model.reconstruct())

    def residual_norm_sq(self):
        return tc.frobenius_norm_sq(self.E)

    def resync_residual(self):
        """Recompute ``E`` from scratch to drop accumulated rounding."""
        self.E = np.where(self.mask, self.T - self.model.reconstruct(), 0.0)
        return self.E


@dataclass
class FrSpcResult:
    X: np.ndarray
    Z: np.ndarray
    model: FactorModel
    trace: list
    n_sweeps: int
    converged: bool
    zero_contractions: int = 0


def local_objective(u, y, g, rho_n, op, p):
    """Local cost of one factor column with the others held fixed.

    ``(g^2/2) rho_n ||L u||_p^p - g u.y + (g^2/2) u.u``
    """
    u = np.asarray(u, dtype=float)
    val = -g * (u @ y) + 0.5 * g * g * (u @ u)
    if rho_n != 0.0:
        val += 0.5 * g * g * rho_n * penalty(op, u, p)
    return float(val)


def local_gradient(u, y, g, rho_n, op, p):
    """(Sub)gradient of :func:`local_objective` with respect to ``u``."""
    u = np.asarray(u, dtype=float)
    v = g * g * u - g * np.asarray(y, dtype=float)
    if rho_n != 0.0:
        v = v + 0.5 * g * g * rho_n * penalty_subgradient(op, u, p)
    return v


def sphere_update_step(u, v, alpha):
    """Normalized step ``(u - alpha v) / ||u - alpha v||``.

    For a unit ``u`` the norm equals ``sqrt(1 - 2 alpha u.v + alpha^2 v.v)``;
    it is evaluated directly to avoid cancellation at large ``alpha``.
    Raises :class:`StepTooLarge` when the step collapses onto the origin.
    """
    w = u - alpha * v
    denom = np.sqrt(w @ w)
    scale = 1.0 + abs(alpha) * np.sqrt(v @ v)
    if not denom > 1e-12 * scale:
        raise StepTooLarge(f"degenerate sphere step at alpha={alpha:g}")
    return w / denom


def update_component_vector(u, y, g, rho_n, op, p, policy=None):
    """Decrease the local objective over the unit sphere, starting from ``u``.

    Iterates :func:`sphere_update_step` along the (sub)gradient. Each step
    is shrunk until the local objective does not increase; the loop ends on
    a small relative change, after ``policy.max_iter`` steps, or when no
    step length is accepted.

    Returns ``(u_new, values)`` where ``values`` lists the local objective at
    every accepted iterate (first entry is the starting value), so
    ``values[-1] <= values[0]``.
    """
    policy = policy or _DEFAULT_STEP
    u = np.ascontiguousarray(u, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if p not in (1, 2):
        raise ValueError(f"p must be 1 or 2, got {p!r}")
    c = 0.5 * g * g * rho_n
    kind = _OP_KIND[op.kind] if c != 0.0 and op.n_rows > 0 else _kernels.KIND_NONE
    alpha0 = policy.initial_step
    if policy.relative and g != 0.0:
        alpha0 /= g * g
    u_new, values, count = _kernels.sphere_descent(
        u, y, float(g), float(c), int(p), kind, op.height, op.width, op.n_rows,
        float(alpha0), float(policy.shrink), int(policy.max_backtracks),
        int(policy.max_iter), float(policy.tol), bool(policy.warm_start),
    )
    return u_new, values[:count].tolist()


def update_weight(Yr, vectors, rho, operators, p):
    """Closed-form minimizer of the local cost in ``g_r``."""
    num = tc.inner_with_rank1(Yr, vectors)
    return _weight(num, vectors, rho, operators, p)


def _weight(num, vectors, rho, operators, p):
    s = 0.0
    for n, v in enumerate(vectors):
        if rho[n] != 0.0:
            s += rho[n] * penalty(operators[n], v, p)
    return num / (1.0 + s)


def objective(T, mask, model, rho, operators, p):
    """Penalized cost ``1/2 ||(T - Z)_Omega||^2 + sum_r g_r^2/2 sum_n rho_n ||L u||_p^p``.

    With ``X`` imputed from ``Z`` on the missing entries this is the full
    completion objective evaluated at ``(X, model)``.
    """
    Z = model.reconstruct()
    fit = 0.5 * tc.frobenius_norm_sq(np.where(mask, T - Z, 0.0))
    pen = 0.5 * float(model.weights**2 @ model.penalties(rho, operators, p))
    return fit + pen


def init_state(T, mask, model, rho, operators, p, weights="greedy"):
    """Build a solver state around ``model``.

    With ``weights="greedy"`` each ``g_r`` is set in turn to the projection
    of the current observed residual onto its rank-1 direction; with
    ``weights="keep"`` the model weights are used as given.
    """
    E = np.where(mask, T, 0.0)
    for r in range(model.n_components):
        vecs = model.component(r)
        if weights == "greedy":
            model.weights[r] = tc.inner_with_rank1(E, vecs)
        tc.rank1_accumulate(E, -model.weights[r], vecs)
        E[~mask] = 0.0
    return FrSpcState(T, mask, E, model, rho, operators, p)


def fr_spc_sweep(state, step=None):
    """One pass over all components; returns ``state`` (modified in place)."""
    step = step or _DEFAULT_STEP
    model = state.model
    rho, ops, p = state.rho, state.operators, state.p
    N = len(model.factors)
    for r in range(model.n_components):
        vecs = model.component(r)
        g = model.weights[r]
        Y = state.E
        tc.rank1_accumulate(Y, g, vecs)
        num = 0.0
        for n in range(N):
            y = tc.contract_all_but(Y, n, vecs)
            if not np.any(y):
                state.zero_contractions += 1
            else:
                vecs[n], _ = update_component_vector(vecs[n], y, g, rho[n], ops[n], p, step)
            if n == N - 1:
                # <Y, rank-1> reuses the last contraction
                num = float(y @ vecs[n])
        g = _weight(num, vecs, rho, ops, p)
        tc.rank1_accumulate(Y, -g, vecs)
        state.E = state.zero_unobserved(Y)
        model.set_component(r, g, vecs)
    return state


def fr_spc_solve(T, mask, config, model=None, callback=None):
    """Fit a rank-``config.n_components`` smooth PD model to the observed part of ``T``.

    Parameters
    ----------
    T : ndarray
        Data tensor. Entries outside ``mask`` are ignored.
    mask : ndarray of bool
        ``True`` where ``T`` is observed.
    config : FrSpcConfig
    model : FactorModel, optional
        Starting point. A seeded random model with greedy weights is used
        when omitted.
    callback : callable, optional
        Called as ``callback(state)`` after every sweep.

    Returns
    -------
    FrSpcResult
        Completed tensor ``X``, model tensor ``Z``, the fitted model and the
        per-sweep trace of ``||E||^2`` (first entry is the initial value).
    """
    T = check_tensor(T)
    mask = check_mask(mask, T.shape)
    rho = resolve_rho(config.rho, T.ndim)
    ops = resolve_operators(config.operators, T.shape, rho)
    if model is None:
        rng = np.random.default_rng(config.seed)
        model = FactorModel.random(T.shape, int(config.n_components), rng)
        state = init_state(T, mask, model, rho, ops, config.p)
    else:
        state = init_state(T, mask, model.copy(), rho, ops, config.p, weights="keep")

    scale = tc.frobenius_norm_sq(np.where(mask, T, 0.0))
    trace = [state.residual_norm_sq()]
    converged = False
    sweeps = 0
    while sweeps < config.max_sweeps:
        fr_spc_sweep(state, config.step)
        sweeps += 1
        trace.append(state.residual_norm_sq())
        if callback is not None:
            callback(state)
        prev, cur = trace[-2], trace[-1]
        floor = np.finfo(float).eps * scale
        if abs(prev - cur) <= config.tol * max(prev, floor):
            converged = True
            break
    logger.debug("FR-SPC R=%d stopped after %d sweeps (converged=%s)",
                 model.n_components, sweeps, converged)
    state.resync_residual()
    Z = state.model.reconstruct()
    X = np.where(mask, T, Z)
    return FrSpcResult(X, Z, state.model, trace, sweeps, converged, state.zero_contractions)
