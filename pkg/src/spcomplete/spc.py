"""Rank-increasing smooth PARAFAC completion.

Starting from a single component, the fixed-rank sweeps of
:mod:`spcomplete.fr_spc` are run until the observed-entry residual drops
below an error bound derived from a target SDR. Whenever the residual
stalls relative to its distance from that bound, a new random component
is appended.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from . import tensor_core as tc
from ._validation import check_mask, check_tensor, resolve_operators, resolve_rho
from .fr_spc import (
    FactorModel,
    FrSpcConfig,
    StepPolicy,
    fr_spc_solve,
    fr_spc_sweep,
    init_state,
)

logger = logging.getLogger(__name__)

__all__ = [
    "FIT_REACHED",
    "MAX_RANK",
    "MAX_ITERS",
    "SpcConfig",
    "SpcTrace",
    "SpcResult",
    "error_bound",
    "switching_check",
    "spc_solve",
    "spc_solve_simple",
]

FIT_REACHED = "fit_reached"
MAX_RANK = "max_rank"
MAX_ITERS = "max_iters"


@dataclass
class SpcConfig:
    p: int = 2
    rho: object = 1.0
    operators: object = None
    sdr: float = 25.0
    nu: float = 0.01
    max_rank: int = 3000
    max_iter: int = 10000
    strict_switch: bool = True
    step: StepPolicy = field(default_factory=StepPolicy)
    seed: object = None
    # used by spc_solve_simple only
    fr_tol: float = 1e-6
    fr_max_sweeps: int = 500

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p!r}")
        if not np.isfinite(self.sdr):
            raise ValueError("sdr must be finite")
        if not self.nu > 0:
            raise ValueError("nu must be positive")
        if int(self.max_rank) < 1:
            raise ValueError("max_rank must be >= 1")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SpcTrace:
    """Per-iteration record. Entry 0 is the state before the first sweep."""

    mu: list = field(default_factory=list)
    ranks: list = field(default_factory=list)
    switched: list = field(default_factory=list)
    eps: float = 0.0
    reason: str = ""

    def record(self, mu, rank, switched):
        self.mu.append(float(mu))
        self.ranks.append(int(rank))
        self.switched.append(bool(switched))

    @property
    def n_iter(self):
        return len(self.mu) - 1

    @property
    def final_rank(self):
        return self.ranks[-1] if self.ranks else 0

    def rows(self):
        """``(iter, mu, R, switched)`` tuples."""
        return [
            (t, mu, R, int(s))
            for t, (mu, R, s) in enumerate(zip(self.mu, self.ranks, self.switched))
        ]


@dataclass
class SpcResult:
    X: np.ndarray
    Z: np.ndarray
    model: FactorModel
    trace: SpcTrace


def error_bound(sdr, T, mask):
    """``10^(-sdr/10) * ||T_Omega||^2``."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask has no observed entries")
    return 10.0 ** (-sdr / 10.0) * tc.frobenius_norm_sq(np.asarray(T)[mask])


def switching_check(mu_t, mu_next, eps, nu, strict=True):
    """True when the residual decrease is slow relative to the remaining gap.

    Compares ``|mu_t - mu_next| / |mu_next - eps|`` against ``nu`` with ``<``
    (``strict=True``) or ``<=``. Hitting ``eps`` exactly is a reached fit,
    never a switch.
    """
    if mu_next == eps:
        return False
    ratio = abs(mu_t - mu_next) / abs(mu_next - eps)
    return ratio < nu if strict else ratio <= nu


def _prepare(T, mask, config):
    T = check_tensor(T)
    mask = check_mask(mask, T.shape)
    rho = resolve_rho(config.rho, T.ndim)
    ops = resolve_operators(config.operators, T.shape, rho)
    return T, mask, rho, ops


def _append_component(state, rng):
    vecs = [v / np.linalg.norm(v) for v in (rng.standard_normal(s) for s in state.T.shape)]
    g = tc.inner_with_rank1(state.E, vecs)
    tc.rank1_accumulate(state.E, -g, vecs)
    state.zero_unobserved(state.E)
    state.model.append(g, vecs)


def _fit_reached(state, mu, eps):
    """Confirm ``mu <= eps`` against a freshly recomputed residual."""
    if mu > eps:
        return False, mu
    mu = tc.frobenius_norm_sq(state.resync_residual())
    return mu <= eps, mu


def spc_solve(T, mask, config=None, callback=None):
    """Complete ``T`` on the missing entries with a rank-adaptive smooth PD model.

    Parameters
    ----------
    T : ndarray
        Data tensor; values outside ``mask`` are ignored.
    mask : ndarray of bool
        ``True`` where ``T`` is observed.
    config : SpcConfig, optional
    callback : callable, optional
        Called as ``callback(state)`` after every iteration, once the
        iteration (including any component append) is complete.

    Returns
    -------
    SpcResult
        ``X`` equals ``T`` on observed entries and ``Z`` elsewhere. The trace
        records ``mu = ||Z_Omega - T_Omega||^2`` after every iteration,
        measured after any component append.
    """
    config = config or SpcConfig()
    T, mask, rho, ops = _prepare(T, mask, config)
    rng = np.random.default_rng(config.seed)
    eps = error_bound(config.sdr, T, mask)

    X0 = np.where(mask, T, T[mask].mean())
    model = FactorModel.random(T.shape, 1, rng)
    model.weights[0] = tc.inner_with_rank1(X0, model.component(0))
    state = init_state(T, mask, model, rho, ops, config.p, weights="keep")

    trace = SpcTrace(eps=eps)
    mu = state.residual_norm_sq()
    trace.record(mu, 1, False)
    reason = MAX_ITERS
    for _ in range(int(config.max_iter)):
        fr_spc_sweep(state, config.step)
        mu_next = state.residual_norm_sq()
        done, mu_next = _fit_reached(state, mu_next, eps)
        if done:
            trace.record(mu_next, model.n_components, False)
            reason = FIT_REACHED
            if callback is not None:
                callback(state)
            break
        switched = switching_check(mu, mu_next, eps, config.nu, config.strict_switch)
        if switched and state.model.n_components >= config.max_rank:
            trace.record(mu_next, state.model.n_components, False)
            reason = MAX_RANK
            if callback is not None:
                callback(state)
            break
        if switched:
            _append_component(state, rng)
            mu_next = state.residual_norm_sq()
            logger.debug("iter %d: R -> %d, mu=%.6g", len(trace.mu), state.model.n_components, mu_next)
        mu = mu_next
        trace.record(mu, state.model.n_components, switched)
        if callback is not None:
            callback(state)
        if switched:
            done, mu = _fit_reached(state, mu, eps)
            if done:
                trace.mu[-1] = mu
                reason = FIT_REACHED
                break
    trace.reason = reason
    state.resync_residual()
    Z = state.model.reconstruct()
    return SpcResult(np.where(mask, T, Z), Z, state.model, trace)


def spc_solve_simple(T, mask, config=None):
    """Restart fixed-rank fits with ``R = 1, 2, ...`` until the error bound holds.

    Much slower than :func:`spc_solve`; kept as a reference. The trace holds
    one entry per tried rank.
    """
    config = config or SpcConfig()
    T, mask, rho, ops = _prepare(T, mask, config)
    eps = error_bound(config.sdr, T, mask)
    trace = SpcTrace(eps=eps)
    result = None
    for R in range(1, int(config.max_rank) + 1):
        fr_config = FrSpcConfig(
            n_components=R, p=config.p, rho=rho, operators=ops, step=config.step,
            tol=config.fr_tol, max_sweeps=config.fr_max_sweeps, seed=config.seed,
        )
        result = fr_spc_solve(T, mask, fr_config)
        fit = tc.frobenius_norm_sq((result.Z - T)[mask])
        trace.record(fit, R, R > 1)
        if fit <= eps:
            trace.reason = FIT_REACHED
            break
    else:
        trace.reason = MAX_RANK
    return SpcResult(result.X, result.Z, result.model, trace)
