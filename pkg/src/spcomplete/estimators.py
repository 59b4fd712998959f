"""scikit-learn style wrappers around the completion solvers.

Both estimators take the incomplete tensor as ``X``. Missing entries are
marked with NaN or passed explicitly through ``mask`` (``True`` =
observed). ``transform`` fills the missing entries of a tensor of the
fitted shape from the fitted model and leaves observed entries untouched.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import split_missing
from .fr_spc import FrSpcConfig, StepPolicy, fr_spc_solve
from .spc import SpcConfig, error_bound, spc_solve, spc_solve_simple

__all__ = ["SmoothPARAFACCompletion", "FixedRankSmoothPARAFAC"]


class _CompletionMixin(TransformerMixin):

    def _store(self, T, mask, model, Z):
        self.model_ = model
        self.weights_ = model.weights
        self.factors_ = model.factors
        self.n_components_ = model.n_components
        self.reconstruction_ = Z
        self.shape_ = T.shape

    def transform(self, X, mask=None):
        """Fill missing entries of ``X`` from the fitted reconstruction.

        Parameters
        ----------
        X : ndarray
            Tensor of the fitted shape, NaN at missing entries unless
            ``mask`` is given.
        mask : ndarray of bool, optional

        Returns
        -------
        ndarray
        """
        check_is_fitted(self, "reconstruction_")
        X = np.asarray(X, dtype=float)
        if X.shape != self.shape_:
            raise ValueError(f"X has shape {X.shape}, estimator was fitted on {self.shape_}")
        if mask is None:
            mask = ~np.isnan(X)
        else:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != X.shape:
                raise ValueError(f"mask shape {mask.shape} does not match {X.shape}")
        return np.where(mask, X, self.reconstruction_)

    def fit_transform(self, X, y=None, mask=None):
        return self.fit(X, y, mask=mask).transform(X, mask=mask)

    def _step(self):
        return self.step_policy if self.step_policy is not None else StepPolicy()


class SmoothPARAFACCompletion(_CompletionMixin, BaseEstimator):
    """Tensor completion with a smooth PD model of automatically grown rank.

    Parameters
    ----------
    p : {1, 2}, default=2
        1 penalizes total variation of the factor columns, 2 quadratic
        variation.
    rho : float or sequence of float, default=1.0
        Smoothness weight per mode. A scalar applies to every mode.
    smoothness : None, str or sequence, default=None
        Difference operator per mode: ``"chain"``, ``"grid:HxW"``, ``"none"``
        or a :class:`~spcomplete.smoothness.SmoothnessOperator`. ``None``
        uses a chain on every mode.
    sdr : float, default=25.0
        Target signal-to-distortion ratio (dB) on the observed entries; sets
        the stopping bound.
    nu : float, default=0.01
        Stall threshold that triggers adding a component.
    max_rank : int, default=3000
    max_iter : int, default=10000
        Cap on outer iterations (one sweep over all components each).
    strict_switch : bool, default=True
        Use ``<`` rather than ``<=`` when comparing the stall ratio to ``nu``.
    method : {"accelerated", "restart"}, default="accelerated"
        ``"restart"`` refits from scratch for every rank; slow, for reference.
    step_policy : StepPolicy, optional
    random_state : int, numpy Generator or None

    Attributes
    ----------
    weights_ : ndarray of shape (n_components_,)
    factors_ : list of ndarray
        Unit-norm factor matrices, one ``(I_n, n_components_)`` per mode.
    n_components_ : int
    reconstruction_ : ndarray
        Model tensor ``Z``.
    trace_ : SpcTrace
    termination_ : str
        ``"fit_reached"``, ``"max_rank"`` or ``"max_iters"``.
    error_bound_ : float
    n_iter_ : int
    """

    def __init__(self, p=2, rho=1.0, smoothness=None, sdr=25.0, nu=0.01, max_rank=3000,
                 max_iter=10000, strict_switch=True, method="accelerated",
                 step_policy=None, random_state=None):
        self.p = p
        self.rho = rho
        self.smoothness = smoothness
        self.sdr = sdr
        self.nu = nu
        self.max_rank = max_rank
        self.max_iter = max_iter
        self.strict_switch = strict_switch
        self.method = method
        self.step_policy = step_policy
        self.random_state = random_state

    def fit(self, X, y=None, mask=None):
        """Fit the model to the observed entries of ``X``.

        Parameters
        ----------
        X : ndarray
            Incomplete tensor, NaN at missing entries unless ``mask`` is given.
        y : ignored
        mask : ndarray of bool, optional

        Returns
        -------
        self
        """
        T, mask = split_missing(X, mask)
        config = SpcConfig(
            p=self.p, rho=self.rho, operators=self.smoothness, sdr=self.sdr, nu=self.nu,
            max_rank=self.max_rank, max_iter=self.max_iter, strict_switch=self.strict_switch,
            step=self._step(), seed=self.random_state,
        )
        if self.method == "accelerated":
            res = spc_solve(T, mask, config)
        elif self.method == "restart":
            res = spc_solve_simple(T, mask, config)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self._store(T, mask, res.model, res.Z)
        self.trace_ = res.trace
        self.termination_ = res.trace.reason
        self.error_bound_ = error_bound(self.sdr, T, mask)
        self.n_iter_ = res.trace.n_iter
        return self


class FixedRankSmoothPARAFAC(_CompletionMixin, BaseEstimator):
    """Tensor completion with a smooth PD model of fixed rank.

    Parameters
    ----------
    n_components : int, default=1
    p : {1, 2}, default=2
    rho : float or sequence of float, default=0.0
    smoothness : None, str or sequence, default=None
    tol : float, default=1e-6
        Stop when the relative change of the observed residual energy over
        one sweep falls below ``tol``.
    max_iter : int, default=500
        Maximum number of sweeps.
    step_policy : StepPolicy, optional
    random_state : int, numpy Generator or None

    Attributes
    ----------
    weights_, factors_, n_components_, reconstruction_
        As in :class:`SmoothPARAFACCompletion`.
    trace_ : list of float
        Observed residual energy before the first and after every sweep.
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, n_components=1, p=2, rho=0.0, smoothness=None, tol=1e-6, max_iter=500,
                 step_policy=None, random_state=None):
        self.n_components = n_components
        self.p = p
        self.rho = rho
        self.smoothness = smoothness
        self.tol = tol
        self.max_iter = max_iter
        self.step_policy = step_policy
        self.random_state = random_state

    def fit(self, X, y=None, mask=None):
        T, mask = split_missing(X, mask)
        config = FrSpcConfig(
            n_components=self.n_components, p=self.p, rho=self.rho, operators=self.smoothness,
            step=self._step(), tol=self.tol, max_sweeps=self.max_iter, seed=self.random_state,
        )
        res = fr_spc_solve(T, mask, config)
        self._store(T, mask, res.model, res.Z)
        self.trace_ = res.trace
        self.n_iter_ = res.n_sweeps
        self.converged_ = res.converged
        return self
