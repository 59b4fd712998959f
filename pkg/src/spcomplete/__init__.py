"""Tensor completion with smooth PARAFAC models.

The missing entries of a dense tensor are estimated by a sum of rank-1
terms whose factor columns are penalized for roughness (total or quadratic
variation). The number of terms grows until the fit on observed entries
reaches a target signal-to-distortion ratio.
"""

from .estimators import FixedRankSmoothPARAFAC, SmoothPARAFACCompletion
from .fr_spc import FactorModel, FrSpcConfig, StepPolicy, fr_spc_solve
from .smoothness import SmoothnessOperator
from .spc import SpcConfig, spc_solve, spc_solve_simple

__version__ = "0.1.0"

__all__ = [
    "FactorModel",
    "FixedRankSmoothPARAFAC",
    "FrSpcConfig",
    "SmoothPARAFACCompletion",
    "SmoothnessOperator",
    "SpcConfig",
    "StepPolicy",
    "fr_spc_solve",
    "spc_solve",
    "spc_solve_simple",
]
