"""Sparse precision matrix estimation with penalized quadratic losses."""
from .admm import (AdmmConfig, AdmmState, FitResult, Loss, SolutionPath, fit, kkt_residual,
                   lambda_grid, objective, solution_path)
from .errors import InvalidInputError, NumericalFailureError
from .matrix_core import ThinSVD, sample_covariance, thin_svd_gram
from .penalties import Family, PenaltySpec, lla_refit, lla_weights

__version__ = "0.1.0"
