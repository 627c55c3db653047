"""ADMM estimators for sparse precision matrices under quadratic losses.

Two losses are supported::

    L1(X) = tr(X^T S X) / 2 - tr(X)                       ("equal")
    L2(X) = tr(X S X^T) / 4 + tr(X^T S X) / 4 - tr(X)     ("equals")

each plus a weighted l1 penalty. The splitting ``X = A`` with scaled dual
``B`` gives a ridge-type linear system for X (solved in closed form by
:mod:`equal.ridge_solvers`), a soft-thresholding step for A and a running-sum
update for B.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from .errors import InvalidInputError, NumericalFailureError
from .matrix_core import ThinSVD, min_abs_symmetrize
from .penalties import PenaltySpec
from .ridge_solvers import RidgeSpectrum, build_spectrum, solve_l1, solve_l2

logger = logging.getLogger(__name__)

#: Entries with magnitude above this count as nonzero in sparsity reports.
NONZERO_TOL = 1e-10
#: Iterates larger than this are treated as divergence.
DIVERGENCE_BOUND = 1e8


class Loss(str, Enum):
    L1 = "L1"
    L2 = "L2"


METHOD_LOSS = {"equal": Loss.L1, "equals": Loss.L2}


@dataclass(frozen=True)
class AdmmConfig:
    loss: Loss = Loss.L2
    rho: float = 1.0
    max_iter: int = 1000
    tol_abs: float = 1e-6
    tol_rel: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "loss", Loss(self.loss))
        if not self.rho > 0:
            raise InvalidInputError("rho must be positive")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be at least 1")
        if not (self.tol_abs > 0 and self.tol_rel > 0):
            raise InvalidInputError("tolerances must be positive")


@dataclass
class AdmmState:
    Omega: np.ndarray
    A: np.ndarray
    B: np.ndarray
    k: int = 0
    primal_res: float = 0.0
    dual_res: float = 0.0


@dataclass
class FitResult:
    """Outcome of one penalized fit.

    ``estimate`` is the symmetric matrix returned to users. ``solution`` is
    the raw sparse iterate A; for the L1 loss it is the actual minimizer of
    the (asymmetric) problem and ``objective``/``kkt_residual`` refer to it.
    """

    estimate: np.ndarray
    iterations: int
    converged: bool
    objective: float
    kkt_residual: float
    solution: Optional[np.ndarray] = None
    state: Optional[AdmmState] = field(default=None, repr=False)
    lam: float = 0.0


@dataclass
class SolutionPath:
    lambdas: np.ndarray
    fits: List[FitResult]
    sparsity: np.ndarray


def _as_svd(S_or_svd) -> Union[ThinSVD, np.ndarray]:
    if isinstance(S_or_svd, ThinSVD):
        return S_or_svd
    return np.asarray(S_or_svd, dtype=float)


def _times_s(S_or_svd, Omega: np.ndarray) -> np.ndarray:
    """Compute ``S @ Omega`` from either a dense S or its thin factors."""
    if isinstance(S_or_svd, ThinSVD):
        U = S_or_svd.U
        return U @ (S_or_svd.taus[:, None] * (U.T @ Omega))
    return S_or_svd @ Omega


def loss_value(Omega, S_or_svd, loss=Loss.L1) -> float:
    """Unpenalized quadratic loss."""
    loss = Loss(loss)
    Omega = np.asarray(Omega, dtype=float)
    S_or_svd = _as_svd(S_or_svd)
    SO = _times_s(S_or_svd, Omega)
    quad = np.sum(Omega * SO)  # tr(Omega^T S Omega)
    if loss is Loss.L2:
        quad = 0.5 * (quad + np.sum(Omega.T * _times_s(S_or_svd, Omega.T)))
    return float(0.5 * quad - np.trace(Omega))


def objective(Omega, S_or_svd, penalty: PenaltySpec, loss=Loss.L1) -> float:
    """Penalized objective ``L(Omega) + lam * sum W_ij |Omega_ij|``."""
    return loss_value(Omega, S_or_svd, loss) + penalty.value(Omega)


def gradient(Omega, S_or_svd, loss=Loss.L1) -> np.ndarray:
    loss = Loss(loss)
    Omega = np.asarray(Omega, dtype=float)
    S_or_svd = _as_svd(S_or_svd)
    SO = _times_s(S_or_svd, Omega)
    if loss is Loss.L2:
        SO = 0.5 * (SO + _times_s(S_or_svd, Omega.T).T)
    return SO - np.eye(Omega.shape[0])


def kkt_residual(Omega, S_or_svd, penalty: PenaltySpec, loss=Loss.L1) -> float:
    """Largest violation of the subgradient optimality conditions."""
    Omega = np.asarray(Omega, dtype=float)
    G = gradient(Omega, S_or_svd, loss)
    T = penalty.lam * penalty.weight_matrix(Omega.shape[0])
    nz = Omega != 0
    viol = np.where(nz, np.abs(G + T * np.sign(Omega)), np.maximum(np.abs(G) - T, 0.0))
    return float(viol.max()) if viol.size else 0.0


def _fro(M: np.ndarray) -> float:
    v = M.ravel()
    return float(np.sqrt(v @ v))


def penalty_thresholds(penalty: PenaltySpec, p: int, rho: float):
    """Thresholds as (value, zero_diagonal).

    ``value`` is a scalar when all penalized entries share one threshold,
    which makes the clip markedly cheaper than a full matrix of bounds.
    """
    if penalty.weights is None:
        return penalty.lam / rho, not penalty.penalize_diagonal
    return penalty.lam * penalty.weight_matrix(p) / rho, False


def fit(svd: ThinSVD, penalty: PenaltySpec, cfg: AdmmConfig = AdmmConfig(),
        warm: Optional[AdmmState] = None, spectrum: Optional[RidgeSpectrum] = None) -> FitResult:
    """Run the ADMM iterations for one penalty level.

    Parameters
    ----------
    svd : ThinSVD
        Spectral factors of the sample covariance.
    penalty : PenaltySpec
        Penalty level and weights.
    cfg : AdmmConfig
        Loss, step size and stopping rule.
    warm : AdmmState, optional
        Previous (A, B) to start from; defaults to ``A = B = I``.
    spectrum : RidgeSpectrum, optional
        Precomputed weights for ``cfg.rho``; built on demand otherwise.

    Returns
    -------
    FitResult
        ``converged`` is False when ``max_iter`` is exhausted.
    """
    p = svd.p
    rho = cfg.rho
    if spectrum is None:
        spectrum = build_spectrum(svd, rho)
    elif spectrum.rho != rho:
        raise InvalidInputError("spectrum was built for a different rho")
    Theta, zero_diag = penalty_thresholds(penalty, p, rho)

    if warm is None:
        A, B = np.eye(p), np.eye(p)
    else:
        if warm.A.shape != (p, p):
            raise InvalidInputError(f"warm state is {warm.A.shape}, expected {(p, p)}")
        A, B = warm.A.copy(), warm.B.copy()
    if cfg.loss is Loss.L1:
        def solve(C):
            return solve_l1(spectrum, svd, C)
    else:
        # iterates stay exactly symmetric when started from symmetric (A, B)
        symmetric = np.array_equal(A, A.T) and np.array_equal(B, B.T)

        def solve(C):
            return solve_l2(spectrum, svd, C, symmetric=symmetric)

    Omega = A
    converged = False
    k = 0
    r_norm = s_norm = 0.0
    diag = np.arange(p)
    for k in range(1, cfg.max_iter + 1):
        C = A - B
        if rho != 1.0:
            C *= rho
        C[diag, diag] += 1.0
        Omega = solve(C)
        A_old = A
        # B_new = Omega - A_new + B equals the part of Omega + B removed by
        # soft-thresholding, i.e. its clip to [-Theta, Theta]
        V = Omega + B
        B_new = np.clip(V, -Theta, Theta)
        if zero_diag:
            B_new[diag, diag] = 0.0
        A = np.subtract(V, B_new, out=V)
        R = B_new - B  # = Omega - A
        B = B_new

        omega_norm = _fro(Omega)
        # Frobenius norm bounds every entry and propagates nan/inf
        if not omega_norm < DIVERGENCE_BOUND:
            raise NumericalFailureError(f"ADMM iterate diverged at iteration {k}")
        r_norm = _fro(R)
        A_old -= A
        s_norm = rho * _fro(A_old)
        eps_pri = cfg.tol_abs * p + cfg.tol_rel * max(omega_norm, _fro(A))
        eps_dual = cfg.tol_abs * p + cfg.tol_rel * rho * _fro(B)
        if r_norm < eps_pri and s_norm < eps_dual:
            converged = True
            break

    if not converged:
        logger.debug("ADMM hit max_iter=%d at lambda=%g", cfg.max_iter, penalty.lam)
    state = AdmmState(Omega=Omega, A=A, B=B, k=k, primal_res=float(r_norm), dual_res=float(s_norm))
    estimate = min_abs_symmetrize(A) if cfg.loss is Loss.L1 else A
    return FitResult(
        estimate=estimate,
        iterations=k,
        converged=converged,
        objective=objective(A, svd, penalty, cfg.loss),
        kkt_residual=kkt_residual(A, svd, penalty, cfg.loss),
        solution=A,
        state=state,
        lam=float(penalty.lam),
    )


def lambda_grid(S, n: int, count: int = 50, spacing: str = "log", offdiagonal: bool = False) -> np.ndarray:
    """Descending grid from ``lam_max`` down to ``lam_max * sqrt(log p / n)``.

    ``lam_max`` is the largest absolute entry of S, or of its off-diagonal
    part when ``offdiagonal`` is set (appropriate when the diagonal is left
    unpenalized).
    """
    S = np.asarray(S, dtype=float)
    if count < 2:
        raise InvalidInputError("grid needs at least two values")
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.size == 0:
        raise InvalidInputError("S must be a non-empty square matrix")
    absS = np.abs(S)
    if offdiagonal:
        absS = absS - np.diag(np.diag(absS))
    lam_max = float(absS.max())
    if lam_max == 0:
        raise InvalidInputError("sample covariance has no nonzero entries to set lambda_max")
    p = S.shape[0]
    ratio = np.sqrt(np.log(p) / n)
    if not 0 < ratio < 1:
        raise InvalidInputError(
            f"sqrt(log p / n) = {ratio:.4g} must lie in (0, 1) for a descending grid (p={p}, n={n})")
    if spacing == "log":
        grid = np.geomspace(lam_max, lam_max * ratio, count)
    elif spacing == "linear":
        grid = np.linspace(lam_max, lam_max * ratio, count)
    else:
        raise InvalidInputError(f"unknown spacing {spacing!r}")
    grid[0], grid[-1] = lam_max, lam_max * ratio
    return grid


def offdiag_sparsity(M, tol: float = NONZERO_TOL) -> float:
    """Average number of nonzero off-diagonal entries per row."""
    M = np.asarray(M)
    nz = np.abs(M) > tol
    np.fill_diagonal(nz, False)
    return float(nz.sum() / M.shape[0])


def solution_path(svd: ThinSVD, grid, penalty: PenaltySpec, cfg: AdmmConfig = AdmmConfig(),
                  warm_start: bool = True) -> SolutionPath:
    """Fit every lambda in a descending grid, warm-starting from the previous fit."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InvalidInputError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) >= 0):
        raise InvalidInputError("grid must be strictly descending")
    spectrum = build_spectrum(svd, cfg.rho)
    fits = []
    state = None
    for lam in grid:
        res = fit(svd, penalty.with_lambda(float(lam)), cfg, warm=state, spectrum=spectrum)
        fits.append(res)
        if warm_start:
            state = res.state
    sparsity = np.array([offdiag_sparsity(f.estimate) for f in fits])
    return SolutionPath(lambdas=grid, fits=fits, sparsity=sparsity)
