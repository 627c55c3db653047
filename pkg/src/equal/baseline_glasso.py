"""Graphical lasso solved by ADMM, used as an accuracy and timing baseline.

The X-update solves ``rho X - X^{-1} = M`` with ``M = rho (A - B) - S``;
in the eigenbasis of M this decouples into scalar quadratics with the
positive root ``(a + sqrt(a^2 + 4 rho)) / (2 rho)``. Each iteration therefore
needs a full p x p eigendecomposition, O(p^3).
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from .admm import AdmmConfig, AdmmState, FitResult, SolutionPath, penalty_thresholds, offdiag_sparsity
from .errors import InvalidInputError, NumericalFailureError
from .penalties import PenaltySpec


def eigen_map(a, rho: float):
    """Positive root x of ``rho x - 1/x = a``."""
    a = np.asarray(a, dtype=float)
    return (a + np.sqrt(a * a + 4 * rho)) / (2 * rho)


def glasso_omega_update(M, rho: float) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if not rho > 0:
        raise InvalidInputError("rho must be positive")
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError("M must be square")
    if np.abs(M - M.T).max(initial=0.0) > 1e-8:
        raise InvalidInputError("M must be symmetric")
    try:
        a, Q = np.linalg.eigh(0.5 * (M + M.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"eigendecomposition failed: {exc}") from exc
    X = (Q * eigen_map(a, rho)) @ Q.T
    return 0.5 * (X + X.T)


def neg_loglik(Omega, S) -> float:
    """``tr(S Omega) - log det Omega``; +inf when Omega is not positive definite."""
    Omega = np.asarray(Omega, dtype=float)
    try:
        L = np.linalg.cholesky(0.5 * (Omega + Omega.T))
    except np.linalg.LinAlgError:
        return float("inf")
    logdet = 2.0 * np.log(np.diag(L)).sum()
    return float(np.sum(np.asarray(S) * Omega.T) - logdet)


def glasso_objective(Omega, S, penalty: PenaltySpec) -> float:
    return neg_loglik(Omega, S) + penalty.value(Omega)


def glasso_kkt_residual(Omega, S, penalty: PenaltySpec) -> float:
    Omega = np.asarray(Omega, dtype=float)
    try:
        G = np.asarray(S) - np.linalg.inv(Omega)
    except np.linalg.LinAlgError:
        return float("inf")
    T = penalty.lam * penalty.weight_matrix(Omega.shape[0])
    viol = np.where(Omega != 0, np.abs(G + T * np.sign(Omega)), np.maximum(np.abs(G) - T, 0.0))
    return float(viol.max())


def glasso_fit(S, penalty, cfg: AdmmConfig = AdmmConfig(), warm: Optional[AdmmState] = None) -> FitResult:
    """ADMM for ``tr(S X) - log det X + lam * sum W_ij |X_ij|``.

    ``penalty`` may be a :class:`PenaltySpec` or a bare lambda. The stopping
    rule is the one used by :func:`equal.admm.fit`; ``cfg.loss`` is ignored.
    """
    if not isinstance(penalty, PenaltySpec):
        penalty = PenaltySpec(lam=float(penalty))
    S = np.asarray(S, dtype=float)
    p = S.shape[0]
    rho = cfg.rho
    Theta, zero_diag = penalty_thresholds(penalty, p, rho)
    diag = np.arange(p)
    if warm is None:
        A, B = np.eye(p), np.eye(p)
    else:
        A, B = warm.A.copy(), warm.B.copy()

    Omega = A
    converged = False
    k = 0
    r_norm = s_norm = 0.0
    for k in range(1, cfg.max_iter + 1):
        Omega = glasso_omega_update(rho * (A - B) - S, rho)
        A_old = A
        V = Omega + B
        # B_new = clip(V) so that A = soft(V) = V - B_new
        B_new = np.clip(V, -Theta, Theta)
        if zero_diag:
            B_new[diag, diag] = 0.0
        A = V - B_new
        r_norm = np.linalg.norm(B_new - B)
        B = B_new
        if not np.all(np.isfinite(Omega)):
            raise NumericalFailureError(f"glasso ADMM iterate diverged at iteration {k}")
        s_norm = rho * np.linalg.norm(A - A_old)
        eps_pri = cfg.tol_abs * p + cfg.tol_rel * max(np.linalg.norm(Omega), np.linalg.norm(A))
        eps_dual = cfg.tol_abs * p + cfg.tol_rel * rho * np.linalg.norm(B)
        if r_norm < eps_pri and s_norm < eps_dual:
            converged = True
            break

    state = AdmmState(Omega=Omega, A=A, B=B, k=k, primal_res=float(r_norm), dual_res=float(s_norm))
    return FitResult(
        estimate=A,
        iterations=k,
        converged=converged,
        objective=glasso_objective(A, S, penalty),
        kkt_residual=glasso_kkt_residual(A, S, penalty),
        solution=A,
        state=state,
        lam=float(penalty.lam),
    )


def glasso_path(S, grid, penalty: PenaltySpec, cfg: AdmmConfig = AdmmConfig(),
                warm_start: bool = True) -> SolutionPath:
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) >= 0):
        raise InvalidInputError("grid must be strictly descending")
    fits, state = [], None
    for lam in grid:
        res = glasso_fit(S, penalty.with_lambda(float(lam)), cfg, warm=state)
        fits.append(res)
        if warm_start:
            state = res.state
    return SolutionPath(lambdas=grid, fits=fits,
                        sparsity=np.array([offdiag_sparsity(f.estimate) for f in fits]))
