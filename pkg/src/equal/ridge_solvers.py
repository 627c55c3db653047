"""Closed-form solutions of the ridge-shifted systems solved in every ADMM step.

Given ``S = U diag(tau) U^T`` from :func:`equal.matrix_core.thin_svd_gram`,

* ``S @ X + rho * X = C`` is solved by a Woodbury-type low-rank correction,
* ``(S @ X + X @ S) / 2 + rho * X = C`` (a Sylvester equation, i.e. a
  Kronecker-sum system in vec form) is solved with two one-sided
  corrections plus a Hadamard-weighted two-sided correction.

Both solvers only multiply by ``U`` (p x m) and m x m matrices, so one solve
costs O(m p^2); no p x p inverse or eigendecomposition is ever formed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .matrix_core import ThinSVD, kron

#: Largest dimension for which the p^2 x p^2 reference inverse may be built.
KRON_MAX_P = 12


@dataclass(frozen=True)
class RidgeSpectrum:
    """Step-size dependent spectral weights.

    ``lam1 = tau / (tau + rho)``, ``lam2 = tau / (tau + 2 rho)`` and
    ``lam3[i, j] = tau_i tau_j (tau_i + tau_j + 4 rho) /
    ((tau_i + 2 rho)(tau_j + 2 rho)(tau_i + tau_j + 2 rho))``.
    """

    rho: float
    lam1: np.ndarray
    lam2: np.ndarray
    lam3: np.ndarray


def build_spectrum(svd: ThinSVD, rho: float) -> RidgeSpectrum:
    if not rho > 0:
        raise InvalidInputError(f"rho must be positive, got {rho}")
    t = np.asarray(svd.taus, dtype=float)
    ti, tj = t[:, None], t[None, :]
    lam3 = ti * tj * (ti + tj + 4 * rho) / ((ti + 2 * rho) * (tj + 2 * rho) * (ti + tj + 2 * rho))
    return RidgeSpectrum(
        rho=float(rho),
        lam1=t / (t + rho),
        lam2=t / (t + 2 * rho),
        lam3=lam3,
    )


def ridge_inverse_l1(svd: ThinSVD, rho: float) -> np.ndarray:
    """Dense ``(S + rho I)^{-1}`` from the low-rank identity."""
    spec = build_spectrum(svd, rho)
    U = svd.U
    return (np.eye(svd.p) - (U * spec.lam1) @ U.T) / rho


def ridge_inverse_l2_kron(svd: ThinSVD, rho: float) -> np.ndarray:
    """Dense inverse of ``(S kron I + I kron S) / 2 + rho I`` (p^2 x p^2).

    Assembled term by term with explicit Kronecker products, so it is only
    usable for tiny ``p``; it exists to cross-check :func:`solve_l2`.
    """
    p = svd.p
    if p > KRON_MAX_P:
        raise InvalidInputError(f"p={p} too large for the Kronecker-form inverse (max {KRON_MAX_P})")
    spec = build_spectrum(svd, rho)
    U = svd.U
    I = np.eye(p)
    P2 = (U * spec.lam2) @ U.T
    UU = kron(U, U)
    # vec() is column-major, so vec(lam3) is the Fortran-order ravel
    core = (UU * spec.lam3.ravel(order="F")) @ UU.T
    return (np.eye(p * p) - kron(P2, I) - kron(I, P2) + core) / rho


def _check(svd: ThinSVD, C) -> np.ndarray:
    C = np.asarray(C, dtype=float)
    p = svd.p
    if C.shape != (p, p):
        raise InvalidInputError(f"right-hand side must be {p}x{p}, got {C.shape}")
    return C


def solve_l1(spec: RidgeSpectrum, svd: ThinSVD, C) -> np.ndarray:
    """Solve ``S X + rho X = C``.

    The result is not symmetric in general, even for symmetric ``C``.
    """
    C = _check(svd, C)
    U = svd.U
    X = U @ (spec.lam1[:, None] * (U.T @ C))
    np.subtract(C, X, out=X)
    if spec.rho != 1.0:
        X /= spec.rho
    return X


def solve_l2(spec: RidgeSpectrum, svd: ThinSVD, C, symmetric: bool = False) -> np.ndarray:
    """Solve ``(S X + X S) / 2 + rho X = C``.

    With ``symmetric=True`` the caller asserts ``C == C.T``; the two one-sided
    corrections are then transposes of each other, which halves the number
    of p x p x m products and makes the result exactly symmetric.
    """
    C = _check(svd, C)
    U = svd.U
    UtC = U.T @ C
    UtCU = UtC @ U
    if symmetric:
        K = spec.lam2[:, None] * UtC - 0.5 * ((spec.lam3 * UtCU) @ U.T)
        UK = U @ K
        X = UK + UK.T  # exactly symmetric: IEEE addition commutes
        np.subtract(C, X, out=X)
        if spec.rho != 1.0:
            X /= spec.rho
        return X
    CU = C @ U
    X = C - (CU * spec.lam2) @ U.T - U @ (spec.lam2[:, None] * UtC) + U @ (spec.lam3 * UtCU) @ U.T
    return X / spec.rho
