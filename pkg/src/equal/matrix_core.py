"""Dense matrix primitives used by the ADMM solvers.

The sample covariance is never needed explicitly by the fast solvers: the
thin SVD of the (scaled) data matrix gives ``S = U diag(taus) U^T`` with
``U`` of shape ``(p, m)``, ``m = min(n, p)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericalFailureError

#: Relative cutoff below which eigenvalues of S are clamped to exactly zero.
TAU_CLAMP = 1e-12


def as_data_matrix(X) -> np.ndarray:
    """Validate and return ``X`` as a 2-d float array of shape (n, p)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[np.newaxis, :]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise InvalidInputError(f"data matrix must be 2-d and non-empty, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("data matrix contains non-finite entries")
    return X


def _prepared(X, center: bool) -> np.ndarray:
    X = as_data_matrix(X)
    if center:
        if X.shape[0] < 2:
            raise InvalidInputError("centering requires at least two samples")
        X = X - X.mean(axis=0)
    return X


def sample_covariance(X, center: bool = False) -> np.ndarray:
    """Sample covariance with 1/n scaling.

    With ``center=False`` the data are assumed to have mean zero and the
    result is ``X^T X / n``.
    """
    Z = _prepared(X, center)
    S = (Z.T @ Z) / Z.shape[0]
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class ThinSVD:
    """Low-rank factorization ``S = U diag(taus) U^T``.

    Attributes
    ----------
    U : ndarray, shape (p, m)
        Orthonormal columns.
    taus : ndarray, shape (m,)
        Nonnegative eigenvalues of S in descending order.
    """

    U: np.ndarray
    taus: np.ndarray

    @property
    def m(self) -> int:
        return self.taus.shape[0]

    @property
    def p(self) -> int:
        return self.U.shape[0]

    def covariance(self) -> np.ndarray:
        """Reassemble the dense p x p matrix (for diagnostics and small problems)."""
        S = (self.U * self.taus) @ self.U.T
        return 0.5 * (S + S.T)

    @classmethod
    def from_covariance(cls, S) -> "ThinSVD":
        """Factor an explicit PSD matrix by dense eigendecomposition.

        Costs O(p^3); meant for small problems and tests where only S is known.
        """
        S = np.asarray(S, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise InvalidInputError("covariance must be square")
        if not np.all(np.isfinite(S)):
            raise InvalidInputError("covariance contains non-finite entries")
        try:
            w, V = np.linalg.eigh(0.5 * (S + S.T))
        except np.linalg.LinAlgError as exc:
            raise NumericalFailureError(str(exc)) from exc
        if w.size and w.min() < -1e-8 * max(1.0, abs(w).max()):
            raise InvalidInputError("covariance is not positive semidefinite")
        order = np.argsort(w)[::-1]
        return cls(U=V[:, order], taus=_clamp(w[order]))


def _clamp(taus: np.ndarray) -> np.ndarray:
    taus = np.maximum(taus, 0.0)
    if taus.size and taus[0] > 0:
        taus = np.where(taus < TAU_CLAMP * taus.max(), 0.0, taus)
    return taus


def thin_svd_gram(X, center: bool = False) -> ThinSVD:
    """Thin SVD of the data giving the spectral factors of its sample covariance.

    Works on ``X / sqrt(n)`` so the cost is O(min(n, p) n p); the p x p
    covariance is never formed.
    """
    Z = _prepared(X, center)
    Z = Z / np.sqrt(Z.shape[0])
    try:
        _, sing, Vt = np.linalg.svd(Z, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"SVD did not converge: {exc}") from exc
    with np.errstate(over="ignore"):
        taus = sing**2
    if not np.all(np.isfinite(taus)):
        raise NumericalFailureError("covariance eigenvalues overflow; rescale the data")
    return ThinSVD(U=Vt.T, taus=_clamp(taus))


def soft_threshold(M, T) -> np.ndarray:
    """Entrywise ``sign(M) * max(|M| - T, 0)``; ``T`` may be a scalar or a matrix."""
    M = np.asarray(M, dtype=float)
    T = np.asarray(T, dtype=float)
    if T.ndim and T.shape != M.shape:
        raise InvalidInputError(f"threshold shape {T.shape} does not match {M.shape}")
    if np.any(T < 0):
        raise InvalidInputError("thresholds must be nonnegative")
    return _soft(M, T)


def _soft(M: np.ndarray, T) -> np.ndarray:
    # unchecked variant for inner loops; M - clip(M) is exact and avoids sign/abs temporaries
    return M - np.clip(M, -T, T)


def min_abs_symmetrize(A) -> np.ndarray:
    """Symmetrize by keeping, for each pair (i, j), the entry of smaller magnitude.

    On ties ``|A_ij| == |A_ji|`` the lower-left entry ``A_ji`` wins for
    position (i, j) and, by the same rule, for (j, i).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InvalidInputError("min_abs_symmetrize needs a square matrix")
    At = A.T
    out = np.where(np.abs(A) < np.abs(At), A, At)
    # the upper triangle already encodes the tie rule; mirror it
    upper = np.triu(out, 1)
    return upper + upper.T + np.diag(np.diag(A))


def kron(A, B) -> np.ndarray:
    """Kronecker product. Only used to build small dense reference systems."""
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))
