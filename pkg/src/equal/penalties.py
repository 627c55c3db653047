"""Penalty specifications, SCAD/MCP derivatives and one-step LLA refitting.

Nonconvex penalties are handled by the local linear approximation: the
derivative of the penalty at an initial (LASSO) estimate becomes an entrywise
weight on a plain l1 problem, which the ADMM solver handles through its
weighted soft-thresholding step.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InvalidInputError


class Family(str, Enum):
    LASSO = "lasso"
    SCAD = "scad"
    MCP = "mcp"


DEFAULT_TAU = {Family.LASSO: None, Family.SCAD: 3.7, Family.MCP: 2.0}


@dataclass(frozen=True)
class PenaltySpec:
    """Entrywise penalty ``lam * sum_ij W_ij |Omega_ij|``.

    Attributes
    ----------
    lam : float
        Penalty level.
    family : Family
        Recorded for bookkeeping; the solver itself only sees ``lam`` and
        ``weights``. SCAD/MCP enter through :func:`lla_weights`.
    tau : float, optional
        Concavity parameter (SCAD default 3.7, MCP default 2). Ignored for LASSO.
    weights : ndarray, optional
        Nonnegative p x p weight matrix; all ones when omitted.
    penalize_diagonal : bool
        When false the diagonal weights are forced to zero.
    """

    lam: float
    family: Family = Family.LASSO
    tau: Optional[float] = None
    weights: Optional[np.ndarray] = None
    penalize_diagonal: bool = True

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not self.lam >= 0:
            raise InvalidInputError(f"lambda must be nonnegative, got {self.lam}")
        if self.tau is None:
            object.__setattr__(self, "tau", DEFAULT_TAU[self.family])
        _check_tau(self.family, self.tau)
        if self.weights is not None:
            W = np.asarray(self.weights, dtype=float)
            if W.ndim != 2 or W.shape[0] != W.shape[1]:
                raise InvalidInputError("weights must be a square matrix")
            if np.any(W < 0) or not np.all(np.isfinite(W)):
                raise InvalidInputError("weights must be finite and nonnegative")
            object.__setattr__(self, "weights", W)

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return replace(self, lam=lam)

    def weight_matrix(self, p: int) -> np.ndarray:
        """Effective p x p weights, with the diagonal rule applied."""
        if self.weights is None:
            W = np.ones((p, p))
        else:
            if self.weights.shape != (p, p):
                raise InvalidInputError(f"weights are {self.weights.shape}, expected {(p, p)}")
            W = self.weights.copy()
        if not self.penalize_diagonal:
            np.fill_diagonal(W, 0.0)
        return W

    def value(self, Omega) -> float:
        Omega = np.asarray(Omega)
        return float(self.lam * np.sum(self.weight_matrix(Omega.shape[0]) * np.abs(Omega)))


def _check_tau(family: Family, tau) -> None:
    if family is Family.SCAD and not tau > 2:
        raise InvalidInputError(f"SCAD needs tau > 2, got {tau}")
    if family is Family.MCP and not tau > 1:
        raise InvalidInputError(f"MCP needs tau > 1, got {tau}")


def scad_derivative(x, lam: float, tau: float = 3.7):
    """Derivative of the SCAD penalty with respect to ``|x|``."""
    a = np.abs(np.asarray(x, dtype=float))
    out = np.where(a <= lam, lam, np.maximum(tau * lam - a, 0.0) / (tau - 1))
    return out if out.ndim else float(out)


def mcp_derivative(x, lam: float, tau: float = 2.0):
    """Derivative of the MCP penalty with respect to ``|x|``."""
    a = np.abs(np.asarray(x, dtype=float))
    out = np.maximum(lam - a / tau, 0.0)
    return out if out.ndim else float(out)


def lla_weights(initial, family, lam: float, tau: Optional[float] = None,
                penalize_diagonal: bool = False) -> np.ndarray:
    """Weights ``W_ij = p'_lam(|initial_ij|) / lam`` for a one-step LLA refit.

    Multiplying back by ``lam`` in the thresholding step reproduces the
    linearized penalty ``sum_ij p'_lam(initial_ij) |Omega_ij|`` exactly.
    """
    family = Family(family)
    if tau is None:
        tau = DEFAULT_TAU[family]
    _check_tau(family, tau)
    initial = np.asarray(initial, dtype=float)
    if family is Family.LASSO:
        W = np.ones_like(initial)
    else:
        if not lam > 0:
            raise InvalidInputError("LLA weights for SCAD/MCP need lambda > 0")
        deriv = scad_derivative if family is Family.SCAD else mcp_derivative
        W = np.asarray(deriv(initial, lam, tau)) / lam
    if not penalize_diagonal:
        np.fill_diagonal(W, 0.0)
    return W


def lla_refit(svd, initial_fit, family, lam: float, tau: Optional[float] = None, cfg=None):
    """One weighted ADMM solve using LLA weights built from ``initial_fit``.

    The diagonal is left unpenalized, matching a penalty summed over i != j.
    The refit is warm-started from the initial fit's ADMM state.
    """
    from .admm import AdmmConfig, fit

    cfg = cfg or AdmmConfig()
    W = lla_weights(initial_fit.estimate, family, lam, tau)
    family = Family(family)
    penalty = PenaltySpec(lam=lam, family=family, tau=tau, weights=W, penalize_diagonal=False)
    return fit(svd, penalty, cfg, warm=initial_fit.state)
