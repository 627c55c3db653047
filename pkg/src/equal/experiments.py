"""Simulation harness: precision-matrix models, sampling, loss metrics,
cross-validation and timing.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .admm import METHOD_LOSS, AdmmConfig, Loss, lambda_grid, loss_value, solution_path
from .baseline_glasso import glasso_path, neg_loglik
from .errors import InvalidInputError, NumericalFailureError
from .matrix_core import as_data_matrix, sample_covariance, thin_svd_gram
from .penalties import PenaltySpec

METHODS = ("equal", "equals", "glasso")


@dataclass
class PrecisionModel:
    kind: str
    p: int
    omega: np.ndarray
    sigma: np.ndarray


def _case1_matrix(p: int) -> np.ndarray:
    idx = np.arange(p)
    return 0.5 ** np.abs(idx[:, None] - idx[None, :])


def gen_case1(p: int) -> PrecisionModel:
    """Asymptotically sparse model ``omega_ij = 0.5^|i-j|``."""
    if p < 1:
        raise InvalidInputError("p must be positive")
    omega = _case1_matrix(p)
    return PrecisionModel("case1", p, omega, np.linalg.inv(omega))


def gen_case2(p: int) -> PrecisionModel:
    """Tridiagonal model, the exact inverse of the Case 1 matrix."""
    if p < 2:
        raise InvalidInputError("case 2 needs p >= 2")
    omega = np.diag(np.full(p, 5.0)) - 2.0 * (np.eye(p, k=1) + np.eye(p, k=-1))
    omega[0, 0] = omega[-1, -1] = 4.0
    return PrecisionModel("case2", p, omega / 3.0, _case1_matrix(p))


BLOCK = np.full((5, 5), 0.5) + 0.5 * np.eye(5)


def gen_case3(p: int, seed=None) -> PrecisionModel:
    """Block-diagonal model ``diag(w_1 B, ..., w_{p/5} B)``.

    ``B`` has unit diagonal and 0.5 off the diagonal; the weights are drawn
    from U[0.5, 5] (p/5 draws in block order) and rescaled to mean one.
    """
    if p < 5 or p % 5:
        raise InvalidInputError(f"case 3 needs p divisible by 5, got {p}")
    rng = np.random.default_rng(seed)
    w = rng.uniform(0.5, 5.0, size=p // 5)
    w = w / w.mean()
    omega = np.kron(np.diag(w), BLOCK)
    sigma = np.kron(np.diag(1.0 / w), np.linalg.inv(BLOCK))
    return PrecisionModel("case3", p, omega, sigma)


def make_model(case, p: int, seed=None) -> PrecisionModel:
    case = str(case).lower().replace("case", "")
    if case == "1":
        return gen_case1(p)
    if case == "2":
        return gen_case2(p)
    if case == "3":
        return gen_case3(p, seed)
    raise InvalidInputError(f"unknown case {case!r}")


def sample_gaussian(model: PrecisionModel, n: int, seed=None) -> np.ndarray:
    """Draw n rows from N(0, sigma) through the Cholesky factor of sigma."""
    if n < 1:
        raise InvalidInputError("n must be positive")
    try:
        L = np.linalg.cholesky(model.sigma)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError(f"covariance factorization failed: {exc}") from exc
    Z = np.random.default_rng(seed).standard_normal((n, model.p))
    return Z @ L.T


@dataclass
class LossReport:
    loss1: float
    loss2: float
    loss3: Optional[float]
    loss4: float
    min_eigen: float

    @property
    def loss3_defined(self) -> bool:
        return self.loss3 is not None

    def as_dict(self) -> Dict[str, Optional[float]]:
        return asdict(self)


def losses(model: PrecisionModel, estimate) -> LossReport:
    """Frobenius, spectral, normalized Stein and quadratic losses.

    The Stein loss needs ``log det`` of the estimate and is reported as
    ``None`` unless the estimate is positive definite.
    """
    est = np.asarray(estimate, dtype=float)
    omega, sigma, p = model.omega, model.sigma, model.p
    if est.shape != omega.shape:
        raise InvalidInputError(f"estimate is {est.shape}, expected {omega.shape}")
    D = omega - est
    min_eigen = float(np.linalg.eigvalsh(0.5 * (est + est.T))[0])

    loss3 = None
    if min_eigen > 0:
        SE = sigma @ est
        _, logdet_sigma = np.linalg.slogdet(sigma)
        _, logdet_est = np.linalg.slogdet(est)
        stein = np.trace(SE) - (logdet_sigma + logdet_est) - p
        loss3 = math.sqrt(max(stein, 0.0) / p)
    quad = 0.5 * np.sum(est * (sigma @ est)) - np.trace(est) + 0.5 * np.trace(omega)
    return LossReport(
        loss1=float(np.linalg.norm(D) / math.sqrt(p)),
        loss2=float(np.linalg.norm(D, 2)),
        loss3=loss3,
        loss4=math.sqrt(max(quad, 0.0) / p),
        min_eigen=min_eigen,
    )


@dataclass
class CvResult:
    best_lambda: float
    cv_curve: np.ndarray
    fold_count: int
    grid: np.ndarray


def fold_indices(n: int, k: int, seed=None) -> List[np.ndarray]:
    """Shuffle row indices with ``seed`` and cut them into k contiguous folds."""
    if k < 2:
        raise InvalidInputError("need at least two folds")
    if k > n:
        raise InvalidInputError(f"cannot make {k} folds from {n} rows")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def path_estimates(X, grid, method: str, penalty: PenaltySpec, cfg: AdmmConfig,
                   center: bool = False):
    """Solution path for any method; returns the list of fits."""
    if method == "glasso":
        S = sample_covariance(X, center)
        return glasso_path(S, grid, penalty, cfg).fits
    cfg = method_config(method, cfg)
    return solution_path(thin_svd_gram(X, center), grid, penalty, cfg).fits


def method_config(method: str, cfg: AdmmConfig) -> AdmmConfig:
    if method not in METHOD_LOSS:
        raise InvalidInputError(f"unknown method {method!r}; expected one of {METHODS}")
    return replace(cfg, loss=METHOD_LOSS[method])


def heldout_score(estimate, S_test, method: str) -> float:
    if method == "glasso":
        return neg_loglik(estimate, S_test)
    return loss_value(estimate, S_test, METHOD_LOSS[method])


def cross_validate(X, grid, k: int = 5, method: str = "equals", cfg: AdmmConfig = AdmmConfig(),
                   penalty: Optional[PenaltySpec] = None, seed=None, center: bool = False,
                   n_jobs: int = 1) -> CvResult:
    """k-fold CV scoring each lambda by the held-out loss of the method itself.

    The held-out criterion is the quadratic loss evaluated at the held-out
    sample covariance (negative log-likelihood for glasso). Ties go to the
    larger lambda. With ``n_jobs > 1`` folds are fitted in a thread pool;
    the result does not depend on ``n_jobs``.
    """
    X = as_data_matrix(X)
    grid = np.asarray(grid, dtype=float)
    n = X.shape[0]
    if method not in METHODS:
        raise InvalidInputError(f"unknown method {method!r}")
    folds = fold_indices(n, k, seed)
    if n - max(len(f) for f in folds) < 2:
        raise InvalidInputError("every training split needs at least two rows")
    penalty = penalty or PenaltySpec(lam=0.0)

    def score_fold(test):
        train = np.setdiff1d(np.arange(n), test)
        fits = path_estimates(X[train], grid, method, penalty, cfg, center)
        S_test = sample_covariance(X[test], center and len(test) > 1)
        return [heldout_score(f.estimate, S_test, method) for f in fits]

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            scores = np.array(list(pool.map(score_fold, folds)))
    else:
        scores = np.array([score_fold(test) for test in folds])
    curve = scores.mean(axis=0)
    best = int(np.argmin(curve))  # first minimum = largest lambda on a descending grid
    return CvResult(best_lambda=float(grid[best]), cv_curve=curve, fold_count=k, grid=grid)


def simulate(case, p: int, n: int, reps: int, methods: Sequence[str] = ("equal", "equals"),
             seed: int = 0, grid_size: int = 50, folds: int = 5, cfg: AdmmConfig = AdmmConfig(),
             penalize_diagonal: bool = True, n_jobs: int = 1) -> List[dict]:
    """Replicated CV-tuned estimation; one row of losses per (replication, method)."""
    rows = []
    penalty = PenaltySpec(lam=0.0, penalize_diagonal=penalize_diagonal)
    for rep in range(reps):
        rep_seed = np.random.SeedSequence([seed, rep])
        model_seed, data_seed, cv_seed = (int(s.generate_state(1)[0]) for s in rep_seed.spawn(3))
        model = make_model(case, p, model_seed)
        X = sample_gaussian(model, n, data_seed)
        # with an unpenalized diagonal only off-diagonal entries can be zeroed
        grid = lambda_grid(sample_covariance(X), n, grid_size, offdiagonal=not penalize_diagonal)
        for method in methods:
            cv = cross_validate(X, grid, folds, method, cfg, penalty, seed=cv_seed, n_jobs=n_jobs)
            best = int(np.flatnonzero(grid == cv.best_lambda)[0])
            # refit along the path so the chosen lambda benefits from warm starts
            fits = path_estimates(X, grid[: best + 1], method, penalty, cfg)
            rep_losses = losses(model, fits[-1].estimate)
            rows.append({
                "case": model.kind, "p": p, "n": n, "rep": rep, "method": method,
                "lambda": cv.best_lambda, "converged": bool(fits[-1].converged),
                **rep_losses.as_dict(),
            })
    return rows


def bench_timing(cases: Iterable = ("case1",), p_list: Iterable[int] = (100, 200), n: int = 200,
                 grid_size: int = 50, methods: Sequence[str] = ("equal", "equals"), reps: int = 1,
                 seed: int = 0, cfg: AdmmConfig = AdmmConfig(), warmup: bool = True) -> List[dict]:
    """Wall-clock seconds to compute a full solution path, mean and std over reps.

    Timed region covers everything after data generation: covariance or thin
    SVD, the lambda grid and the path itself.
    """
    rows = []
    penalty = PenaltySpec(lam=0.0)
    for case in cases:
        for p in p_list:
            model = make_model(case, p, seed)
            X = sample_gaussian(model, n, seed)
            for method in methods:
                def run():
                    grid = lambda_grid(sample_covariance(X), n, grid_size)
                    return path_estimates(X, grid, method, penalty, cfg)

                if warmup:
                    run()
                times = []
                for _ in range(reps):
                    t0 = time.perf_counter()
                    fits = run()
                    times.append(time.perf_counter() - t0)
                rows.append({
                    "case": model.kind, "p": p, "n": n, "method": method, "reps": reps,
                    "mean_seconds": float(np.mean(times)),
                    "std_seconds": float(np.std(times, ddof=1)) if reps > 1 else 0.0,
                    "iterations": int(sum(f.iterations for f in fits)),
                })
    return rows
