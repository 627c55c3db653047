import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from equal.admm import AdmmConfig, fit, lambda_grid, objective
from equal.errors import InvalidInputError
from equal.experiments import gen_case1, losses, sample_gaussian
from equal.matrix_core import sample_covariance, thin_svd_gram
from equal.penalties import (Family, PenaltySpec, lla_refit, lla_weights, mcp_derivative,
                             scad_derivative)

TIGHT = dict(tol_abs=1e-10, tol_rel=1e-10, max_iter=50000)


def test_scad_examples():
    assert scad_derivative(0.5, 1.0, 3.7) == 1.0
    assert scad_derivative(2.0, 1.0, 3.7) == pytest.approx(1.7 / 2.7, abs=1e-15)
    assert scad_derivative(5.0, 1.0, 3.7) == 0.0
    assert scad_derivative(-2.0, 1.0) == scad_derivative(2.0, 1.0)


def test_mcp_examples():
    assert mcp_derivative(0.2, 1.0, 2.0) == pytest.approx(0.9, abs=1e-15)
    assert mcp_derivative(1.0, 1.0, 2.0) == 0.5
    assert mcp_derivative(3.0, 1.0, 2.0) == 0.0


def test_derivatives_vectorize():
    x = np.array([[0.5, 2.0], [5.0, -0.1]])
    out = scad_derivative(x, 1.0)
    assert out.shape == x.shape
    assert out[1, 1] == 1.0


@pytest.mark.parametrize("lam,tau", [(1.0, 3.7), (0.3, 2.5), (2.0, 10.0)])
def test_scad_continuous_at_breakpoints(lam, tau):
    for b in (lam, tau * lam):
        x = b + 1e-6 * np.arange(-50, 51)
        assert np.abs(np.diff(scad_derivative(x, lam, tau))).max() <= 1e-5


@pytest.mark.parametrize("lam,tau", [(1.0, 2.0), (0.3, 1.5)])
def test_mcp_continuous_at_breakpoint(lam, tau):
    x = tau * lam + 1e-6 * np.arange(-50, 51)
    assert np.abs(np.diff(mcp_derivative(x, lam, tau))).max() <= 1e-5


@settings(max_examples=200, deadline=None)
@given(x=st.floats(0, 50), y=st.floats(0, 50), lam=st.floats(0.01, 5),
       tau=st.floats(2.01, 10))
def test_derivatives_nonincreasing_and_bounded(x, y, lam, tau):
    lo, hi = min(x, y), max(x, y)
    for d in (scad_derivative, mcp_derivative):
        a, b = d(lo, lam, tau), d(hi, lam, tau)
        assert b <= a + 1e-12
        assert 0.0 <= b and a <= lam


def test_penalty_spec_validation():
    with pytest.raises(InvalidInputError):
        PenaltySpec(-0.1)
    with pytest.raises(InvalidInputError):
        PenaltySpec(1.0, family="scad", tau=2.0)
    with pytest.raises(InvalidInputError):
        PenaltySpec(1.0, family="mcp", tau=1.0)
    with pytest.raises(InvalidInputError):
        PenaltySpec(1.0, weights=-np.ones((2, 2)))
    assert PenaltySpec(1.0, family="scad").tau == 3.7
    assert PenaltySpec(1.0, family="mcp").tau == 2.0


def test_penalty_value_and_diagonal_rule():
    M = np.array([[1.0, -2.0], [3.0, 4.0]])
    assert PenaltySpec(0.5).value(M) == 5.0
    assert PenaltySpec(0.5, penalize_diagonal=False).value(M) == 2.5
    W = np.array([[0.0, 1.0], [2.0, 0.0]])
    assert PenaltySpec(1.0, weights=W).value(M) == 8.0


def test_lla_weight_examples():
    assert np.array_equal(lla_weights(np.zeros((3, 3)), "scad", 0.4, penalize_diagonal=True),
                          np.ones((3, 3)))
    init = np.full((2, 2), 5 * 0.4)
    assert not lla_weights(init, "scad", 0.4).any()
    W = lla_weights(np.zeros((3, 3)), "mcp", 0.4)
    assert np.array_equal(np.diag(W), np.zeros(3))
    assert W[0, 1] == 1.0


def test_lla_weights_need_positive_lambda():
    with pytest.raises(InvalidInputError):
        lla_weights(np.eye(2), "scad", 0.0)
    with pytest.raises(InvalidInputError):
        lla_weights(np.eye(2), Family.MCP, 0.0)
    assert lla_weights(np.eye(2), "lasso", 0.0).shape == (2, 2)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.floats(0.01, 2), fam=st.sampled_from(["scad", "mcp"]))
def test_lla_weights_in_unit_interval(seed, lam, fam):
    init = np.random.default_rng(seed).normal(scale=2 * lam, size=(5, 5))
    W = lla_weights(init, fam, lam)
    assert W.min() >= 0.0 and W.max() <= 1.0


def test_lla_weights_reproduce_linearized_penalty():
    rng = np.random.default_rng(3)
    init, Om = rng.standard_normal((2, 6, 6))
    lam = 0.7
    W = lla_weights(init, "scad", lam)
    direct = sum(scad_derivative(init[i, j], lam) * abs(Om[i, j])
                 for i in range(6) for j in range(6) if i != j)
    assert PenaltySpec(lam, weights=W).value(Om) == pytest.approx(direct, rel=1e-12)


def _lasso(seed, p=10, n=40, lam=0.15, loss="L2", diag=False):
    X = np.random.default_rng(seed).standard_normal((n, p))
    svd = thin_svd_gram(X)
    cfg = AdmmConfig(loss=loss, **TIGHT)
    res = fit(svd, PenaltySpec(lam, penalize_diagonal=diag), cfg)
    return svd, cfg, res


@pytest.mark.parametrize("loss", ["L1", "L2"])
def test_lasso_refit_is_self_consistent(loss):
    svd, cfg, init = _lasso(0, loss=loss)
    ref = lla_refit(svd, init, "lasso", 0.15, cfg=cfg)
    assert abs(ref.objective - init.objective) <= 1e-6


@pytest.mark.parametrize("family", ["scad", "mcp"])
def test_refit_lowers_linearized_objective(family):
    svd, cfg, init = _lasso(1)
    W = lla_weights(init.estimate, family, 0.15)
    lin = PenaltySpec(0.15, weights=W, penalize_diagonal=False)
    ref = lla_refit(svd, init, family, 0.15, cfg=cfg)
    assert ref.converged
    S = svd.covariance()
    assert objective(ref.solution, S, lin, "L2") <= objective(init.solution, S, lin, "L2") + 1e-10


def test_mcp_at_grid_top_is_diagonal():
    X = np.random.default_rng(2).standard_normal((30, 8))
    svd, S = thin_svd_gram(X), sample_covariance(X)
    lam = lambda_grid(S, 30, 10, offdiagonal=True)[0]
    init = fit(svd, PenaltySpec(lam, penalize_diagonal=False))
    ref = lla_refit(svd, init, "mcp", lam)
    off = ref.estimate - np.diag(np.diag(ref.estimate))
    assert not off.any()


def test_scad_refit_not_worse_on_case1():
    model = gen_case1(50)
    X = sample_gaussian(model, 50, 11)
    svd = thin_svd_gram(X)
    lam = lambda_grid(sample_covariance(X), 50, 10, offdiagonal=True)[5]
    init = fit(svd, PenaltySpec(lam, penalize_diagonal=False))
    ref = lla_refit(svd, init, "scad", lam)
    assert losses(model, ref.estimate).loss1 <= losses(model, init.estimate).loss1 + 0.02
