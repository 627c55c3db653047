import numpy as np
import pytest

from equal.errors import InvalidInputError
from equal.matrix_core import ThinSVD, thin_svd_gram
from equal.ridge_solvers import (build_spectrum, ridge_inverse_l1, ridge_inverse_l2_kron, solve_l1,
                                 solve_l2)

from oracles import covariance_loops, hessian, unvec, vec


def _svd_from_taus(taus):
    taus = np.asarray(taus, dtype=float)
    return ThinSVD(U=np.eye(taus.size), taus=taus)


def _instance(seed, n, p):
    X = np.random.default_rng(seed).standard_normal((n, p))
    return thin_svd_gram(X), covariance_loops(X)


def test_spectrum_scalar():
    spec = build_spectrum(_svd_from_taus([2.0]), 1.0)
    np.testing.assert_allclose(spec.lam1, [2 / 3])
    np.testing.assert_allclose(spec.lam2, [1 / 2])
    np.testing.assert_allclose(spec.lam3, [[1 / 3]])


def test_spectrum_zero_taus():
    spec = build_spectrum(_svd_from_taus([0.0, 0.0]), 0.7)
    assert not spec.lam1.any() and not spec.lam2.any() and not spec.lam3.any()


def test_spectrum_two_taus():
    spec = build_spectrum(_svd_from_taus([1.0, 3.0]), 0.5)
    np.testing.assert_allclose(spec.lam1, [2 / 3, 6 / 7])
    assert spec.lam3[0, 1] == pytest.approx(0.45)
    assert spec.lam3[1, 0] == pytest.approx(0.45)


@pytest.mark.parametrize("rho", [0.0, -1.0])
def test_spectrum_rejects_bad_rho(rho):
    with pytest.raises(InvalidInputError):
        build_spectrum(_svd_from_taus([1.0]), rho)


@pytest.mark.parametrize("seed", range(5))
def test_spectrum_ranges(seed):
    rng = np.random.default_rng(seed)
    taus = np.sort(rng.exponential(3.0, size=6))[::-1]
    taus[-1] = 0.0
    spec = build_spectrum(_svd_from_taus(taus), float(rng.choice([0.1, 1.0, 10.0])))
    for lam in (spec.lam1, spec.lam2):
        assert np.all((lam >= 0) & (lam < 1))
    np.testing.assert_array_equal(spec.lam3, spec.lam3.T)
    assert np.all((spec.lam3 >= 0) & (spec.lam3 < 2))
    assert not spec.lam3[-1].any()


def test_inverse_l1_examples():
    svd = _svd_from_taus([0.0, 0.0])
    np.testing.assert_allclose(ridge_inverse_l1(svd, 2.0), 0.5 * np.eye(2))
    svd = _svd_from_taus([2.0, 0.0])
    np.testing.assert_allclose(ridge_inverse_l1(svd, 1.0), np.diag([1 / 3, 1.0]))


def test_inverse_l1_dense_oracle():
    svd, S = _instance(0, 3, 5)
    np.testing.assert_allclose(ridge_inverse_l1(svd, 0.7), np.linalg.inv(S + 0.7 * np.eye(5)), atol=1e-10)


def test_inverse_l2_examples():
    np.testing.assert_allclose(ridge_inverse_l2_kron(_svd_from_taus([0.0, 0.0]), 1.0), np.eye(4))
    np.testing.assert_allclose(ridge_inverse_l2_kron(_svd_from_taus([2.0, 2.0]), 1.0), np.eye(4) / 3,
                               atol=1e-15)


def test_inverse_l2_dense_oracle():
    svd, S = _instance(1, 6, 4)
    K = hessian(S, "L2") + 0.9 * np.eye(16)
    np.testing.assert_allclose(ridge_inverse_l2_kron(svd, 0.9), np.linalg.inv(K), atol=1e-9)


def test_inverse_l2_size_guard():
    with pytest.raises(InvalidInputError):
        ridge_inverse_l2_kron(_svd_from_taus(np.ones(13)), 1.0)


def test_solve_l1_examples():
    C = np.random.default_rng(5).standard_normal((3, 3))
    svd = _svd_from_taus([0.0, 0.0, 0.0])
    np.testing.assert_allclose(solve_l1(build_spectrum(svd, 1.0), svd, C), C)
    svd = _svd_from_taus([2.0, 0.0])
    np.testing.assert_allclose(solve_l1(build_spectrum(svd, 1.0), svd, np.eye(2)), np.diag([1 / 3, 1.0]))


def test_solve_l2_examples():
    C = np.random.default_rng(6).standard_normal((3, 3))
    svd = _svd_from_taus([0.0, 0.0, 0.0])
    np.testing.assert_allclose(solve_l2(build_spectrum(svd, 3.0), svd, C), C / 3)
    svd = _svd_from_taus([2.0, 2.0])
    np.testing.assert_allclose(solve_l2(build_spectrum(svd, 1.0), svd, np.eye(2)), np.eye(2) / 3)


def test_solve_l1_dense_oracle():
    svd, S = _instance(7, 3, 4)
    C = np.random.default_rng(8).standard_normal((4, 4))
    expected = np.linalg.solve(S + 1.3 * np.eye(4), C)
    assert np.abs(solve_l1(build_spectrum(svd, 1.3), svd, C) - expected).max() <= 1e-9


def test_solve_l2_kronecker_oracle():
    svd, S = _instance(9, 6, 4)
    C = np.random.default_rng(10).standard_normal((4, 4))
    K = hessian(S, "L2") + 0.4 * np.eye(16)
    expected = unvec(np.linalg.solve(K, vec(C)), 4)
    got = solve_l2(build_spectrum(svd, 0.4), svd, C)
    assert np.abs(got - expected).max() <= 1e-9
    via_inverse = unvec(ridge_inverse_l2_kron(svd, 0.4) @ vec(C), 4)
    assert np.abs(got - via_inverse).max() <= 1e-9


def test_solve_shape_mismatch():
    svd = _svd_from_taus([1.0, 1.0])
    spec = build_spectrum(svd, 1.0)
    with pytest.raises(InvalidInputError):
        solve_l1(spec, svd, np.eye(3))
    with pytest.raises(InvalidInputError):
        solve_l2(spec, svd, np.eye(3))


def _residual_instances(count=200):
    rng = np.random.default_rng(2024)
    for _ in range(count):
        p = int(rng.integers(1, 21))
        n = int(rng.integers(1, 26))
        rho = float(rng.choice([0.1, 1.0, 10.0]))
        X = rng.standard_normal((n, p))
        C = rng.standard_normal((p, p))
        yield X, C, rho


def test_residual_identities():
    for X, C, rho in _residual_instances():
        svd = thin_svd_gram(X)
        S = covariance_loops(X) if X.size < 60 else X.T @ X / X.shape[0]
        spec = build_spectrum(svd, rho)
        scale = 1 + np.abs(C).max()
        O1 = solve_l1(spec, svd, C)
        assert np.abs(S @ O1 + rho * O1 - C).max() <= 1e-8 * scale
        O2 = solve_l2(spec, svd, C)
        assert np.abs(0.5 * S @ O2 + 0.5 * O2 @ S + rho * O2 - C).max() <= 1e-8 * scale


@pytest.mark.parametrize("seed", range(10))
def test_solve_l2_preserves_symmetry(seed):
    rng = np.random.default_rng(seed)
    svd = thin_svd_gram(rng.standard_normal((6, 10)))
    C = rng.standard_normal((10, 10))
    C = C + C.T
    O = solve_l2(build_spectrum(svd, 1.0), svd, C)
    assert np.abs(O - O.T).max() <= 1e-12


def test_solve_l1_not_symmetric_in_general():
    rng = np.random.default_rng(11)
    svd = thin_svd_gram(rng.standard_normal((4, 6)))
    C = np.eye(6) + 0.3 * np.ones((6, 6))
    O = solve_l1(build_spectrum(svd, 1.0), svd, C)
    assert np.abs(O - O.T).max() > 1e-6


@pytest.mark.parametrize("alpha", [-2.5, 0.0, 3.0])
def test_solve_l1_scaling(alpha):
    rng = np.random.default_rng(12)
    svd = thin_svd_gram(rng.standard_normal((5, 7)))
    spec = build_spectrum(svd, 0.5)
    C = rng.standard_normal((7, 7))
    np.testing.assert_allclose(solve_l1(spec, svd, alpha * C), alpha * solve_l1(spec, svd, C),
                               rtol=1e-13, atol=1e-13)
