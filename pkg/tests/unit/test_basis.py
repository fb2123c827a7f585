import pytest
import logging
logger = logging.getLogger("execflow")

import sys
sys.path.append('../../execflow/')
sys.path.append('../../')
sys.path.append('..')

import numpy as np
from numpy.testing import assert_allclose

from execflow.basis import Basis, BasisKind, UnsupportedBasisError, create_basis
from testing_utils import *


def test_basis_kind_from_name():
    assert BasisKind.from_name("legendreshifted") == BasisKind.LEGENDRE_SHIFTED
    assert BasisKind.from_name(" Laguerre ") == BasisKind.LAGUERRE
    assert BasisKind.from_name(BasisKind.MONOMIAL) == BasisKind.MONOMIAL

    with pytest.raises(UnsupportedBasisError):
        BasisKind.from_name("Hermite")


def test_invalid_parameters():
    with pytest.raises(UnsupportedBasisError):
        Basis("LegendreShifted", tau=0.0, n=4)
    with pytest.raises(UnsupportedBasisError):
        Basis("LegendreShifted", tau=10.0, n=0)
    with pytest.raises(UnsupportedBasisError):
        Basis("Monomial", tau=10.0, n=51)


def test_create_basis_defaults():
    basis = create_basis()
    assert basis.kind == BasisKind.LEGENDRE_SHIFTED, "The configured default measure is LegendreShifted."
    assert basis.n == 12
    assert basis.tau == 256.0
    assert basis.n_moments == 23


def test_legendre_gram_is_analytic():
    tau = 256.0
    basis = Basis("LegendreShifted", tau=tau, n=12)
    expected = tau * np.diag(1.0 / (2 * np.arange(12) + 1))
    assert_allclose(basis.gram, expected, rtol=0, atol=1e-9 * tau)


def test_laguerre_gram_is_analytic():
    tau = 256.0
    basis = Basis("Laguerre", tau=tau, n=12)
    assert_allclose(basis.gram, tau * np.eye(12), rtol=0, atol=1e-9 * tau)


def test_monomial_gram_is_analytic():
    tau = 3.0
    basis = Basis("Monomial", tau=tau, n=4)
    j = np.arange(4)
    orders = j[:, None] + j[None, :]
    factorials = np.array([[float(np.prod(np.arange(1, k + 1))) for k in row] for row in orders])
    expected = tau * (-1.0) ** orders * factorials
    assert_allclose(basis.gram, expected, rtol=1e-10)


def test_now_values():
    assert_allclose(Basis("LegendreShifted", tau=5.0, n=5).now_values, np.ones(9))
    assert_allclose(Basis("Laguerre", tau=5.0, n=5).now_values, np.ones(9))
    assert_allclose(Basis("Monomial", tau=5.0, n=3).now_values, [1.0, 0.0, 0.0, 0.0, 0.0])


def test_full_support_moments(any_basis):
    tau = any_basis.tau
    assert any_basis.unit_moments[0] == pytest.approx(tau, rel=1e-10), "∫ω dt is τ."
    assert any_basis.age_moments[0] == pytest.approx(tau ** 2, rel=1e-10), "∫ω (t_now - t) dt is τ²."
    assert_allclose(any_basis.gram[0, 0], tau, rtol=1e-10)


def test_multiplication_coefficients():
    basis = Basis("LegendreShifted", tau=1.0, n=3)
    result = basis.multiply_coeffs(1, 1)
    assert_allclose(result.coef, [1.0 / 3.0, 0.0, 2.0 / 3.0], atol=1e-14)
    assert not result.unstable

    with pytest.raises(ValueError):
        basis.multiply_coeffs(-1, 0)


def test_multiplication_tensor_matches_pointwise_products(any_basis):
    x = any_basis.x_of_age(np.array([0.0, 1.5, 7.0, 20.0]))
    q = any_basis.values(x, any_basis.n)
    products = any_basis.values(x, any_basis.n_moments) @ any_basis.multiplication_tensor.reshape(-1, any_basis.n_moments).T
    expected = np.einsum("ij,ik->ijk", q, q).reshape(len(x), -1)
    assert_allclose(products, expected, rtol=1e-9, atol=1e-9)


def test_ed_and_j_are_inverse_under_the_weight(any_basis):
    # d/dt[ω J(p)] = ω p, i.e. ED(J(p)) + J(p) ED(1) = p
    n = any_basis.n
    ed = any_basis.ed_matrix
    for k in range(n - 1):
        jq = any_basis.j_matrix[:n, k]
        assert_allclose(ed @ jq + jq / (2.0 * any_basis.tau), np.eye(n)[k], atol=1e-9,
                        err_msg=f"ED(J(Q_{k})) mismatch for {any_basis}")


def test_ed_and_j_of_constant(any_basis):
    assert any_basis.ed_matrix[0, 0] == pytest.approx(0.5 / any_basis.tau)
    assert any_basis.j_matrix[0, 0] == pytest.approx(any_basis.tau)
    assert_allclose(any_basis.j_matrix[1:, 0], 0.0, atol=1e-10 * any_basis.tau)


def test_x_of_age():
    legendre = Basis("LegendreShifted", tau=2.0, n=2)
    assert legendre.x_of_age(0.0) == pytest.approx(1.0)
    assert legendre.x_of_age(2.0) == pytest.approx(np.exp(-1.0))

    laguerre = Basis("Laguerre", tau=2.0, n=2)
    assert laguerre.x_of_age(0.0) == pytest.approx(0.0)
    assert laguerre.x_of_age(4.0) == pytest.approx(-2.0)


def test_shift_operator_semigroup(any_basis):
    a = any_basis.shift_operator(1.3)
    b = any_basis.shift_operator(2.1)
    combined = any_basis.shift_operator(3.4)
    assert_allclose(a @ b, combined, rtol=1e-8, atol=1e-10)


def test_shift_operator_of_a_point_mass(any_basis):
    # a single observation at age s has moments ω(s) Q_m(x(s)); shifting ages it by δ
    age, delta = 2.0, 3.0
    size = any_basis.n_moments
    before = any_basis.weight(age) * any_basis.values(any_basis.x_of_age(np.array([age])), size)[0]
    after = any_basis.weight(age + delta) * any_basis.values(any_basis.x_of_age(np.array([age + delta])), size)[0]
    assert_allclose(any_basis.shift_operator(delta) @ before, after, rtol=1e-8, atol=1e-12)


def test_shift_operator_edge_cases(legendre_basis):
    assert_allclose(legendre_basis.shift_operator(0.0), np.eye(legendre_basis.n_moments))
    with pytest.raises(ValueError):
        legendre_basis.shift_operator(-1.0)
