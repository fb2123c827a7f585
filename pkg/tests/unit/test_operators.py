import pytest
import logging
logger = logging.getLogger("execflow")

import sys
sys.path.append('../../execflow/')
sys.path.append('../../')
sys.path.append('..')

import numpy as np
from numpy.testing import assert_allclose

from execflow.basis import Basis
from execflow.operators import (BasisMismatchError, OperatorMatrix, convert_basis, ddt_operator, gram_operator,
                                matrix_from_moments, operator_product)
from testing_utils import *


def test_matrix_from_moments_small_legendre():
    basis = Basis("LegendreShifted", tau=1.0, n=2)
    matrix = matrix_from_moments(basis, [1.0, 0.0, 0.0], label="f")
    assert_allclose(matrix.entries, [[1.0, 0.0], [0.0, 1.0 / 3.0]], atol=1e-14)
    assert matrix.basis_tag == OperatorMatrix.Q
    assert matrix.is_symmetric()


def test_matrix_from_moments_checks_length(legendre_basis):
    with pytest.raises(BasisMismatchError):
        matrix_from_moments(legendre_basis, np.ones(legendre_basis.n_moments + 1))


def test_gram_operator(any_basis):
    assert_allclose(gram_operator(any_basis).entries, any_basis.gram)


def test_operator_matrix_validation(ready_snapshot):
    with pytest.raises(BasisMismatchError):
        OperatorMatrix(np.ones((2, 3)))
    with pytest.raises(BasisMismatchError):
        OperatorMatrix(np.eye(2), basis_tag="Z")
    with pytest.raises(BasisMismatchError):
        OperatorMatrix(np.eye(2), basis_tag=OperatorMatrix.PSI)

    q = ready_snapshot.matrix("I")
    psi = ready_snapshot.psi("I")
    with pytest.raises(BasisMismatchError):
        q + psi


def test_operator_arithmetic(ready_snapshot):
    a = ready_snapshot.matrix("I")
    b = ready_snapshot.matrix("pI")

    assert_allclose((a + b).entries, a.entries + b.entries)
    assert_allclose((a - b).entries, a.entries - b.entries)
    assert_allclose((2.0 * a).entries, 2.0 * a.entries)
    assert_allclose((a / 4.0).entries, a.entries / 4.0)
    assert_allclose((-a).entries, -a.entries)


def test_gram_and_flow_in_psi_basis(ready_snapshot):
    spectral = ready_snapshot.spectral
    gram = convert_basis(ready_snapshot.matrix("1"), OperatorMatrix.PSI, spectral)
    flow = convert_basis(ready_snapshot.matrix("I"), OperatorMatrix.PSI, spectral)

    assert_allclose(gram.entries, np.eye(spectral.n), atol=1e-9)
    scale = np.max(np.abs(spectral.lambdas))
    assert_allclose(flow.entries, np.diag(spectral.lambdas), atol=1e-9 * scale)


def test_basis_round_trip(ready_snapshot):
    rng = np.random.default_rng(7)
    n = ready_snapshot.basis.n
    entries = rng.normal(size=(n, n))
    matrix = OperatorMatrix(entries + entries.T)

    spectral = ready_snapshot.spectral
    back = spectral.to_q(spectral.to_psi(matrix))
    assert back.basis_tag == OperatorMatrix.Q
    assert_allclose(back.entries, matrix.entries, atol=1e-9 * np.max(np.abs(matrix.entries)))


def test_ddt_of_a_constant_vanishes(any_basis):
    c = 3.5
    result = ddt_operator(any_basis, c * any_basis.unit_moments, c)
    assert_allclose(result.entries, 0.0, atol=1e-9 * c * np.max(np.abs(any_basis.gram)))


def test_ddt_requires_boundary(legendre_basis):
    with pytest.raises(ValueError):
        ddt_operator(legendre_basis, legendre_basis.unit_moments, None)


def test_ddt_matches_sampled_derivative(any_basis, random_session):
    # the held price path has dp/dt = Σ Δp δ(t - t_l), sampled directly by the "dp" moments
    moments = moments_for(any_basis, random_session)
    by_parts = ddt_operator(any_basis, moments.vector("p"), moments.p_last)
    sampled = matrix_from_moments(any_basis, moments.vector("dp"))
    scale = np.max(np.abs(sampled.entries))
    assert_allclose(by_parts.entries, sampled.entries, atol=1e-7 * scale + 1e-10)

    # V^last - V has the derivative -I and vanishes now
    by_parts = ddt_operator(any_basis, moments.vector("W", "V"), 0.0)
    sampled = matrix_from_moments(any_basis, moments.vector("I", "V"))
    scale = np.max(np.abs(sampled.entries))
    assert_allclose(by_parts.entries, -sampled.entries, atol=1e-7 * scale)


def test_ddt_in_psi_basis(ready_snapshot):
    in_q = ddt_operator(ready_snapshot.basis, ready_snapshot.matrix("I"), ready_snapshot.lambda_ih)
    in_psi = ready_snapshot.ddt("I", ready_snapshot.lambda_ih)
    assert in_psi.basis_tag == OperatorMatrix.PSI
    assert_allclose(ready_snapshot.spectral.to_psi(in_q).entries, in_psi.entries)


def test_operator_product(ready_snapshot):
    a = ready_snapshot.matrix("I")
    gram = ready_snapshot.matrix("1")
    product = operator_product(a, gram, gram)
    assert_allclose(product.entries, a.entries, rtol=1e-8, atol=1e-10 * np.max(np.abs(a.entries)))
    assert not product.hermitian

    with pytest.raises(ValueError):
        operator_product(a, gram)

    psi_a = ready_snapshot.psi("I")
    psi_b = ready_snapshot.psi("pI")
    assert_allclose(operator_product(psi_a, psi_b).entries, psi_a.entries @ psi_b.entries)
