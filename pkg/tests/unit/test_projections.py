import pytest
import logging
logger = logging.getLogger("execflow")

import sys
sys.path.append('../../execflow/')
sys.path.append('../../')
sys.path.append('..')

import numpy as np
from numpy.testing import assert_allclose

from execflow.idpdt import idpdt_matrix
from execflow.projections import didt_projectors, double_integration_pstar, flow_adjusted_pi, split_spur
from testing_utils import *


def test_didt_projectors_partition_unity(ready_snapshot):
    pair = didt_projectors(ready_snapshot)
    n = ready_snapshot.basis.n

    assert_allclose(pair.pi_plus + pair.pi_minus, np.eye(n), atol=1e-8)
    assert_allclose(pair.pi_plus @ pair.pi_plus, pair.pi_plus, atol=1e-8)
    assert_allclose(pair.pi_minus @ pair.pi_minus, pair.pi_minus, atol=1e-8)
    assert_allclose(pair.pi_plus @ pair.pi_minus, 0.0, atol=1e-8)
    assert len(pair.eigenvalues) == n


def test_split_spur_is_additive(ready_snapshot):
    pair = didt_projectors(ready_snapshot)
    for name in ("I", "pI", "1"):
        f = ready_snapshot.psi(name)
        plus, minus = split_spur(f, pair, ready_snapshot.rho_jih_psi)
        total = ready_snapshot.spur(f)
        assert plus + minus == pytest.approx(total, rel=1e-7, abs=1e-9 * max(1.0, abs(total))), name


def test_split_spur_needs_psi_basis(ready_snapshot):
    pair = didt_projectors(ready_snapshot)
    with pytest.raises(ValueError):
        split_spur(ready_snapshot.matrix("I"), pair, ready_snapshot.rho_jih_psi)


def test_flow_adjusted_pi(ready_snapshot):
    adjusted = flow_adjusted_pi(ready_snapshot)
    scale = ready_snapshot.v_ih

    # Spur‖I|Π|ρ_JIH‖ = λ-weighted T_IH minus V_IH, zero by construction
    assert abs(adjusted.constraint) <= 1e-8 * max(1.0, scale)
    assert_allclose(adjusted.pi_plus + adjusted.pi_minus, adjusted.pi, atol=1e-14)

    diagonal = np.diag(adjusted.pi_plus)
    assert np.all(diagonal >= 0), "Π_+ keeps the non-negative eigenvalues."
    assert np.all(np.diag(adjusted.pi_minus) <= 0)
    assert np.isfinite(adjusted.pnl)
    if adjusted.p_plus is not None:
        assert np.isfinite(adjusted.p_plus)


def test_flow_adjusted_pi_of_constant_price(legendre_basis):
    price = 30.0
    snapshot = snapshot_for(legendre_basis, constant_price_ticks(price=price))
    adjusted = flow_adjusted_pi(snapshot)

    # p = const makes pI = p·I, so P&L = -p·Spur‖I|Π|ρ‖ = 0 and any defined price is p
    assert abs(adjusted.pnl) <= 1e-7 * price * max(1.0, snapshot.v_ih)
    for value in (adjusted.p_plus, adjusted.p_minus):
        if value is not None:
            assert value == pytest.approx(price, rel=1e-7)


def test_double_integration(ready_snapshot):
    idpdt = idpdt_matrix("SqrtSandwich", ready_snapshot)
    result = double_integration_pstar(ready_snapshot, idpdt, epsilon=0.0)

    expected = ready_snapshot.lambda_ih * ready_snapshot.t_ih - ready_snapshot.v_ih
    assert result.v_extra == pytest.approx(expected, rel=1e-12)

    dpi = ready_snapshot.ddt("pI", ready_snapshot.p_last * ready_snapshot.lambda_ih)
    assert result.dpi_spur == pytest.approx(ready_snapshot.spur(dpi, "JJIH"), rel=1e-12)

    if result.v_extra != 0:
        p_star = -(2.0 * ready_snapshot.spur(idpdt, "JJIH") - result.dpi_spur) / result.v_extra
        assert result.p_star == pytest.approx(p_star, rel=1e-12)


def test_double_integration_limit(ready_snapshot):
    idpdt = idpdt_matrix("SqrtSandwich", ready_snapshot)
    result = double_integration_pstar(ready_snapshot, idpdt, epsilon=1e12)
    assert result.p_star is None
    assert np.isfinite(result.v_extra)


def test_double_integration_with_future_impact(ready_snapshot):
    idpdt = idpdt_matrix("SqrtSandwich", ready_snapshot)
    i0f = 2.0 * ready_snapshot.lambda_ih
    result = double_integration_pstar(ready_snapshot, idpdt, i0f=i0f)
    assert result.v_extra == pytest.approx(i0f * ready_snapshot.t_ih - ready_snapshot.v_ih, rel=1e-12)
