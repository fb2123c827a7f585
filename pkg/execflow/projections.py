"""
Projection operators splitting since-spike averages, and the double-integration
("extra volume") state. These results are experimental.
"""
import logging
from typing import NamedTuple, Optional

import numpy as np

from execflow import utils
from execflow.idpdt import VariantNotReady
from execflow.operators import OperatorMatrix, ddt_operator
from execflow.spectral import GevKind, solve_gev

logger = logging.getLogger("execflow")

config = utils.read_config_file()

default = {}
default["pstar_epsilon"] = config["Indicators"].getfloat("PSTAR_EPSILON", 1e-9)


class ProjectionPair(NamedTuple):
    pi_plus: np.ndarray
    pi_minus: np.ndarray
    eigenvalues: np.ndarray


class FlowAdjustedPi(NamedTuple):
    pi: np.ndarray
    pi_plus: np.ndarray
    pi_minus: np.ndarray
    p_plus: Optional[float]
    p_minus: Optional[float]
    pnl: float
    constraint: float


class DoubleIntegration(NamedTuple):
    v_extra: float
    p_star: Optional[float]
    dpi_spur: float


def _spur(f: np.ndarray, projector: np.ndarray, rho: np.ndarray) -> float:
    # Spur‖f|Π|ρ‖
    return float(np.trace(f @ projector @ rho))


def didt_projectors(snapshot, i0f: float = None) -> ProjectionPair:
    """
    Projectors on the eigenstates of ‖dI/dt‖ (boundary I_0^F) with positive and with
    non-positive eigenvalues, expressed in the ψ basis of the execution-flow eigenproblem.
    """
    basis = snapshot.basis
    i0f = snapshot.lambda_ih if i0f is None else i0f

    gram = snapshot.matrix("1").entries
    didt = ddt_operator(basis, snapshot.matrix("I"), i0f, label="dI/dt")
    spectral = solve_gev(didt, gram, GevKind.DIDT_VS_1, basis.now_values)

    # eigenvectors β in the ψ^{IH} basis
    beta = snapshot.spectral.alphas.T @ gram @ spectral.alphas
    positive = spectral.lambdas > 0

    def project(mask):
        columns = beta[:, mask]
        return columns @ columns.T

    return ProjectionPair(project(positive), project(~positive), spectral.lambdas)


def split_spur(f: OperatorMatrix, pair: ProjectionPair, rho_psi: np.ndarray) -> tuple:
    """
    (Spur‖f|Π_+|ρ‖, Spur‖f|Π_-|ρ‖); their sum is Spur‖f|ρ‖.
    """
    if f.basis_tag != OperatorMatrix.PSI:
        raise ValueError(f"{f} must be in the ψ basis of the projectors.")
    return _spur(f.entries, pair.pi_plus, rho_psi), _spur(f.entries, pair.pi_minus, rho_psi)


def flow_adjusted_pi(snapshot) -> FlowAdjustedPi:
    """
    The operator Π with eigenvalues 1 - (V_IH/T_IH)/λ^{[i]} on ψ^{[i]}, which makes
    Spur‖I|Π|ρ_JIH‖ vanish, split by the sign of its eigenvalues, with the prices
    and the P&L it implies.
    """
    t_ih = snapshot.t_ih
    if not t_ih > 0:
        raise VariantNotReady(f"T_IH must be positive, got {t_ih}.")

    lambdas = snapshot.lambdas
    if not np.min(lambdas) > 0:
        raise VariantNotReady(f"Execution-flow eigenvalues must be positive, got {np.min(lambdas):.3g}.")

    flow_rate = snapshot.v_ih / t_ih
    eigenvalues = 1.0 - flow_rate / lambdas
    above = lambdas > flow_rate

    pi = np.diag(eigenvalues)
    pi_plus = np.diag(np.where(above, eigenvalues, 0.0))
    pi_minus = np.diag(np.where(above, 0.0, eigenvalues))

    rho = snapshot.rho_jih_psi
    flow = snapshot.diag_lambda.entries
    pi_flow = snapshot.psi("pI").entries

    def price(projector, present):
        volume = _spur(flow, projector, rho)
        if not present or volume == 0:
            return None
        return _spur(pi_flow, projector, rho) / volume

    return FlowAdjustedPi(pi, pi_plus, pi_minus,
                          price(pi_plus, above.any()),
                          price(pi_minus, (~above).any()),
                          -_spur(pi_flow, pi, rho),
                          _spur(flow, pi, rho))


def double_integration_pstar(snapshot, idpdt: OperatorMatrix, i0f: float = None, epsilon: float = None) -> DoubleIntegration:
    """
    The extra volume Ṽ = I_0^F·T_IH - V_IH and the price P* that balances the
    ρ_JJIH action: P* = -(2 Spur‖I dp/dt|ρ_JJIH‖ - Spur‖d(pI)/dt|ρ_JJIH‖)/Ṽ.

    P* is None when |Ṽ| < ε·λ^{IH}·T_IH (the V/T state limit).
    """
    i0f = snapshot.lambda_ih if i0f is None else i0f
    epsilon = default["pstar_epsilon"] if epsilon is None else epsilon

    t_ih = snapshot.t_ih
    v_extra = i0f * t_ih - snapshot.v_ih
    dpi_spur = snapshot.spur(snapshot.ddt("pI", snapshot.p_last * i0f), "JJIH")

    if abs(v_extra) < epsilon * snapshot.lambda_ih * t_ih:
        return DoubleIntegration(v_extra, None, dpi_spur)

    p_star = -(2.0 * snapshot.spur(idpdt, "JJIH") - dpi_spur) / v_extra
    return DoubleIntegration(v_extra, p_star, dpi_spur)
