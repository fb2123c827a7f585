"""
Approximations of the operator ‖I dp/dt‖.

The operator cannot be obtained from the sampled moments exactly. Every variant
below builds it in the ψ basis of the execution-flow eigenproblem, where ‖I‖ is
diagonal, from moments that are available: ⟨Q_m pI⟩ combined with the ED
transform, or products of separately sampled operators.
"""
import enum
import logging
from typing import NamedTuple

import numpy as np
import scipy.optimize

from execflow import utils
from execflow.operators import OperatorMatrix

logger = logging.getLogger("execflow")

config = utils.read_config_file()

default = {}
default["variant"] = config["Approximations"].get("IDPDT_VARIANT", "RightProduct")
default["power_beta"] = config["Approximations"].getfloat("POWER_BETA", 1.0)
default["lambda_floor"] = config["Approximations"].getfloat("LAMBDA_FLOOR", 1e-12)


class VariantNotReady(Exception):
    pass


class IdpdtVariant(enum.Enum):
    SQRT_SANDWICH = "SqrtSandwich"
    RIGHT_PRODUCT = "RightProduct"
    POWER_BETA = "PowerBeta"
    DIRECT_PRODUCT = "DirectProduct"
    PDI_RESIDUAL = "PdIResidual"
    VDDT_RESIDUAL = "VddtResidual"
    DT_P_OVER_I = "DtPoverI"
    SANDWICH_DT_P_OVER_I = "Sandwich_DtPoverI"

    @classmethod
    def from_name(cls, name) -> "IdpdtVariant":
        if isinstance(name, IdpdtVariant):
            return name
        for variant in cls:
            if variant.value.lower() == str(name).strip().lower():
                return variant
        raise ValueError(f"Unknown ‖I dp/dt‖ variant '{name}'. Valid variants are: {[v.value for v in cls]}")

    @property
    def hermitian(self) -> bool:
        return self in (IdpdtVariant.SQRT_SANDWICH, IdpdtVariant.POWER_BETA,
                        IdpdtVariant.DT_P_OVER_I, IdpdtVariant.SANDWICH_DT_P_OVER_I)

    @property
    def needs_boundary(self) -> bool:
        """
        Whether the variant uses the impact from the future I_0^F.
        """
        return self in (IdpdtVariant.PDI_RESIDUAL, IdpdtVariant.DT_P_OVER_I, IdpdtVariant.SANDWICH_DT_P_OVER_I)

    @property
    def difference_type(self) -> bool:
        """
        Whether the variant approximates ‖I dp/dt - p dI/dt‖ rather than ‖I dp/dt‖.
        """
        return self in (IdpdtVariant.DT_P_OVER_I, IdpdtVariant.SANDWICH_DT_P_OVER_I)

    @property
    def divides_by_lambda(self) -> bool:
        return self in (IdpdtVariant.SQRT_SANDWICH, IdpdtVariant.RIGHT_PRODUCT, IdpdtVariant.POWER_BETA,
                        IdpdtVariant.DT_P_OVER_I, IdpdtVariant.SANDWICH_DT_P_OVER_I)

    @property
    def diagnostic_only(self) -> bool:
        # the d²p/dt² factor is dominated by tick singularities
        return self == IdpdtVariant.VDDT_RESIDUAL


def _check_floor(snapshot, floor: float = None) -> None:
    floor = default["lambda_floor"] if floor is None else floor
    threshold = floor * snapshot.lambda_ih
    if not np.min(snapshot.lambdas) > threshold:
        raise VariantNotReady(f"Smallest execution-flow eigenvalue {np.min(snapshot.lambdas):.3g} "
                              f"is below the floor {threshold:.3g}.")


def _psi_matrix(snapshot, entries, hermitian: bool, label: str) -> OperatorMatrix:
    return OperatorMatrix(entries, OperatorMatrix.PSI, hermitian, snapshot.spectral, label)


def dp_core(snapshot, floor: float = None) -> OperatorMatrix:
    """
    DP_jk = (1/λ_k)⟨ED(ψ_j)|(P^last-p)I|ψ_k⟩ + (1/λ_j)⟨ψ_j|(P^last-p)I|ED(ψ_k)⟩, in the ψ basis.

    Raises:
        VariantNotReady: when an eigenvalue is at or below floor·λ^{IH}.
    """
    _check_floor(snapshot, floor)

    lambdas = snapshot.lambdas
    ed = snapshot.ed_psi
    residual = snapshot.p_last * snapshot.diag_lambda.entries - snapshot.psi("pI").entries
    entries = (ed.T @ residual) / lambdas[None, :] + (residual @ ed) / lambdas[:, None]
    return _psi_matrix(snapshot, entries, True, "DP")


def _dt_p_over_i(snapshot, i0f: float, sandwich: bool, floor: float = None) -> OperatorMatrix:
    _check_floor(snapshot, floor)

    lambdas = snapshot.lambdas
    ed = snapshot.ed_psi
    pi = snapshot.psi("pI").entries
    at_now = snapshot.psi_now

    left = (ed.T @ pi) / lambdas[None, :] ** 2
    right = (pi @ ed) / lambdas[:, None] ** 2
    entries = (snapshot.p_last / i0f) * np.outer(at_now, at_now) - left - right

    if sandwich:
        entries = lambdas[:, None] * entries * lambdas[None, :]
        return _psi_matrix(snapshot, entries, True, "I d(p/I)/dt I")
    return _psi_matrix(snapshot, entries, True, "d(p/I)/dt")


def variant_matrix(variant, snapshot, i0f: float = None, beta: float = None, floor: float = None) -> OperatorMatrix:
    """
    The raw matrix of a variant, in the ψ basis. For the difference-type variants this
    is the approximation of ‖I dp/dt - p dI/dt‖ (or of ‖d(p/I)/dt‖ for DtPoverI).

    Args:
        variant (IdpdtVariant or str): The approximation.
        snapshot (FlowSnapshot): The flow state at the current tick.
        i0f (float, optional): Impact from the future. Defaults to λ^{IH}.
        beta (float, optional): The I power of PowerBeta. Defaults to the configured one.
        floor (float, optional): Relative eigenvalue floor.
    """
    variant = IdpdtVariant.from_name(variant)
    i0f = snapshot.lambda_ih if i0f is None else i0f
    lambdas = snapshot.lambdas

    if variant == IdpdtVariant.SQRT_SANDWICH:
        root = np.sqrt(lambdas)
        return _psi_matrix(snapshot, root[:, None] * dp_core(snapshot, floor).entries * root[None, :], True, variant.value)

    if variant == IdpdtVariant.RIGHT_PRODUCT:
        return _psi_matrix(snapshot, dp_core(snapshot, floor).entries * lambdas[None, :], False, variant.value)

    if variant == IdpdtVariant.POWER_BETA:
        beta = default["power_beta"] if beta is None else beta
        scale = lambdas ** (0.5 * beta)
        return _psi_matrix(snapshot, scale[:, None] * dp_core(snapshot, floor).entries * scale[None, :], True, variant.value)

    if variant == IdpdtVariant.DIRECT_PRODUCT:
        return _psi_matrix(snapshot, snapshot.psi("dp").entries * lambdas[None, :], False, variant.value)

    if variant == IdpdtVariant.PDI_RESIDUAL:
        dpi = snapshot.ddt("pI", snapshot.p_last * i0f)
        pdi = snapshot.psi("p").entries @ snapshot.ddt("I", i0f).entries
        return _psi_matrix(snapshot, dpi.entries - pdi, False, variant.value)

    if variant == IdpdtVariant.VDDT_RESIDUAL:
        vdp = snapshot.ddt("Vdp", 0.0)
        # V = -W relative to V^last = 0
        vd2p = snapshot.psi("W").entries @ snapshot.ddt("dp", 0.0).entries
        return _psi_matrix(snapshot, vdp.entries + vd2p, False, variant.value)

    if variant == IdpdtVariant.DT_P_OVER_I:
        return _dt_p_over_i(snapshot, i0f, sandwich=False, floor=floor)

    if variant == IdpdtVariant.SANDWICH_DT_P_OVER_I:
        return _dt_p_over_i(snapshot, i0f, sandwich=True, floor=floor)

    raise ValueError(f"Unsupported variant {variant}.")


def idpdt_matrix(variant, snapshot, i0f: float = None, beta: float = None, floor: float = None) -> OperatorMatrix:
    """
    The approximation of ‖I dp/dt‖ selected by `variant`, in the ψ basis.

    Difference-type variants estimate D = ‖I dp/dt - p dI/dt‖; together with the exact
    ‖d(pI)/dt‖ = ‖I dp/dt + p dI/dt‖ (boundary P^last·λ^{IH}) they give
    ‖I dp/dt‖ = (‖d(pI)/dt‖ + D)/2. DtPoverI scaled back by ‖I‖ on both sides is the
    Sandwich_DtPoverI matrix, so both variants give the same result for the same I_0^F.
    """
    variant = IdpdtVariant.from_name(variant)
    if variant == IdpdtVariant.DT_P_OVER_I:
        i0f = snapshot.lambda_ih if i0f is None else i0f
        difference = _dt_p_over_i(snapshot, i0f, sandwich=True, floor=floor).entries
    else:
        matrix = variant_matrix(variant, snapshot, i0f, beta, floor)
        if not variant.difference_type:
            return matrix
        difference = matrix.entries

    dpi = snapshot.ddt("pI", snapshot.p_last * snapshot.lambda_ih)
    return _psi_matrix(snapshot, 0.5 * (dpi.entries + difference), True, variant.value)


class I0FAdjustment(NamedTuple):
    value: float
    converged: bool
    residual: float


def adjust_i0f(snapshot, xtol: float = 1e-10, bracket: tuple = None) -> I0FAdjustment:
    """
    Adjusts I_0^F so that Spur‖I|d(1/I)/dt|I|ρ_JIH‖ = 0, i.e. so that the sandwiched
    d(p/I)/dt variant integrates a constant price to zero.

    The root is bracketed in [λ^{[V/T]}, 10·λ^{IH}] unless `bracket` is given. Without a sign change the value
    falls back to λ^{IH}, with `converged` False.
    """
    lambdas = snapshot.lambdas
    rho = snapshot.rho_jih_psi
    weighted_now = lambdas * snapshot.psi_now
    boundary = float(weighted_now @ rho @ weighted_now)
    interior = 2.0 * float(np.sum(snapshot.ed_psi * rho * lambdas[None, :]))

    def condition(i0f: float) -> float:
        return boundary / i0f - interior

    lambda_ih = snapshot.lambda_ih
    low, high = (snapshot.vt_state.lambda_ih, 10.0 * lambda_ih) if bracket is None else bracket
    try:
        if not 0 < low < high:
            raise ValueError(f"Invalid bracket [{low}, {high}].")
        value = scipy.optimize.brentq(condition, low, high, xtol=xtol * lambda_ih, rtol=xtol)
        return I0FAdjustment(float(value), True, abs(condition(value)))
    except ValueError as e:
        logger.warning(f"I_0^F adjustment fell back to λ^IH={lambda_ih:.6g}: {e}")
        return I0FAdjustment(float(lambda_ih), False, abs(condition(lambda_ih)) if lambda_ih > 0 else float("nan"))
