"""
Everything computed from the moments of one flow at one tick: the operator
matrices, the execution-flow eigenproblem and the since-spike density states.
"""
import functools
import logging

import numpy as np

from execflow import utils
from execflow.density import DensityOrigin, rho_jih, rho_jjih
from execflow.moments import FLOW_VECTORS, SHARED_VECTORS
from execflow.operators import OperatorMatrix, ddt_operator, gram_operator, matrix_from_moments
from execflow.spectral import GevKind, max_flow_state, solve_gev

logger = logging.getLogger("execflow")

config = utils.read_config_file()

default = {}
default["warmup_ticks_per_dimension"] = config["Indicators"].getint("WARMUP_TICKS_PER_DIMENSION", 2)
default["ready_condition_limit"] = config["Indicators"].getfloat("READY_CONDITION_LIMIT", 1e12)


class FlowSnapshot:
    """
    The matrices of one flow ("V" or "A") in the Q basis, the I-vs-1 eigenproblem
    and, lazily, everything the dynamics need in the ψ basis.

    The snapshot does not refer back to the moment stream, so it can be built from any
    set of moment vectors, e.g. synthetic ones.
    """

    def __init__(self, basis, vectors: dict, p_last: float, ticks: int, flow: str = "V", t_now: float = None,
                 construction: str = None):
        missing = [name for name in FLOW_VECTORS + SHARED_VECTORS if name not in vectors]
        if missing:
            raise ValueError(f"Missing moment vectors: {missing}")

        self.basis = basis
        self.flow = flow
        self.p_last = p_last
        self.ticks = ticks
        self.t_now = t_now
        self.construction = construction

        self.vectors = {name: np.asarray(vectors[name], dtype=float) for name in FLOW_VECTORS + SHARED_VECTORS}
        self.matrices = {name: matrix_from_moments(basis, vector, label=name) for name, vector in self.vectors.items()}
        self.matrices["1"] = gram_operator(basis)
        self.matrices["age"] = matrix_from_moments(basis, basis.age_moments, label="age")

        self.i0 = float(self.vectors["I"][0])
        self.spectral = solve_gev(self.matrices["I"], self.matrices["1"], GevKind.I_VS_1, basis.now_values)
        self.max_flow = max_flow_state(self.spectral)
        self.ready, self.reason = self._readiness()

    @classmethod
    def from_moments(cls, moments, flow: str = "V", construction: str = None) -> "FlowSnapshot":
        vectors = {name: moments.vector(name, flow) for name in FLOW_VECTORS}
        vectors.update({name: moments.vector(name) for name in SHARED_VECTORS})
        return cls(moments.basis, vectors, moments.p_last, moments.ticks, flow, moments.t_now, construction)

    def __repr__(self) -> str:
        return f"FlowSnapshot(flow={self.flow}, ticks={self.ticks}, ready={self.ready}, lambda_IH={self.lambda_ih})"

    def _readiness(self) -> tuple:
        if self.ticks < default["warmup_ticks_per_dimension"] * self.basis.n:
            return False, "warmup"
        if not self.i0 > 0:
            return False, "no flow"
        if self.spectral.regularized or self.spectral.condition() >= default["ready_condition_limit"]:
            return False, "ill-conditioned"
        return True, None

    #########################################################################
    # The maximal flow state
    #########################################################################

    @property
    def lambda_ih(self) -> float:
        return self.max_flow.lambda_ih

    @property
    def psi_ih(self) -> np.ndarray:
        return self.max_flow.psi

    @property
    def lambdas(self) -> np.ndarray:
        return self.spectral.lambdas

    @property
    def psi_now(self) -> np.ndarray:
        return self.spectral.psi_now

    def matrix(self, name: str) -> OperatorMatrix:
        return self.matrices[name]

    def rayleigh(self, name: str, psi=None) -> float:
        """
        ⟨ψ|f|ψ⟩ for ψ = ψ^{IH} unless another Q-basis vector is given.
        """
        return self.matrices[name].rayleigh(self.psi_ih if psi is None else psi)

    #########################################################################
    # ψ basis
    #########################################################################

    def psi(self, name_or_matrix) -> OperatorMatrix:
        matrix = self.matrices[name_or_matrix] if isinstance(name_or_matrix, str) else name_or_matrix
        return self.spectral.to_psi(matrix)

    def ddt(self, name: str, f_now: float) -> OperatorMatrix:
        """
        ‖df/dt‖ in the ψ basis, by parts, with the boundary value f(t_now).
        """
        return ddt_operator(self.basis, self.matrices[name], f_now, self.spectral, label=f"d{name}/dt")

    @functools.cached_property
    def ed_psi(self) -> np.ndarray:
        """
        The ED transform in the ψ basis: ED(ψ_j) = Σ_i E_ij ψ_i.
        """
        alphas = self.spectral.alphas
        return alphas.T @ self.matrices["1"].entries @ self.basis.ed_matrix @ alphas

    @functools.cached_property
    def diag_lambda(self) -> OperatorMatrix:
        return OperatorMatrix(np.diag(self.lambdas), OperatorMatrix.PSI, True, self.spectral, "I")

    #########################################################################
    # Since-spike states
    #########################################################################

    @functools.cached_property
    def rho_jih(self):
        return rho_jih(self.basis, self.psi_ih, self.construction)

    @functools.cached_property
    def rho_jjih(self):
        return rho_jjih(self.basis, self.psi_ih, self.construction, jih=self.rho_jih)

    @functools.cached_property
    def rho_jih_psi(self) -> np.ndarray:
        return self.rho_jih.in_psi(self.spectral)

    @functools.cached_property
    def rho_jjih_psi(self) -> np.ndarray:
        return self.rho_jjih.in_psi(self.spectral)

    def spur(self, f: OperatorMatrix, state: str = "JIH") -> float:
        """
        Spur‖f|ρ‖ against ρ_JIH ("JIH") or ρ_JJIH ("JJIH"), in whatever basis f is in.
        """
        if state not in ("JIH", "JJIH"):
            raise ValueError(f"Unknown since-spike state '{state}'.")
        if f.basis_tag == OperatorMatrix.PSI:
            if f.spectral is not self.spectral:
                f = self.psi(f.spectral.to_q(f))
            rho = self.rho_jih_psi if state == "JIH" else self.rho_jjih_psi
        else:
            rho = self.rho_jih.rho if state == "JIH" else self.rho_jjih.rho
        return float(np.sum(f.entries * rho.T))

    @functools.cached_property
    def vt_spectral(self):
        return solve_gev(self.matrices["W"], self.matrices["age"], GevKind.V_VS_T, self.basis.now_values)

    @functools.cached_property
    def vt_state(self):
        return max_flow_state(self.vt_spectral)

    @functools.cached_property
    def rho_jvt(self):
        return rho_jih(self.basis, self.vt_state.psi, self.construction, origin=DensityOrigin.JVT)

    @functools.cached_property
    def t_ih(self) -> float:
        """
        T_IH = Spur‖1|ρ_JIH‖, the time since the spike.
        """
        return float(np.sum(self.matrices["1"].entries * self.rho_jih.rho))

    @functools.cached_property
    def v_ih(self) -> float:
        """
        V_IH = Spur‖I|ρ_JIH‖, the volume traded since the spike.
        """
        return float(np.sum(self.matrices["I"].entries * self.rho_jih.rho))
