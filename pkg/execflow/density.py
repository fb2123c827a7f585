"""
Density matrices ρ_P reproducing averages with a polynomial weight,
Spur‖f|ρ_P‖ = ⟨P f⟩, and the since-spike states built from ψ^{IH}.
"""
import enum
import logging

import numpy as np
import scipy.linalg

from execflow import utils
from execflow.operators import OperatorMatrix, convert_basis

logger = logging.getLogger("execflow")

config = utils.read_config_file()

default = {}
default["construction"] = config["Approximations"].get("DENSITY_CONSTRUCTION", "shift_mixture")

CONSTRUCTIONS = ("shift_mixture", "min_norm")

# relative residual above which the linear system for ρ is considered inconsistent
CONSISTENCY_TOLERANCE = 1e-8


class DensityOrigin(enum.Enum):
    FROM_POLY = "FromPoly"
    JIH = "JIH"
    JJIH = "JJIH"
    JVT = "JVT"


class DensityState:
    """
    A symmetric n x n density matrix, stored in the Q basis. Its eigenvalues may be negative.
    """

    def __init__(self, rho, origin: DensityOrigin, consistent: bool = True):
        self.rho = np.asarray(rho, dtype=float)
        self.origin = origin
        self.consistent = consistent

    def __repr__(self) -> str:
        return f"DensityState(origin={self.origin.value}, n={len(self.rho)}, negative={self.negative_count()})"

    def negative_count(self, rtol: float = 1e-10) -> int:
        """
        Number of eigenvalues below -rtol·max|eigenvalue|.
        """
        values = scipy.linalg.eigvalsh(0.5 * (self.rho + self.rho.T))
        scale = max(np.max(np.abs(values)), np.finfo(float).tiny)
        return int(np.sum(values < -rtol * scale))

    def in_psi(self, spectral) -> np.ndarray:
        """
        The matrix in the ψ basis. Density matrices transform contravariantly
        to operators: ρ_ψ = αᵀ B ρ B α.
        """
        b = spectral.b_matrix
        return spectral.alphas.T @ b @ self.rho @ b @ spectral.alphas

    @classmethod
    def from_psi(cls, rho_psi, spectral, origin: DensityOrigin) -> "DensityState":
        return cls(spectral.alphas @ rho_psi @ spectral.alphas.T, origin)


def square_coefficients(basis, psi) -> np.ndarray:
    """
    Coefficients of ψ² = Σ_m (Σ_jk ψ_j ψ_k c_m^{jk}) Q_m.
    """
    psi = np.asarray(psi, dtype=float)
    return np.einsum("j,k,jkm->m", psi, psi, basis.multiplication_tensor)


def density_from_poly(basis, coef, origin: DensityOrigin = DensityOrigin.FROM_POLY) -> DensityState:
    """
    The minimum-Frobenius-norm symmetric ρ with Σ_jk ρ_kj c_m^{jk} = P_m.

    Args:
        basis (Basis): The basis P is expanded in.
        coef (array): The coefficients P_m, at most 2n-1 of them.
        origin (DensityOrigin, optional): Tag of the resulting state.
    """
    coef = np.asarray(coef, dtype=float)
    if len(coef) > basis.n_moments:
        raise ValueError(f"Polynomial of degree {len(coef) - 1} exceeds the moment support 2n-2 = {basis.n_moments - 1}.")
    target = np.concatenate([coef, np.zeros(basis.n_moments - len(coef))])

    n = basis.n
    # one row per m, one column per (j, k); the c tensor is symmetric in (j, k), so the
    # minimum-norm solution is symmetric too
    system = basis.multiplication_tensor.reshape(n * n, basis.n_moments).T
    solution, _, _, _ = scipy.linalg.lstsq(system, target)
    rho = solution.reshape(n, n)
    rho = 0.5 * (rho + rho.T)

    residual = np.linalg.norm(system @ rho.ravel() - target)
    consistent = residual <= CONSISTENCY_TOLERANCE * max(np.linalg.norm(target), 1.0)
    if not consistent:
        logger.debug(f"Density system inconsistent, residual {residual:.3g}.")

    return DensityState(rho, origin, consistent)


def _lyapunov(basis, source: np.ndarray) -> np.ndarray:
    # E ρ + ρ Eᵀ = source makes d/dt[ω qᵀρq] = ω qᵀ source q
    rho = scipy.linalg.solve_continuous_lyapunov(basis.ed_matrix, source)
    return 0.5 * (rho + rho.T)


def rho_jih(basis, psi, construction: str = None, origin: DensityOrigin = DensityOrigin.JIH) -> DensityState:
    """
    ρ_JIH, the density matrix of J(ψ²): the state "since the ψ spike till now".

    Args:
        basis (Basis): The basis of ψ.
        psi (array): Normalized coefficients of ψ^{IH} in the Q basis.
        construction (str, optional): "shift_mixture" (the default) or "min_norm".
        origin (DensityOrigin, optional): Tag of the state; JVT for the V/T state.
    """
    construction = construction or default["construction"]
    psi = np.asarray(psi, dtype=float)

    if construction == "shift_mixture":
        return DensityState(_lyapunov(basis, np.outer(psi, psi)), origin)
    if construction == "min_norm":
        return density_from_poly(basis, basis.j_matrix @ square_coefficients(basis, psi), origin)
    raise ValueError(f"Unknown density construction '{construction}'. Valid ones are: {CONSTRUCTIONS}")


def rho_jjih(basis, psi, construction: str = None, jih: DensityState = None) -> DensityState:
    """
    ρ_JJIH, the density matrix of J(J(ψ²)).
    """
    construction = construction or default["construction"]

    if construction == "shift_mixture":
        if jih is None:
            jih = rho_jih(basis, psi, construction)
        return DensityState(_lyapunov(basis, jih.rho), DensityOrigin.JJIH)
    if construction == "min_norm":
        j = basis.j_matrix
        return density_from_poly(basis, j @ j @ square_coefficients(basis, psi), DensityOrigin.JJIH)
    raise ValueError(f"Unknown density construction '{construction}'. Valid ones are: {CONSTRUCTIONS}")


def spur(f: OperatorMatrix, rho, spectral=None) -> float:
    """
    Spur‖f|ρ‖ = Σ_jk f_jk ρ_kj.

    Args:
        f (OperatorMatrix): The operator, in either basis.
        rho (DensityState or array): The density matrix. A plain array is taken to be in f's basis.
        spectral (SpectralState, optional): Used to bring a Q-basis operator into the ψ basis
            of a ψ-basis array, when the two differ.
    """
    if isinstance(rho, DensityState):
        if f.basis_tag == OperatorMatrix.PSI:
            matrix = rho.in_psi(f.spectral)
        else:
            matrix = rho.rho
    else:
        matrix = np.asarray(rho, dtype=float)
        if spectral is not None and f.basis_tag == OperatorMatrix.Q:
            f = convert_basis(f, OperatorMatrix.PSI, spectral)

    return float(np.sum(f.entries * matrix.T))
