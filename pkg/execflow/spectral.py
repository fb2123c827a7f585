"""
Generalized eigenproblems ‖A‖ψ = λ‖B‖ψ and the states derived from them.
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
default["degeneracy_tolerance"] = config["Indicators"].getfloat("DEGENERACY_TOLERANCE", 1e-9)

# relative floor for the eigenvalues of B when it cannot be factorized by Cholesky
B_FLOOR = 1e-12


class GevKind(enum.Enum):
    I_VS_1 = "I_vs_1"
    V_VS_T = "V_vs_T"
    DIDT_VS_1 = "dIdt_vs_1"


class SpectralState:
    """
    Eigenvalues (ascending) and B-orthonormal eigenvectors α^{[i]} (columns of `alphas`)
    of a generalized eigenproblem.
    """

    def __init__(self, lambdas, alphas, which: GevKind, a_matrix, b_matrix, now_values,
                 clusters: list, regularized: bool = False):
        self.lambdas = lambdas
        self.alphas = alphas
        self.which = which
        self.a_matrix = a_matrix
        self.b_matrix = b_matrix
        self.now_values = now_values
        self.clusters = clusters
        self.regularized = regularized

    def __repr__(self) -> str:
        return f"SpectralState(which={self.which.value}, n={self.n}, lambdas={self.lambdas})"

    @property
    def n(self) -> int:
        return len(self.lambdas)

    @property
    def psi_now(self) -> np.ndarray:
        """
        ψ^{[i]}(x_0) for every eigenvector.
        """
        return self.alphas.T @ self.now_values

    def psi(self, i: int) -> np.ndarray:
        return self.alphas[:, i].copy()

    def to_psi(self, matrix: OperatorMatrix) -> OperatorMatrix:
        return convert_basis(matrix, OperatorMatrix.PSI, self)

    def to_q(self, matrix: OperatorMatrix) -> OperatorMatrix:
        return convert_basis(matrix, OperatorMatrix.Q, self)

    def residual(self) -> float:
        """
        max |A α - λ B α|, the accuracy of the eigenpairs.
        """
        return float(np.max(np.abs(self.a_matrix @ self.alphas - self.b_matrix @ self.alphas * self.lambdas)))

    def condition(self) -> float:
        """
        λ_max/λ_min, or infinity when the smallest eigenvalue is not positive.
        """
        if self.lambdas[0] <= 0:
            return float("inf")
        return float(self.lambdas[-1] / self.lambdas[0])


def _whiten(b: np.ndarray):
    """
    Returns W with Wᵀ B W = 1 and a flag telling whether B had to be regularized.
    """
    try:
        lower = scipy.linalg.cholesky(b, lower=True)
        return scipy.linalg.solve_triangular(lower, np.eye(len(b)), lower=True).T, False
    except scipy.linalg.LinAlgError:
        values, vectors = scipy.linalg.eigh(b)
        floor = B_FLOOR * max(np.max(np.abs(values)), np.finfo(float).tiny)
        clamped = np.maximum(values, floor)
        logger.debug(f"B is not positive definite (min eigenvalue {values[0]:.3g}); regularized at {floor:.3g}.")
        return vectors / np.sqrt(clamped), True


def _clusters(lambdas: np.ndarray, tolerance: float) -> list:
    scale = max(np.max(np.abs(lambdas)), np.finfo(float).tiny)
    clusters = [[0]]
    for i in range(1, len(lambdas)):
        if lambdas[i] - lambdas[clusters[-1][0]] <= tolerance * scale:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    return clusters


def solve_gev(a, b, which: GevKind = GevKind.I_VS_1, now_values=None, tolerance: float = None) -> SpectralState:
    """
    Solves ‖A‖α = λ‖B‖α by whitening B.

    Eigenvalues are sorted ascending. Inside a cluster of numerically equal
    eigenvalues the vectors are rotated so that the first one carries all of ψ(x_0)
    and the others vanish at x_0. Every ψ^{[i]}(x_0) is made non-negative.

    Args:
        a (OperatorMatrix or array): The symmetric matrix A, in the Q basis.
        b (OperatorMatrix or array): The positive definite matrix B, in the Q basis.
        which (GevKind): Which eigenproblem this is.
        now_values (array, optional): Q_k(x_0), used for the ordering and sign conventions.
        tolerance (float, optional): Relative tolerance of degenerate clusters.

    Returns:
        SpectralState: the eigenpairs.
    """
    a = np.asarray(a.entries if isinstance(a, OperatorMatrix) else a, dtype=float)
    b = np.asarray(b.entries if isinstance(b, OperatorMatrix) else b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"A and B must have the same shape, got {a.shape} and {b.shape}.")

    n = len(a)
    a = 0.5 * (a + a.T)
    b = 0.5 * (b + b.T)
    now = np.zeros(n) if now_values is None else np.asarray(now_values, dtype=float)[:n]
    tolerance = default["degeneracy_tolerance"] if tolerance is None else tolerance

    whitening, regularized = _whiten(b)
    reduced = whitening.T @ a @ whitening
    lambdas, vectors = scipy.linalg.eigh(0.5 * (reduced + reduced.T))
    alphas = whitening @ vectors

    clusters = _clusters(lambdas, tolerance)
    for cluster in clusters:
        if len(cluster) < 2:
            continue
        at_now = alphas[:, cluster].T @ now
        norm = np.linalg.norm(at_now)
        if norm == 0:
            continue
        # orthonormal rotation whose first column is along ψ(x_0)
        rotation, _ = np.linalg.qr(np.column_stack([at_now / norm, np.eye(len(cluster))]))
        alphas[:, cluster] = alphas[:, cluster] @ rotation[:, :len(cluster)]

    if any(len(cluster) > 1 for cluster in clusters):
        lambdas = np.einsum("ki,kl,li->i", alphas, a, alphas)

    signs = np.where(alphas.T @ now < 0, -1.0, 1.0)
    alphas = alphas * signs

    return SpectralState(lambdas, alphas, which, a, b, now, clusters, regularized)


def localized_state(basis, y: float) -> np.ndarray:
    """
    The normalized state localized at x = y:

        ψ_y(x) = Σ_jk Q_j(x) G^{-1}_jk Q_k(y) / sqrt(Σ_jk Q_j(y) G^{-1}_jk Q_k(y))
    """
    qy = basis.values(np.array([y]), basis.n)[0]
    weights = scipy.linalg.solve(basis.gram, qy, assume_a="pos")
    return weights / np.sqrt(qy @ weights)


class MaxFlowState:
    """
    The state ψ^{IH} of maximal execution flow, with its eigenvalue λ^{IH} and its
    projection on the state localized now.
    """

    def __init__(self, psi, lambda_ih: float, projection_now: float, index: int, spectral: SpectralState):
        self.psi = psi
        self.lambda_ih = lambda_ih
        self.projection_now = projection_now
        self.index = index
        self.spectral = spectral

    def __repr__(self) -> str:
        return f"MaxFlowState(lambda_IH={self.lambda_ih}, projection_now={self.projection_now})"


def max_flow_state(spectral: SpectralState) -> MaxFlowState:
    """
    Picks ψ^{IH}, the representative of the top eigenvalue cluster that is most
    localized now, and its projection [ψ^{IH}(x_0)]²/Σ_k[ψ^{[k]}(x_0)]².
    """
    if spectral.which not in (GevKind.I_VS_1, GevKind.V_VS_T):
        raise ValueError(f"The maximal flow state is defined for I_vs_1 and V_vs_T eigenproblems, not {spectral.which.value}.")

    index = spectral.clusters[-1][0]
    at_now = spectral.psi_now
    total = float(at_now @ at_now)
    projection = float(at_now[index] ** 2 / total) if total > 0 else 0.0

    return MaxFlowState(spectral.psi(index), float(spectral.lambdas[index]), min(max(projection, 0.0), 1.0),
                        index, spectral)
