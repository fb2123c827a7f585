"""
Operator matrices ⟨Q_j|f|Q_k⟩ built from moment vectors, their conversion between
the raw Q basis and a ψ eigenbasis, and the integration-by-parts time derivative.
"""
import logging

import numpy as np
import scipy.linalg

logger = logging.getLogger("execflow")


class BasisMismatchError(ValueError):
    pass


class OperatorMatrix:
    """
    An n x n matrix of an observable, tagged with the basis it is expressed in.

    In the ψ basis the matrix refers to the spectral state it was converted with,
    kept in `spectral`.
    """

    Q = "Q"
    PSI = "Psi"

    def __init__(self, entries, basis_tag: str = Q, hermitian: bool = True, spectral=None, label: str = None):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise BasisMismatchError(f"Operator matrices must be square, got shape {entries.shape}.")
        if basis_tag not in (self.Q, self.PSI):
            raise BasisMismatchError(f"Unknown basis tag '{basis_tag}'.")
        if basis_tag == self.PSI and spectral is None:
            raise BasisMismatchError("A ψ-basis operator needs the spectral state that defines its basis.")

        self.entries = entries
        self.basis_tag = basis_tag
        self.hermitian = hermitian
        self.spectral = spectral
        self.label = label

    def __repr__(self) -> str:
        return f"OperatorMatrix(label={self.label}, basis={self.basis_tag}, n={self.n}, hermitian={self.hermitian})"

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        scale = max(np.max(np.abs(self.entries)), np.finfo(float).tiny)
        return np.max(np.abs(self.entries - self.entries.T)) <= rtol * scale

    def rayleigh(self, psi) -> float:
        """
        ⟨ψ|f|ψ⟩ for a coefficient vector ψ in this matrix's basis.
        """
        psi = np.asarray(psi, dtype=float)
        return float(psi @ self.entries @ psi)

    def like(self, entries, hermitian: bool = None, label: str = None) -> "OperatorMatrix":
        """
        A new operator in the same basis as this one.
        """
        return OperatorMatrix(entries, self.basis_tag,
                              self.hermitian if hermitian is None else hermitian,
                              self.spectral, label if label is not None else self.label)

    def _check_compatible(self, other: "OperatorMatrix") -> None:
        if other.basis_tag != self.basis_tag or other.n != self.n:
            raise BasisMismatchError(f"Cannot combine {self} with {other}.")
        if self.basis_tag == self.PSI and other.spectral is not self.spectral:
            raise BasisMismatchError(f"{self} and {other} are expressed in different ψ bases.")

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check_compatible(other)
        return self.like(self.entries + other.entries, self.hermitian and other.hermitian)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        self._check_compatible(other)
        return self.like(self.entries - other.entries, self.hermitian and other.hermitian)

    def __mul__(self, factor: float) -> "OperatorMatrix":
        return self.like(float(factor) * self.entries)

    __rmul__ = __mul__

    def __truediv__(self, factor: float) -> "OperatorMatrix":
        return self.like(self.entries / float(factor))

    def __neg__(self) -> "OperatorMatrix":
        return self.like(-self.entries)


def matrix_from_moments(basis, moments, label: str = None) -> OperatorMatrix:
    """
    M_jk = Σ_m c_m^{jk} ⟨Q_m f⟩.

    Args:
        basis (Basis): The basis the moments were sampled in.
        moments (array): The 2n-1 moments ⟨Q_m f⟩.
        label (str, optional): Name of the observable, for diagnostics.
    """
    moments = np.asarray(moments, dtype=float)
    if moments.shape != (basis.n_moments,):
        raise BasisMismatchError(f"Expected {basis.n_moments} moments for {basis}, got shape {moments.shape}.")
    return OperatorMatrix(basis.multiplication_tensor @ moments, OperatorMatrix.Q, True, None, label)


def gram_operator(basis) -> OperatorMatrix:
    """
    The Gram matrix ⟨Q_j|Q_k⟩ over the full support.
    """
    return matrix_from_moments(basis, basis.unit_moments, label="1")


def convert_basis(matrix: OperatorMatrix, target: str, spectral) -> OperatorMatrix:
    """
    Converts an operator between the Q basis and the eigenbasis of a spectral state:
    Q -> ψ is αᵀ M α, and ψ -> Q is B α M αᵀ B, with B the right-hand matrix of the
    eigenproblem (the Gram matrix for the execution-flow problem).
    """
    if matrix.n != spectral.n:
        raise BasisMismatchError(f"{matrix} does not match the dimension {spectral.n} of the spectral state.")

    if matrix.basis_tag == target:
        if target == OperatorMatrix.PSI and matrix.spectral is not spectral:
            # ψ_a -> Q -> ψ_b
            return convert_basis(convert_basis(matrix, OperatorMatrix.Q, matrix.spectral), target, spectral)
        return matrix

    alphas = spectral.alphas
    if target == OperatorMatrix.PSI:
        entries = alphas.T @ matrix.entries @ alphas
        return OperatorMatrix(entries, OperatorMatrix.PSI, matrix.hermitian, spectral, matrix.label)

    if target == OperatorMatrix.Q:
        b = spectral.b_matrix
        entries = b @ alphas @ matrix.entries @ alphas.T @ b
        return OperatorMatrix(entries, OperatorMatrix.Q, matrix.hermitian, None, matrix.label)

    raise BasisMismatchError(f"Unknown basis tag '{target}'.")


def ddt_operator(basis, f, f_now: float, spectral=None, label: str = None) -> OperatorMatrix:
    """
    The matrix of df/dt obtained by integrating by parts:

        ⟨ψ_j|df/dt|ψ_k⟩ = f_now ψ_j(x_0) ψ_k(x_0) - ⟨ED(ψ_j)|f|ψ_k⟩ - ⟨ψ_j|f|ED(ψ_k)⟩

    Args:
        basis (Basis): The basis of the moments.
        f (OperatorMatrix or array): ‖f‖ in the Q basis, or the moments ⟨Q_m f⟩.
        f_now (float): The boundary value f(t_now). Must be given explicitly.
        spectral (SpectralState, optional): When given, the result is converted to its ψ basis.
        label (str, optional): Name of the result.

    Returns:
        OperatorMatrix: ‖df/dt‖, in the Q basis or in the ψ basis of `spectral`.
    """
    if f_now is None:
        raise ValueError("The boundary value f(t_now) must be given explicitly.")

    if not isinstance(f, OperatorMatrix):
        f = matrix_from_moments(basis, f)
    elif f.basis_tag != OperatorMatrix.Q:
        f = convert_basis(f, OperatorMatrix.Q, f.spectral)

    now = basis.now_values[:basis.n]
    ed = basis.ed_matrix
    entries = f_now * np.outer(now, now) - ed.T @ f.entries - f.entries @ ed

    result = OperatorMatrix(entries, OperatorMatrix.Q, True, None, label or (f"d{f.label}/dt" if f.label else None))
    if spectral is not None:
        result = convert_basis(result, OperatorMatrix.PSI, spectral)
    return result


def operator_product(a: OperatorMatrix, b: OperatorMatrix, gram: OperatorMatrix = None, label: str = None) -> OperatorMatrix:
    """
    The approximate product ‖a‖·‖b‖ ≈ ‖ab‖. In a Gram-orthonormal ψ basis it is the
    matrix product; in the Q basis the inverse Gram matrix sits in between.
    """
    a._check_compatible(b)

    if a.basis_tag == OperatorMatrix.PSI:
        entries = a.entries @ b.entries
    else:
        if gram is None:
            raise ValueError("Products in the Q basis need the Gram matrix.")
        entries = a.entries @ scipy.linalg.solve(gram.entries, b.entries, assume_a="pos")

    return a.like(entries, hermitian=False, label=label)
