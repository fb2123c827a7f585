"""
Measures and polynomial bases.

Every average in execflow is taken against the exponential time weight
ω(t) = exp(-(t_now - t)/τ) and expanded over a polynomial basis Q_m(x(t)).
Two families of x(t) are supported:

  - translation kinds (Laguerre, Monomial): x = (t - t_now)/τ on (-∞, 0];
  - exponential kinds (LegendreShifted, ChebyshevShifted): x = exp(-(t_now - t)/τ) on (0, 1].

The basis objects below hold the structural transforms everything else is
built from: the multiplication coefficients c_m^{jk}, the ED transform
(time differentiation under the weight) and the J transform (antidifferentiation
under the weight), plus the moment shift operator used by the streaming integrator.
"""
import enum
import functools
import logging
from typing import NamedTuple

import numpy as np
from numpy.polynomial import Chebyshev, Laguerre, Legendre, Polynomial
from numpy.polynomial import chebyshev, laguerre, legendre, polynomial
from numpy.polynomial import polyutils
import scipy.linalg
import scipy.special

from execflow import utils

logger = logging.getLogger("execflow")

config = utils.read_config_file()

default = {}
default["measure"] = config["Basis"].get("MEASURE", "LegendreShifted")
default["n"] = config["Basis"].getint("N", 12)
default["tau"] = config["Basis"].getfloat("TAU", 256.0)
default["shift_cache_size"] = config["Basis"].getint("SHIFT_CACHE_SIZE", 256)


class UnsupportedBasisError(ValueError):
    pass


class BasisKind(enum.Enum):
    LAGUERRE = "Laguerre"
    LEGENDRE_SHIFTED = "LegendreShifted"
    MONOMIAL = "Monomial"
    CHEBYSHEV_SHIFTED = "ChebyshevShifted"

    @classmethod
    def from_name(cls, name: str) -> "BasisKind":
        """
        Resolves a basis kind from its name, case-insensitively.
        """
        if isinstance(name, BasisKind):
            return name

        for kind in cls:
            if kind.value.lower() == str(name).strip().lower():
                return kind

        raise UnsupportedBasisError(f"Unknown basis kind '{name}'. Valid kinds are: {[k.value for k in cls]}")

    @property
    def exponential_time(self) -> bool:
        return self in (BasisKind.LEGENDRE_SHIFTED, BasisKind.CHEBYSHEV_SHIFTED)

    @property
    def stability_bound(self) -> int:
        return 150 if self.exponential_time else 50


# series class, domain and window for each kind; the domain -> window map realizes Q_m(x)
_SERIES = {
    BasisKind.LAGUERRE: (Laguerre, [0.0, -1.0], [0.0, 1.0], laguerre.lagvander),
    BasisKind.MONOMIAL: (Polynomial, [-1.0, 1.0], [-1.0, 1.0], polynomial.polyvander),
    BasisKind.LEGENDRE_SHIFTED: (Legendre, [0.0, 1.0], [-1.0, 1.0], legendre.legvander),
    BasisKind.CHEBYSHEV_SHIFTED: (Chebyshev, [0.0, 1.0], [-1.0, 1.0], chebyshev.chebvander),
}


class MeasureParams(NamedTuple):
    tau: float
    n: int

    def validate(self, kind: BasisKind) -> "MeasureParams":
        if not self.tau > 0:
            raise UnsupportedBasisError(f"The exponent time must be positive, got tau={self.tau}.")
        if self.n < 1:
            raise UnsupportedBasisError(f"The basis dimension must be at least 1, got n={self.n}.")
        if self.n > kind.stability_bound:
            raise UnsupportedBasisError(f"n={self.n} exceeds the stability bound {kind.stability_bound} of the {kind.value} basis.")
        return self


class MultiplicationResult(NamedTuple):
    coef: np.ndarray
    unstable: bool


class Basis:
    """
    A measure together with its polynomial basis Q_0 .. Q_{2n-2}.

    Instances are immutable after construction and can be shared between
    instruments and threads.
    """

    def __init__(self, kind, tau: float = None, n: int = None, shift_cache_size: int = None):
        self.kind = BasisKind.from_name(kind if kind is not None else default["measure"])
        self.params = MeasureParams(float(tau if tau is not None else default["tau"]),
                                    int(n if n is not None else default["n"])).validate(self.kind)

        self.n = self.params.n
        self.tau = self.params.tau
        self.n_moments = 2 * self.n - 1

        self._series_class, self.domain, self.window, self._vander = _SERIES[self.kind]
        self._identity = self._series_class.identity(domain=self.domain, window=self.window)

        self.x0 = 1.0 if self.kind.exponential_time else 0.0

        # collocation nodes (window coordinates) and row weights used to re-project
        # point values onto the basis
        self._nodes, self._node_weights = self._collocation(self.n_moments)

        self.now_values = self.values(np.array([self.x0]), self.n_moments)[0]
        self.multiplication_tensor = self._build_multiplication_tensor()
        self.ed_matrix = self._transform_matrix(self.ed_transform, self.n)
        self.j_matrix = self._transform_matrix(self.j_transform, self.n_moments)
        self.unit_moments = self._full_support_moments(1)
        self.age_moments = self._full_support_moments(2)
        self.gram = self.multiplication_tensor @ self.unit_moments

        cache_size = shift_cache_size if shift_cache_size is not None else default["shift_cache_size"]
        self._cached_shift = functools.lru_cache(maxsize=cache_size)(self._shift_matrix)

        logger.debug(f"Created {self}.")

    def __repr__(self) -> str:
        return f"Basis(kind={self.kind.value}, n={self.n}, tau={self.tau})"

    #########################################################################
    # Polynomials
    #########################################################################

    def poly(self, coef):
        """
        Returns the polynomial Σ coef_m Q_m(x) as a numpy series in this basis.
        """
        return self._series_class(np.atleast_1d(np.asarray(coef, dtype=float)), domain=self.domain, window=self.window)

    def q(self, m: int):
        coef = np.zeros(m + 1)
        coef[m] = 1.0
        return self.poly(coef)

    def coefficients(self, series, size: int) -> np.ndarray:
        """
        Returns the coefficient vector of the series, zero-padded or truncated to the given size.
        """
        coef = np.asarray(series.coef, dtype=float)
        if len(coef) >= size:
            return coef[:size].copy()
        return np.concatenate([coef, np.zeros(size - len(coef))])

    def values(self, x, size: int) -> np.ndarray:
        """
        Returns the matrix of Q_m(x_i), m < size, one row per point.
        """
        u = polyutils.mapdomain(np.atleast_1d(np.asarray(x, dtype=float)), self.domain, self.window)
        return self._vander(u, size - 1)

    def x_of_age(self, age):
        """
        Maps the age t_now - t (seconds, non-negative) to the basis variable x.
        """
        age = np.asarray(age, dtype=float)
        if self.kind.exponential_time:
            return np.exp(-age / self.tau)
        return -age / self.tau

    def weight(self, age):
        return np.exp(-np.asarray(age, dtype=float) / self.tau)

    #########################################################################
    # Structural transforms
    #########################################################################

    def multiply_coeffs(self, j: int, k: int) -> MultiplicationResult:
        """
        Expands Q_j Q_k = Σ_m c_m^{jk} Q_m.

        Args:
            j (int): Index of the first basis function.
            k (int): Index of the second basis function.

        Returns:
            MultiplicationResult: the coefficients c^{jk} (length j+k+1) and a flag telling
            whether the order exceeds the stability bound of the basis.
        """
        if j < 0 or k < 0:
            raise ValueError(f"Basis indices must be non-negative, got j={j}, k={k}.")

        unstable = j + k > 2 * (self.kind.stability_bound - 1)
        if unstable:
            logger.warning(f"Product Q_{j} Q_{k} exceeds the stability bound of the {self.kind.value} basis.")

        return MultiplicationResult(self.coefficients(self.q(j) * self.q(k), j + k + 1), unstable)

    def ed_transform(self, psi):
        """
        The ED transform: d/dt[ω ψ φ] = ω [ED(ψ) φ + ψ ED(φ)].

        It is (dψ/dx + ψ/2)/τ for the translation kinds and (x dψ/dx + ψ/2)/τ for
        the exponential kinds.
        """
        if self.kind.exponential_time:
            derivative = self._identity * psi.deriv()
        else:
            derivative = psi.deriv()
        return (derivative + 0.5 * psi) / self.tau

    def j_transform(self, p):
        """
        The J transform: ∫_{-∞}^{t} p(x(t')) ω(t') dt' = ω(t) J(p)(x(t)).

        For the translation kinds J(p) = τ Σ_k (-1)^k p^{(k)}; for the exponential kinds
        J(p) = (τ/x) ∫_0^x p dx', evaluated by collocation.
        """
        if self.kind.exponential_time:
            size = max(len(p.coef), self.n_moments)
            return self.poly(self._exponential_j_matrix(size) @ self.coefficients(p, size))

        result = self.poly([0.0])
        term = p
        sign = 1.0
        for _ in range(len(p.coef)):
            result = result + sign * term
            term = term.deriv()
            sign = -sign
        return self.tau * result

    def shift_operator(self, delta_t: float) -> np.ndarray:
        """
        Returns the (2n-1)x(2n-1) matrix K such that moments of a frozen history
        at t_now + delta_t are K @ (moments at t_now).
        """
        if delta_t < 0:
            raise ValueError(f"Ticks must be time-ordered, got a negative time step {delta_t}.")
        if delta_t == 0:
            return np.eye(self.n_moments)
        return self._cached_shift(float(delta_t) / self.tau)

    #########################################################################
    # Internals
    #########################################################################

    def _collocation(self, size: int):
        if self.kind in (BasisKind.LAGUERRE, BasisKind.MONOMIAL):
            nodes, weights = laguerre.laggauss(size)
        elif self.kind == BasisKind.LEGENDRE_SHIFTED:
            nodes, weights = legendre.leggauss(size)
        else:
            nodes, weights = chebyshev.chebgauss(size)
        return nodes, np.sqrt(weights)

    def _project(self, node_values: np.ndarray) -> np.ndarray:
        """
        Basis coefficients of degree < 2n-1 polynomials from their values at the collocation nodes.
        """
        vander = self._vander(self._nodes, self.n_moments - 1) * self._node_weights[:, None]
        return scipy.linalg.solve(vander, node_values * self._node_weights[:, None])

    def _node_points(self) -> np.ndarray:
        return polyutils.mapdomain(self._nodes, self.window, self.domain)

    def _shift_matrix(self, ratio: float) -> np.ndarray:
        decay = np.exp(-ratio)
        size = self.n_moments

        if self.kind == BasisKind.MONOMIAL:
            # (x - a)^m expands exactly by the binomial theorem
            m = np.arange(size)[:, None]
            k = np.arange(size)[None, :]
            shift = np.where(k <= m, scipy.special.comb(m, k) * (-ratio) ** np.clip(m - k, 0, None), 0.0)
            return decay * shift

        x = self._node_points()
        shifted = x * decay if self.kind.exponential_time else x - ratio
        return decay * self._project(self.values(shifted, size)).T

    @functools.lru_cache(maxsize=8)
    def _exponential_j_matrix(self, size: int) -> np.ndarray:
        # J(Q_m)(x) = τ ∫_0^1 Q_m(x s) ds, by Gauss-Legendre in s, re-projected by collocation
        s, w = legendre.leggauss(size)
        s = 0.5 * (s + 1.0)
        w = 0.5 * w

        nodes, node_weights = legendre.leggauss(size) if self.kind == BasisKind.LEGENDRE_SHIFTED else chebyshev.chebgauss(size)
        node_weights = np.sqrt(node_weights)
        x = polyutils.mapdomain(nodes, self.window, self.domain)

        inner = self.values((x[:, None] * s[None, :]).ravel(), size).reshape(size, size, size)
        node_values = self.tau * np.einsum("s,ism->im", w, inner)

        vander = self._vander(nodes, size - 1) * node_weights[:, None]
        return scipy.linalg.solve(vander, node_values * node_weights[:, None])

    def _build_multiplication_tensor(self) -> np.ndarray:
        tensor = np.zeros((self.n, self.n, self.n_moments))
        for j in range(self.n):
            for k in range(j, self.n):
                coef = self.multiply_coeffs(j, k).coef
                tensor[j, k, :len(coef)] = coef
                tensor[k, j, :len(coef)] = coef
        return tensor

    def _transform_matrix(self, transform, size: int) -> np.ndarray:
        # column k holds the coefficients of transform(Q_k)
        return np.column_stack([self.coefficients(transform(self.q(k)), size) for k in range(size)])

    def _full_support_moments(self, order: int) -> np.ndarray:
        """
        ∫ ω Q_m dt (order 1) and ∫ ω Q_m (t_now - t) dt (order 2) over the full support.
        """
        transform = self.j_matrix
        if order == 2:
            transform = self.j_matrix @ self.j_matrix
        return self.now_values @ transform


def create_basis(measure: str = None, n: int = None, tau: float = None) -> Basis:
    """
    Convenience constructor falling back to the configured defaults.
    """
    return Basis(measure, tau=tau, n=n)
