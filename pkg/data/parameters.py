"""
Distribution Parameters
Immutable parameter sets for the distributions used by CGN models and their priors
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from core.exceptions import ContractViolation, DomainError


def _frozen_array(values, ndim: int, name: str) -> np.ndarray:
    """Copy values into a read-only float array of the given rank"""
    array = np.array(values, dtype=float)
    if ndim == 1:
        array = np.atleast_1d(array)
    elif ndim == 2:
        array = np.atleast_2d(array)
    if array.ndim != ndim:
        raise ContractViolation(f"{name} must have {ndim} dimension(s), got shape {array.shape}")
    array.setflags(write=False)
    return array


def is_positive_definite(matrix: np.ndarray, tolerance: float = 0.0) -> bool:
    """
    Check positive definiteness through a Cholesky factorization

    Args:
        matrix: Symmetric matrix
        tolerance: Smallest accepted pivot (squared diagonal of the factor)

    Returns:
        True if the factorization succeeds and every pivot exceeds tolerance
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] != matrix.shape[1]:
        return False
    if matrix.shape[0] == 0:
        return True
    if not np.all(np.isfinite(matrix)):
        return False
    try:
        factor = np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        return False
    return bool(np.min(np.diag(factor)) ** 2 > tolerance)


@dataclass(frozen=True)
class MultinomialParams:
    """Probability vector over the categories of a discrete variable"""
    theta: np.ndarray

    def __post_init__(self):
        theta = _frozen_array(self.theta, 1, "theta")
        if theta.size == 0 or np.any(~np.isfinite(theta)) or np.any(theta <= 0):
            raise DomainError(f"multinomial probabilities must be strictly positive: {theta}")
        if abs(theta.sum() - 1.0) > 1e-12:
            raise DomainError(f"multinomial probabilities sum to {theta.sum()!r}, not 1")
        object.__setattr__(self, "theta", theta)

    @property
    def size(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class DirichletParams:
    """Pseudo-counts of a Dirichlet distribution"""
    psi: np.ndarray

    def __post_init__(self):
        psi = _frozen_array(self.psi, 1, "psi")
        if psi.size == 0 or np.any(~np.isfinite(psi)) or np.any(psi <= 0):
            raise DomainError(f"Dirichlet pseudo-counts must be positive and finite: {psi}")
        object.__setattr__(self, "psi", psi)

    @property
    def size(self) -> int:
        return self.psi.size


@dataclass(frozen=True)
class GaussLinRegParams:
    """
    Gaussian linear regression y ~ N(beta^T z, sigma2)

    beta holds the intercept first, then one coefficient per continuous parent.
    """
    beta: np.ndarray
    sigma2: float

    def __post_init__(self):
        beta = _frozen_array(self.beta, 1, "beta")
        if not np.all(np.isfinite(beta)):
            raise DomainError(f"regression coefficients must be finite: {beta}")
        sigma2 = float(self.sigma2)
        if not np.isfinite(sigma2) or sigma2 <= 0:
            raise DomainError(f"regression variance must be positive, got {sigma2!r}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def dimension(self) -> int:
        return self.beta.size


@dataclass(frozen=True)
class NigParams:
    """
    Normal inverse gamma hyperparameters for (beta, sigma2)

    sigma2 ~ IG(rho, phi) and beta | sigma2 ~ N(mu, sigma2 * V).
    """
    mu: np.ndarray
    V: np.ndarray
    rho: float
    phi: float

    def __post_init__(self):
        mu = _frozen_array(self.mu, 1, "mu")
        V = _frozen_array(self.V, 2, "V")
        if V.shape != (mu.size, mu.size):
            raise ContractViolation(f"V has shape {V.shape}, expected {(mu.size, mu.size)}")
        if not np.all(np.isfinite(mu)):
            raise DomainError(f"NIG mean must be finite: {mu}")
        if np.max(np.abs(V - V.T), initial=0.0) > 1e-10:
            raise DomainError("NIG scale matrix V is not symmetric")
        if not is_positive_definite(V):
            raise DomainError("NIG scale matrix V is not positive definite")
        rho = float(self.rho)
        phi = float(self.phi)
        if not np.isfinite(rho) or rho <= 0:
            raise DomainError(f"NIG shape rho must be positive, got {rho!r}")
        if not np.isfinite(phi) or phi <= 0:
            raise DomainError(f"NIG rate phi must be positive, got {phi!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "phi", phi)

    @property
    def dimension(self) -> int:
        return self.mu.size


@dataclass(frozen=True)
class StudentParams:
    """
    Student distribution, univariate or m-variate

    For the univariate case location and scale are scalars and scale plays the
    role of a variance; for the m-variate case scale is an m x m matrix.
    """
    nu: float
    location: Union[float, np.ndarray]
    scale: Union[float, np.ndarray]

    def __post_init__(self):
        nu = float(self.nu)
        if not np.isfinite(nu) or nu <= 0:
            raise DomainError(f"Student degrees of freedom must be positive, got {nu!r}")
        object.__setattr__(self, "nu", nu)
        if np.ndim(self.location) == 0 and np.ndim(self.scale) == 0:
            scale = float(self.scale)
            if not np.isfinite(scale) or scale <= 0:
                raise DomainError(f"Student scale must be positive, got {scale!r}")
            object.__setattr__(self, "location", float(self.location))
            object.__setattr__(self, "scale", scale)
            return
        location = _frozen_array(self.location, 1, "location")
        scale = _frozen_array(self.scale, 2, "scale")
        if scale.shape != (location.size, location.size):
            raise ContractViolation(f"scale has shape {scale.shape}, expected "
                                    f"{(location.size, location.size)}")
        if not is_positive_definite(scale):
            raise DomainError("Student scale matrix is singular or not positive definite")
        object.__setattr__(self, "location", location)
        object.__setattr__(self, "scale", scale)

    @property
    def dimension(self) -> int:
        return 1 if np.ndim(self.location) == 0 else int(np.size(self.location))
