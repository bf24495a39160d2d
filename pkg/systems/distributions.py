"""
Distribution Toolkit
Log-densities and conjugate update/predictive formulas for every distribution
a CGN model or its DHDNIG hyper-distribution is made of.

All densities are returned in log space.
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, stats

from core.exceptions import ContractViolation, DomainError, NumericalInstabilityError
from data.parameters import (
    DirichletParams, GaussLinRegParams, MultinomialParams, NigParams, StudentParams,
    is_positive_definite,
)

logger = logging.getLogger(__name__)


def log_gaussian(y: float, mean: float, variance: float) -> float:
    """
    Univariate normal log-density ln N(y | mean, variance)

    Args:
        y: Evaluation point
        mean: Distribution mean
        variance: Distribution variance, must be positive

    Returns:
        Log-density at y
    """
    if not variance > 0:
        raise DomainError(f"variance must be positive, got {variance!r}")
    return float(stats.norm.logpdf(y, loc=mean, scale=np.sqrt(variance)))


def log_mv_student(x, params: StudentParams) -> float:
    """
    Student log-density, univariate or m-variate

    The univariate scale is variance-like: ln St(x | nu, mu, s) equals the
    m=1 case of the matrix form with scale [[s]].
    """
    if params.dimension == 1 and np.ndim(params.location) == 0:
        if np.size(x) != 1:
            raise ContractViolation(f"expected a scalar point, got shape {np.shape(x)}")
        point = float(np.ravel(x)[0])
        return float(stats.t.logpdf(point, df=params.nu, loc=params.location,
                                    scale=np.sqrt(params.scale)))

    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.shape != params.location.shape:
        raise ContractViolation(f"point has shape {point.shape}, "
                                f"location has shape {params.location.shape}")
    if not is_positive_definite(params.scale):
        raise DomainError("Student scale matrix is singular")
    return float(stats.multivariate_t.logpdf(point, loc=params.location,
                                             shape=params.scale, df=params.nu))


def log_multinomial(i: int, params: MultinomialParams) -> float:
    """Log-probability of category i"""
    if not 0 <= i < params.size:
        raise ContractViolation(f"category {i} outside [0, {params.size})")
    return float(np.log(params.theta[i]))


def log_dirichlet(theta, params: DirichletParams) -> float:
    """Dirichlet log-density at a point of the open simplex"""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != params.psi.shape:
        raise ContractViolation(f"theta has shape {theta.shape}, expected {params.psi.shape}")
    return float(stats.dirichlet.logpdf(theta, params.psi))


def log_gauss_linreg(y: float, z, params: GaussLinRegParams) -> float:
    """ln N(y | beta^T z, sigma2) for a regressor vector z (intercept first)"""
    z = np.asarray(z, dtype=float)
    if z.shape != params.beta.shape:
        raise ContractViolation(f"regressors have shape {z.shape}, expected {params.beta.shape}")
    return log_gaussian(y, float(params.beta @ z), params.sigma2)


def log_nig(beta, sigma2: float, params: NigParams) -> float:
    """Joint log-density ln N(beta | mu, sigma2 V) + ln IG(sigma2 | rho, phi)"""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.shape != params.mu.shape:
        raise ContractViolation(f"beta has shape {beta.shape}, expected {params.mu.shape}")
    if not sigma2 > 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2!r}")
    log_normal = stats.multivariate_normal.logpdf(beta, mean=params.mu, cov=sigma2 * params.V)
    log_inv_gamma = stats.invgamma.logpdf(sigma2, a=params.rho, scale=params.phi)
    return float(log_normal + log_inv_gamma)


def dirichlet_posterior(prior: DirichletParams, counts: Sequence[int]) -> DirichletParams:
    """
    Conjugate Dirichlet update psi' = psi + counts

    Args:
        prior: Prior pseudo-counts
        counts: Observed category counts, same length as the prior

    Returns:
        Posterior pseudo-counts
    """
    counts = np.asarray(counts, dtype=float)
    if counts.shape != prior.psi.shape:
        raise ContractViolation(f"counts have shape {counts.shape}, prior has {prior.psi.shape}")
    if np.any(counts < 0):
        raise ContractViolation(f"counts must be nonnegative: {counts}")
    return DirichletParams(prior.psi + counts)


def multinomial_predictive(psi: DirichletParams) -> MultinomialParams:
    """Posterior predictive category probabilities psi / sum(psi)"""
    return MultinomialParams(psi.psi / psi.psi.sum())


def _spd_inverse(matrix: np.ndarray, what: str) -> np.ndarray:
    """Invert a symmetric positive-definite matrix through its Cholesky factor"""
    try:
        factor = linalg.cho_factor(matrix, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as error:
        logger.error(f"Cholesky factorization of {what} failed: {error}")
        eigenvalues = np.linalg.eigvalsh(matrix) if np.all(np.isfinite(matrix)) else None
        raise NumericalInstabilityError(
            f"{what} is not numerically positive definite",
            {
                "shape": matrix.shape,
                "min_eigenvalue": None if eigenvalues is None else float(eigenvalues.min()),
                "cause": str(error),
            },
        ) from error
    inverse = linalg.cho_solve(factor, np.eye(matrix.shape[0]))
    return 0.5 * (inverse + inverse.T)


def nig_posterior(prior: NigParams, Z, y) -> NigParams:
    """
    Conjugate NIG update after observing responses y with design matrix Z

    V' = (V^-1 + Z^T Z)^-1, mu' = V'(V^-1 mu + Z^T y), rho' = rho + n/2,
    phi' = phi + (mu^T V^-1 mu + y^T y - mu'^T V'^-1 mu') / 2

    Args:
        prior: Prior hyperparameters of dimension p
        Z: n x p design matrix
        y: n responses

    Returns:
        Posterior hyperparameters
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    Z = np.asarray(Z, dtype=float)
    if Z.size == 0:
        Z = np.zeros((0, prior.dimension))
    if Z.ndim != 2 or Z.shape[1] != prior.dimension:
        raise ContractViolation(f"design matrix has shape {Z.shape}, expected (n, {prior.dimension})")
    if Z.shape[0] != y.shape[0]:
        raise ContractViolation(f"design matrix has {Z.shape[0]} rows but there are "
                                f"{y.shape[0]} responses")
    if y.size == 0:
        return prior

    prior_precision = _spd_inverse(prior.V, "prior scale matrix V")
    precision = prior_precision + Z.T @ Z
    V_post = _spd_inverse(precision, "posterior precision V^-1 + Z^T Z")
    mu_post = V_post @ (prior_precision @ prior.mu + Z.T @ y)
    rho_post = prior.rho + y.size / 2.0
    quadratic = (prior.mu @ prior_precision @ prior.mu + y @ y
                 - mu_post @ precision @ mu_post)
    phi_post = prior.phi + 0.5 * quadratic
    if not phi_post > 0:
        raise NumericalInstabilityError("posterior rate phi' is not positive",
                                        {"phi": prior.phi, "quadratic": float(quadratic)})
    return NigParams(mu_post, V_post, rho_post, phi_post)


def nig_predictive(params: NigParams, z) -> StudentParams:
    """
    Predictive distribution of one response with regressors z

    St(2 rho, z^T mu, (phi / rho)(1 + z^T V z))
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != params.mu.shape:
        raise ContractViolation(f"regressors have shape {z.shape}, expected {params.mu.shape}")
    scale = (params.phi / params.rho) * (1.0 + z @ params.V @ z)
    return StudentParams(2.0 * params.rho, float(z @ params.mu), float(scale))


def nig_predictive_batch(params: NigParams, Z) -> StudentParams:
    """
    Joint predictive distribution of m responses with design matrix Z

    MVSt(2 rho, Z mu, (phi / rho)(I + Z V Z^T))
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != params.dimension:
        raise ContractViolation(f"design matrix has {Z.shape[1]} columns, "
                                f"expected {params.dimension}")
    scale = (params.phi / params.rho) * (np.eye(Z.shape[0]) + Z @ params.V @ Z.T)
    return StudentParams(2.0 * params.rho, Z @ params.mu, 0.5 * (scale + scale.T))


def student_logpdf_rows(y: np.ndarray, Z: np.ndarray, params: NigParams) -> np.ndarray:
    """Vectorised univariate predictive log-density for each row of Z"""
    location = Z @ params.mu
    quadratic = np.einsum("ij,jk,ik->i", Z, params.V, Z)
    scale = (params.phi / params.rho) * (1.0 + quadratic)
    return stats.t.logpdf(y, df=2.0 * params.rho, loc=location, scale=np.sqrt(scale))


def sample_nig(params: NigParams, size: int,
               rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw (beta, sigma2) pairs from a NIG distribution

    Returns:
        Tuple of a size x p coefficient array and a size vector of variances
    """
    rng = rng if rng is not None else np.random.default_rng()
    sigma2 = stats.invgamma.rvs(a=params.rho, scale=params.phi, size=size, random_state=rng)
    standard = stats.multivariate_normal.rvs(mean=np.zeros(params.dimension), cov=params.V,
                                             size=size, random_state=rng)
    standard = np.reshape(standard, (size, params.dimension))
    beta = params.mu + standard * np.sqrt(sigma2)[:, None]
    return beta, sigma2
