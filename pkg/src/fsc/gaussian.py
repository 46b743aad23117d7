"""Multivariate Gaussian primitives.

Log-densities are evaluated through a Cholesky factorization of the
covariance so that everything downstream (responsibilities, likelihoods)
can stay in log space; covariances that fail to factorize are rescued by
a small relative ridge before giving up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ._validation import as_vector, check_square
from .exceptions import InputError, SingularCovarianceError

LOG_2PI = np.log(2.0 * np.pi)

# Ridge retry schedule: delta * (trace/p) added to the diagonal.
RIDGE_DELTAS = (1e-8, 1e-6)


@dataclass(frozen=True)
class GaussianParams:
    """Mean vector and covariance matrix of one multivariate Gaussian."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", as_vector(self.mean, "mean"))
        cov = check_square(self.covariance, "covariance")
        if cov.shape[0] != self.mean.size:
            raise InputError(
                f"covariance is {cov.shape[0]}x{cov.shape[0]} but mean has "
                f"length {self.mean.size}"
            )
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class SpdFactor:
    """Cached lower-triangular factor of a (possibly ridged) covariance."""

    lower: np.ndarray
    log_det: float
    covariance: np.ndarray  # the matrix actually factorized, after any ridge
    ridge: float = field(default=0.0)

    @classmethod
    def from_covariance(cls, covariance) -> "SpdFactor":
        """Factorize a covariance, applying the ridge retry policy.

        The input is symmetrized first (M-step accumulation leaves
        round-off asymmetry). On factorization failure a ridge of
        delta*(trace/p) is added to the diagonal for delta in
        RIDGE_DELTAS; if both retries fail the covariance is declared
        singular.
        """
        cov = check_square(covariance, "covariance")
        cov = 0.5 * (cov + cov.T)
        p = cov.shape[0]
        scale = np.trace(cov) / p if p else 0.0
        ridge = 0.0
        attempt = cov
        for delta in (0.0,) + RIDGE_DELTAS:
            if delta > 0.0:
                ridge = delta * scale
                attempt = cov + ridge * np.eye(p)
            try:
                lower = np.linalg.cholesky(attempt)
            except np.linalg.LinAlgError:
                continue
            log_det = 2.0 * float(np.sum(np.log(np.diag(lower))))
            return cls(lower=lower, log_det=log_det, covariance=attempt, ridge=ridge)
        raise SingularCovarianceError(
            f"covariance not positive definite after ridge retries (trace/p={scale:.3e})"
        )


def regularize_covariance(covariance) -> np.ndarray:
    """Return the covariance as factorized, i.e. with any rescue ridge applied."""
    return SpdFactor.from_covariance(covariance).covariance


def log_density_batch(X: np.ndarray, mean: np.ndarray, factor: SpdFactor) -> np.ndarray:
    """log N(x | mean, cov) for every row of X, given a cached factor."""
    diff = X - mean
    # Solve L y = diff^T; the quadratic form is then ||y||^2 per column.
    y = solve_triangular(factor.lower, diff.T, lower=True, check_finite=False)
    quad = np.einsum("ij,ij->j", y, y)
    p = mean.size
    return -0.5 * (p * LOG_2PI + factor.log_det + quad)


def log_density(x, g: GaussianParams) -> float:
    """Log-density of a multivariate Gaussian at a single point."""
    x = as_vector(x, "x")
    if x.size != g.dim:
        raise InputError(f"x has dimension {x.size}, Gaussian has {g.dim}")
    factor = SpdFactor.from_covariance(g.covariance)
    return float(log_density_batch(x.reshape(1, -1), g.mean, factor)[0])


def gaussian_kl(g1: GaussianParams, g2: GaussianParams) -> float:
    """Closed-form KL divergence KL(g1 || g2) between two Gaussians.

    0.5 * [log(|S2|/|S1|) + Tr(S2^-1 S1) - p + (m1-m2)^T S2^-1 (m1-m2)]
    """
    if g1.dim != g2.dim:
        raise InputError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    p = g1.dim
    f1 = SpdFactor.from_covariance(g1.covariance)
    f2 = SpdFactor.from_covariance(g2.covariance)
    # Tr(S2^-1 S1) = ||L2^-1 L1||_F^2
    a = solve_triangular(f2.lower, f1.lower, lower=True, check_finite=False)
    trace_term = float(np.sum(a * a))
    d = g1.mean - g2.mean
    y = solve_triangular(f2.lower, d, lower=True, check_finite=False)
    maha = float(y @ y)
    return 0.5 * (f2.log_det - f1.log_det + trace_term - p + maha)
