"""Gaussian mixture containers, density evaluation, and responsibilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._validation import as_matrix, as_vector
from .exceptions import InputError
from .gaussian import GaussianParams, SpdFactor, gaussian_kl, log_density_batch

# Mixing proportions below this are clamped before log ratios.
MIN_PROPORTION = 1e-12


@dataclass(frozen=True)
class MixtureParams:
    """Parameters of a G-component Gaussian mixture.

    weights: (G,) mixing proportions, positive, summing to 1.
    means: (G, p) component means.
    covariances: (G, p, p) component covariances.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = as_vector(self.weights, "weights")
        means = np.asarray(self.means, dtype=float)
        covs = np.asarray(self.covariances, dtype=float)
        if means.ndim != 2:
            raise InputError(f"means must be (G, p), got shape {means.shape}")
        G, p = means.shape
        if w.size != G:
            raise InputError(f"weights has length {w.size}, expected {G}")
        if covs.shape != (G, p, p):
            raise InputError(
                f"covariances must have shape {(G, p, p)}, got {covs.shape}"
            )
        if np.any(w <= 0.0):
            raise InputError("all mixing proportions must be positive")
        if abs(w.sum() - 1.0) > 1e-10:
            raise InputError(f"mixing proportions sum to {w.sum()!r}, expected 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component(self, g: int) -> GaussianParams:
        return GaussianParams(self.means[g], self.covariances[g])

    def factors(self) -> list[SpdFactor]:
        return [SpdFactor.from_covariance(c) for c in self.covariances]


def component_log_densities(X, m: MixtureParams) -> np.ndarray:
    """(n, G) matrix of log[pi_g * phi(x | theta_g)]."""
    X = as_matrix(X, "X", n_cols=m.dim)
    out = np.empty((X.shape[0], m.n_components))
    for g, factor in enumerate(m.factors()):
        out[:, g] = np.log(m.weights[g]) + log_density_batch(X, m.means[g], factor)
    return out


def mixture_log_density(x, m: MixtureParams) -> float:
    """log sum_g pi_g phi(x | theta_g), via log-sum-exp."""
    x = as_vector(x, "x", length=m.dim)
    return float(logsumexp(component_log_densities(x.reshape(1, -1), m), axis=1)[0])


def mixture_log_density_batch(X, m: MixtureParams) -> np.ndarray:
    return logsumexp(component_log_densities(X, m), axis=1)


def responsibilities(X2, m: MixtureParams) -> np.ndarray:
    """Posterior component memberships for each row of X2.

    Row j, column g is pi_g phi(x_j|theta_g) / sum_h pi_h phi(x_j|theta_h),
    computed entirely in log space so rows always normalize.
    """
    log_wd = component_log_densities(X2, m)
    log_norm = logsumexp(log_wd, axis=1, keepdims=True)
    return np.exp(log_wd - log_norm)


def mixture_kl_matched(m1: MixtureParams, m2: MixtureParams) -> float:
    """Matching-based approximation to KL(m1 || m2) for same-order mixtures.

    Components are matched by index: sum_g pi_1g * [KL(f_1g || f_2g)
    + log(pi_1g / pi_2g)]. Proportions are clamped at MIN_PROPORTION
    before the log ratio. The result can be slightly negative; it is an
    approximation, not a true divergence.
    """
    if m1.n_components != m2.n_components:
        raise InputError(
            f"mixture orders differ: {m1.n_components} vs {m2.n_components}"
        )
    if m1.dim != m2.dim:
        raise InputError(f"dimension mismatch: {m1.dim} vs {m2.dim}")
    w1 = np.maximum(m1.weights, MIN_PROPORTION)
    w2 = np.maximum(m2.weights, MIN_PROPORTION)
    total = 0.0
    for g in range(m1.n_components):
        kl_g = gaussian_kl(m1.component(g), m2.component(g))
        total += m1.weights[g] * (kl_g + np.log(w1[g] / w2[g]))
    return float(total)
