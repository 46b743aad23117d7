"""Weighted-likelihood EM for Gaussian mixtures over labelled + unlabelled data.

The engine maximizes a two-block weighted log-likelihood: the labelled
block enters through its complete-data terms with weight lambda_c, the
unlabelled block through its marginal mixture density with weight
1 - lambda_c. lambda_c = 1 reduces to discriminant-analysis plug-in
estimation, lambda_c = 0 to clustering on the unlabelled block, and
lambda_c = 0.5 to classical semi-supervised classification EM.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from ._validation import as_matrix, check_one_hot, check_unit_interval
from .exceptions import (
    DegenerateComponentError,
    InitializationError,
    InputError,
    InsufficientLabelsError,
)
from .gaussian import SpdFactor, log_density_batch
from .mixture import MixtureParams

# Effective component mass below this aborts the M-step.
MIN_COMPONENT_WEIGHT = 1e-10

# Exhaustive permutation search for cluster/class alignment up to this G.
MAX_EXHAUSTIVE_ALIGN = 6


@dataclass(frozen=True)
class SupervisedDataset:
    """Labelled block (X1 with hard one-hot Z1) plus unlabelled block X2."""

    X1: np.ndarray
    Z1: np.ndarray
    X2: np.ndarray

    def __post_init__(self):
        X1 = np.asarray(self.X1, dtype=float)
        X2 = np.asarray(self.X2, dtype=float)
        n1 = X1.shape[0] if X1.ndim >= 1 and X1.size else 0
        n2 = X2.shape[0] if X2.ndim >= 1 and X2.size else 0
        if n1 + n2 < 1:
            raise InputError("dataset must contain at least one observation")
        if n1:
            X1 = as_matrix(X1, "X1")
        if n2:
            X2 = as_matrix(X2, "X2")
        if n1 == 0:
            X1 = np.zeros((0, X2.shape[1]))
        if n2 == 0:
            X2 = np.zeros((0, X1.shape[1]))
        if X1.shape[1] != X2.shape[1]:
            raise InputError(
                f"X1 has {X1.shape[1]} features but X2 has {X2.shape[1]}"
            )
        Z1 = np.asarray(self.Z1, dtype=float)
        if n1 == 0:
            Z1 = Z1.reshape(0, Z1.shape[1] if Z1.ndim == 2 else 0)
        elif Z1.ndim != 2 or Z1.shape[0] != n1:
            raise InputError(f"Z1 must have {n1} rows, got shape {Z1.shape}")
        Z1 = check_one_hot(Z1, "Z1")
        object.__setattr__(self, "X1", X1)
        object.__setattr__(self, "Z1", Z1)
        object.__setattr__(self, "X2", X2)

    @property
    def n_labelled(self) -> int:
        return self.X1.shape[0]

    @property
    def n_unlabelled(self) -> int:
        return self.X2.shape[0]

    @property
    def dim(self) -> int:
        return self.X1.shape[1] if self.n_labelled else self.X2.shape[1]

    def labelled_counts(self) -> np.ndarray:
        return self.Z1.sum(axis=0)

    def pooled(self) -> np.ndarray:
        if self.n_labelled == 0:
            return self.X2
        if self.n_unlabelled == 0:
            return self.X1
        return np.vstack([self.X1, self.X2])


@dataclass(frozen=True)
class SupervisionWeight:
    """Supervision weight lambda_c in [0, 1]; pair is (lambda_c, 1 - lambda_c)."""

    lambda_c: float

    def __post_init__(self):
        object.__setattr__(
            self, "lambda_c", check_unit_interval(self.lambda_c, "lambda_c")
        )

    @property
    def labelled(self) -> float:
        return self.lambda_c

    @property
    def unlabelled(self) -> float:
        return 1.0 - self.lambda_c


@dataclass(frozen=True)
class EmConfig:
    """Convergence and initialization knobs for the EM engine."""

    epsilon: float = 1e-5
    max_iter: int = 1000
    restarts: int = 10          # k-means restarts during initialization
    seed: int = 0
    init_params: MixtureParams | None = None
    track_params: bool = False  # record the parameter trajectory

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise InputError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iter < 1:
            raise InputError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.restarts < 1:
            raise InputError(f"restarts must be >= 1, got {self.restarts}")


@dataclass(frozen=True)
class FitResult:
    params: MixtureParams
    resp: np.ndarray                 # (n2, G) responsibilities of X2
    hard_assignments: np.ndarray     # argmax of resp, ties to lowest index
    wll_trace: list[float]
    iterations: int
    converged: bool
    param_trace: list[MixtureParams] | None = field(default=None)

    @property
    def final_wll(self) -> float:
        return self.wll_trace[-1]


def _log_weighted_densities(X, weights, means, factors) -> np.ndarray:
    out = np.empty((X.shape[0], len(factors)))
    log_w = np.log(weights)
    for g, factor in enumerate(factors):
        out[:, g] = log_w[g] + log_density_batch(X, means[g], factor)
    return out


def _responsibilities(X, weights, means, factors) -> np.ndarray:
    log_wd = _log_weighted_densities(X, weights, means, factors)
    return np.exp(log_wd - logsumexp(log_wd, axis=1, keepdims=True))


def _wll(data: SupervisedDataset, w: SupervisionWeight, weights, means, factors) -> float:
    total = 0.0
    if w.labelled > 0.0 and data.n_labelled:
        log_wd = _log_weighted_densities(data.X1, weights, means, factors)
        total += w.labelled * float(np.sum(data.Z1 * log_wd))
    if w.unlabelled > 0.0 and data.n_unlabelled:
        log_wd = _log_weighted_densities(data.X2, weights, means, factors)
        total += w.unlabelled * float(np.sum(logsumexp(log_wd, axis=1)))
    return total


def weighted_log_likelihood(
    data: SupervisedDataset, m: MixtureParams, w: SupervisionWeight
) -> float:
    """Two-block weighted log-likelihood of the mixture on the dataset.

    lambda_c * sum over labelled rows of z_jg [log pi_g + log phi_g(x)]
    + (1 - lambda_c) * sum over unlabelled rows of the marginal mixture
    log-density.
    """
    if data.dim != m.dim:
        raise InputError(f"data has dimension {data.dim}, mixture has {m.dim}")
    if data.n_labelled and data.Z1.shape[1] != m.n_components:
        raise InputError(
            f"Z1 has {data.Z1.shape[1]} classes, mixture has {m.n_components}"
        )
    return _wll(data, w, m.weights, m.means, m.factors())


def _m_step(data: SupervisedDataset, w: SupervisionWeight, Z2hat: np.ndarray):
    """One weighted M-step; returns (weights, means, covs, factors).

    Covariances are taken about the freshly updated means, and stored
    with any rescue ridge already applied so parameters and likelihood
    stay consistent.
    """
    lam1, lam2 = w.labelled, w.unlabelled
    n1, n2 = data.n_labelled, data.n_unlabelled
    use1 = lam1 > 0.0 and n1 > 0
    use2 = lam2 > 0.0 and n2 > 0
    G = Z2hat.shape[1]
    p = data.dim

    mass = np.zeros(G)
    if use1:
        mass += lam1 * data.Z1.sum(axis=0)
    if use2:
        mass += lam2 * Z2hat.sum(axis=0)
    g_min = int(np.argmin(mass))
    if mass[g_min] < MIN_COMPONENT_WEIGHT:
        raise DegenerateComponentError(g_min, float(mass[g_min]))

    weights = mass / mass.sum()

    moment = np.zeros((G, p))
    if use1:
        moment += lam1 * (data.Z1.T @ data.X1)
    if use2:
        moment += lam2 * (Z2hat.T @ data.X2)
    means = moment / mass[:, None]

    covs = np.empty((G, p, p))
    factors = []
    for g in range(G):
        scatter = np.zeros((p, p))
        if use1:
            d = data.X1 - means[g]
            scatter += lam1 * ((d.T * data.Z1[:, g]) @ d)
        if use2:
            d = data.X2 - means[g]
            scatter += lam2 * ((d.T * Z2hat[:, g]) @ d)
        factor = SpdFactor.from_covariance(scatter / mass[g])
        covs[g] = factor.covariance
        factors.append(factor)
    return weights, means, covs, factors


def da_fit(X1, Z1) -> MixtureParams:
    """Closed-form plug-in estimates from labelled data only.

    pi_g = class frequency, mu_g = class mean, Sigma_g = class scatter
    with maximum-likelihood (1/n_g) denominator.
    """
    X1 = as_matrix(X1, "X1")
    Z1 = check_one_hot(np.asarray(Z1, dtype=float).reshape(X1.shape[0], -1), "Z1")
    n1, G = Z1.shape
    if n1 < 1:
        raise InsufficientLabelsError("no labelled observations")
    counts = Z1.sum(axis=0)
    for g in range(G):
        if counts[g] < 2:
            raise InsufficientLabelsError(
                f"class {g} has {int(counts[g])} labelled rows; at least 2 required"
            )
    pi = counts / n1
    means = np.empty((G, X1.shape[1]))
    covs = np.empty((G, X1.shape[1], X1.shape[1]))
    for g in range(G):
        rows = X1[Z1[:, g] == 1.0]
        mu = rows.mean(axis=0)
        d = rows - mu
        covs[g] = SpdFactor.from_covariance((d.T @ d) / counts[g]).covariance
        means[g] = mu
    return MixtureParams(pi, means, covs)


def _kmeans_pp_centers(X: np.ndarray, G: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((G, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for k in range(1, G):
        total = d2.sum()
        centers[k] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((X - centers[k]) ** 2, axis=1))
    return centers


def _lloyd(X: np.ndarray, centers: np.ndarray, max_iter: int = 300):
    n, G = X.shape[0], centers.shape[0]
    assign = np.full(n, -1)
    for _ in range(max_iter):
        d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_assign = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), new_assign]
        # Repopulate empty clusters with the worst-fit points.
        for g in range(G):
            if not np.any(new_assign == g):
                idx = int(np.argmax(point_d2))
                new_assign[idx] = g
                point_d2[idx] = 0.0
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for g in range(G):
            centers[g] = X[assign == g].mean(axis=0)
    d2 = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    inertia = float(d2[np.arange(n), assign].sum())
    return assign, inertia


def kmeans_partition(
    X: np.ndarray, G: int, restarts: int, rng: np.random.Generator
) -> np.ndarray:
    """Best-of-`restarts` k-means (++ seeding, Lloyd) hard partition of X."""
    X = as_matrix(X, "X")
    if X.shape[0] < G:
        raise InitializationError(f"{X.shape[0]} observations cannot seed {G} clusters")
    if np.unique(X, axis=0).shape[0] < G:
        raise InitializationError(f"fewer than {G} distinct observations")
    best_assign, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_centers(X, G, rng)
        assign, inertia = _lloyd(X, centers)
        if inertia < best_inertia:
            best_assign, best_inertia = assign, inertia
    return best_assign


def align_clusters_to_classes(assign: np.ndarray, Z1: np.ndarray) -> np.ndarray:
    """Permutation mapping cluster index -> class index.

    Maximizes agreement with the hard labels over the labelled rows
    (assign must cover the labelled rows first). Exhaustive search for
    small G, optimal assignment above.
    """
    G = Z1.shape[1]
    n1 = Z1.shape[0]
    labels = np.argmax(Z1, axis=1)
    table = np.zeros((G, G))
    for k, g in zip(assign[:n1], labels):
        table[k, g] += 1.0
    if G <= MAX_EXHAUSTIVE_ALIGN:
        best_perm, best_score = None, -1.0
        for perm in itertools.permutations(range(G)):
            score = sum(table[k, perm[k]] for k in range(G))
            if score > best_score:
                best_perm, best_score = perm, score
        return np.asarray(best_perm)
    rows, cols = linear_sum_assignment(-table)
    perm = np.empty(G, dtype=int)
    perm[rows] = cols
    return perm


def kmeans_init(
    data: SupervisedDataset,
    G: int,
    w: SupervisionWeight,
    seed: int = 0,
    restarts: int = 10,
) -> MixtureParams:
    """k-means initialization of the mixture parameters.

    Clusters the pooled labelled + unlabelled rows, aligns cluster
    indices to class indices using the labelled rows, then runs one
    weighted M-step with the labelled rows kept on their known labels
    and the unlabelled rows on their aligned cluster assignments.
    """
    if data.n_labelled and data.Z1.shape[1] != G:
        raise InputError(
            f"Z1 has {data.Z1.shape[1]} classes, cannot align {G} clusters"
        )
    rng = np.random.default_rng(seed)
    assign = kmeans_partition(data.pooled(), G, restarts, rng)
    return init_from_partition(data, assign, w, G)


def init_from_partition(
    data: SupervisedDataset, assign: np.ndarray, w: SupervisionWeight, G: int
) -> MixtureParams:
    """Initial parameters from a pooled hard partition (labelled rows first).

    All pooled rows enter the weighted M-step on their aligned cluster
    memberships; known labels influence the init only through the
    alignment step.
    """
    if data.n_labelled and data.Z1.shape[1] == G:
        perm = align_clusters_to_classes(assign, data.Z1)
    else:
        perm = np.arange(G)
    aligned = perm[assign]
    Z1_init = np.zeros((data.n_labelled, G))
    if data.n_labelled:
        Z1_init[np.arange(data.n_labelled), aligned[: data.n_labelled]] = 1.0
    Z2_init = np.zeros((data.n_unlabelled, G))
    if data.n_unlabelled:
        Z2_init[np.arange(data.n_unlabelled), aligned[data.n_labelled:]] = 1.0
    init_data = SupervisedDataset(X1=data.X1, Z1=Z1_init, X2=data.X2)
    weights, means, covs, _ = _m_step(init_data, w, Z2_init)
    return MixtureParams(weights, means, covs)


def _check_preconditions(data: SupervisedDataset, G: int, w: SupervisionWeight):
    if G < 1:
        raise InputError(f"G must be >= 1, got {G}")
    if w.lambda_c > 0.0:
        if data.n_labelled < 1:
            raise InsufficientLabelsError(
                "lambda_c > 0 requires at least one labelled observation"
            )
        if data.Z1.shape[1] != G:
            raise InputError(f"Z1 has {data.Z1.shape[1]} classes, expected {G}")
        counts = data.labelled_counts()
        missing = [g for g in range(G) if counts[g] == 0]
        if missing:
            raise InsufficientLabelsError(
                f"classes {missing} absent from labels with lambda_c={w.lambda_c}"
            )
    if w.lambda_c < 1.0 and data.n_unlabelled < 1:
        raise InputError("lambda_c < 1 requires at least one unlabelled observation")


def em_fit(
    data: SupervisedDataset,
    G: int,
    w: SupervisionWeight,
    cfg: EmConfig = EmConfig(),
) -> FitResult:
    """Fit the mixture by weighted-likelihood EM.

    Alternates responsibilities on the unlabelled block (labelled rows
    keep their hard labels) with weighted M-step updates of proportions,
    means, and covariances; covariances use the freshly updated means.
    Stops when the weighted log-likelihood improves by less than
    cfg.epsilon or max_iter is reached.
    """
    _check_preconditions(data, G, w)
    if cfg.init_params is not None:
        params = cfg.init_params
        if params.n_components != G or params.dim != data.dim:
            raise InputError("init_params shape does not match data/G")
        weights, means = params.weights, params.means
        covs = params.covariances
        factors = params.factors()
    else:
        params = kmeans_init(data, G, w, seed=cfg.seed, restarts=cfg.restarts)
        weights, means, covs = params.weights, params.means, params.covariances
        factors = params.factors()

    wll_prev = _wll(data, w, weights, means, factors)
    trace = [wll_prev]
    param_trace = [MixtureParams(weights, means, covs)] if cfg.track_params else None
    converged = False
    iterations = 0
    for t in range(1, cfg.max_iter + 1):
        if data.n_unlabelled:
            Z2hat = _responsibilities(data.X2, weights, means, factors)
        else:
            Z2hat = np.zeros((0, G))
        weights, means, covs, factors = _m_step(data, w, Z2hat)
        wll_new = _wll(data, w, weights, means, factors)
        trace.append(wll_new)
        if cfg.track_params:
            param_trace.append(MixtureParams(weights, means, covs))
        iterations = t
        if wll_new - wll_prev < cfg.epsilon:
            converged = True
            break
        wll_prev = wll_new

    final = MixtureParams(weights, means, covs)
    if data.n_unlabelled:
        resp = _responsibilities(data.X2, weights, means, factors)
        hard = np.argmax(resp, axis=1)
    else:
        resp = np.zeros((0, G))
        hard = np.zeros(0, dtype=int)
    return FitResult(
        params=final,
        resp=resp,
        hard_assignments=hard,
        wll_trace=trace,
        iterations=iterations,
        converged=converged,
        param_trace=param_trace,
    )
