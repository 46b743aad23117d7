"""Strategies for choosing the supervision weight.

Sample-proportion rules (n2-ratio, max-ratio) are closed form. The KL
strategies fit the model at every grid weight from one shared k-means
initialization and pick the weight minimizing the summed matched-KL
distance to the fully supervised and fully unsupervised endpoint fits.
The ARI oracle needs the true partition and exists for benchmarking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .em import (
    EmConfig,
    FitResult,
    SupervisedDataset,
    SupervisionWeight,
    em_fit,
    init_from_partition,
    kmeans_partition,
)
from .exceptions import FscError, InputError, StrategyUnavailableError
from .metrics import ari
from .mixture import MixtureParams, mixture_kl_matched

KL_VARIANTS = ("kl1", "kl2")


@dataclass(frozen=True)
class LambdaGrid:
    """Ordered candidate supervision weights in [0, 1]."""

    values: tuple[float, ...] = tuple(round(0.1 * k, 10) for k in range(11))

    def __post_init__(self):
        vals = tuple(round(float(v), 10) for v in self.values)
        if not vals:
            raise InputError("grid must contain at least one value")
        if any(not 0.0 <= v <= 1.0 for v in vals):
            raise InputError(f"grid values must lie in [0, 1]: {vals}")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise InputError(f"grid values must be strictly increasing: {vals}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_spec(cls, spec: str) -> "LambdaGrid":
        """Parse 'start:end:step' (inclusive of both ends) or 'a,b,c'."""
        spec = spec.strip()
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise InputError(f"grid spec must be start:end:step, got {spec!r}")
            start, end, step = (float(s) for s in parts)
            if step <= 0:
                raise InputError(f"grid step must be positive, got {step}")
            count = int(round((end - start) / step))
            vals = [round(start + k * step, 10) for k in range(count + 1)]
            vals = [v for v in vals if v <= end + 1e-12]
            return cls(tuple(vals))
        return cls(tuple(float(s) for s in spec.split(",")))

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class WeightChoice:
    strategy: str
    value: float
    diagnostics: dict = field(default_factory=dict)


def lambda_n2(n1: int, n2: int) -> float:
    """Unlabelled-proportion weight n2 / (n1 + n2)."""
    if n1 < 0 or n2 < 0 or n1 + n2 < 1:
        raise InputError("need n1, n2 >= 0 with n1 + n2 >= 1")
    return n2 / (n1 + n2)


def lambda_max(n1: int, n2: int) -> float:
    """Majority-proportion weight max(n1, n2) / (n1 + n2)."""
    if n1 < 0 or n2 < 0 or n1 + n2 < 1:
        raise InputError("need n1, n2 >= 0 with n1 + n2 >= 1")
    return max(n1, n2) / (n1 + n2)


def kl_tradeoff_choice(
    da_params: MixtureParams,
    clust_params: MixtureParams,
    candidates: Mapping[float, MixtureParams],
    variant: str = "kl1",
) -> WeightChoice:
    """Pick the candidate weight minimizing the summed matched-KL tradeoff.

    kl1 measures KL_approx(endpoint || candidate) for both endpoints;
    kl2 reverses the arguments. Ties break to the smaller weight.
    """
    if variant not in KL_VARIANTS:
        raise InputError(f"variant must be one of {KL_VARIANTS}, got {variant!r}")
    if not candidates:
        raise InputError("no candidate fits supplied")
    diagnostics = {}
    best_lam, best_val = None, np.inf
    for lam in sorted(candidates):
        params = candidates[lam]
        if variant == "kl1":
            kl_da = mixture_kl_matched(da_params, params)
            kl_cl = mixture_kl_matched(clust_params, params)
        else:
            kl_da = mixture_kl_matched(params, da_params)
            kl_cl = mixture_kl_matched(params, clust_params)
        total = kl_da + kl_cl
        diagnostics[lam] = {"kl_da": kl_da, "kl_clust": kl_cl, "total": total}
        if total < best_val:
            best_lam, best_val = lam, total
    return WeightChoice(strategy=variant, value=best_lam, diagnostics=diagnostics)


def select_kl(
    data: SupervisedDataset,
    G: int,
    grid: LambdaGrid,
    variant: str = "kl1",
    cfg: EmConfig = EmConfig(),
) -> WeightChoice:
    """Fit every grid weight from one shared initialization and minimize
    the KL tradeoff against the supervised and unsupervised anchor fits."""
    if variant not in KL_VARIANTS:
        raise InputError(f"variant must be one of {KL_VARIANTS}, got {variant!r}")
    rng = np.random.default_rng(cfg.seed)
    partition = kmeans_partition(data.pooled(), G, cfg.restarts, rng)

    def fit_at(lam: float) -> FitResult:
        w = SupervisionWeight(lam)
        init = init_from_partition(data, partition, w, G)
        local = EmConfig(
            epsilon=cfg.epsilon, max_iter=cfg.max_iter, restarts=cfg.restarts,
            seed=cfg.seed, init_params=init,
        )
        return em_fit(data, G, w, local)

    fits: dict[float, FitResult] = {}
    for name, lam in (("supervised (lambda=1)", 1.0), ("clustering (lambda=0)", 0.0)):
        try:
            fits[lam] = fit_at(lam)
        except FscError as exc:
            raise StrategyUnavailableError(
                f"{variant} unavailable: {name} anchor fit failed: {exc}"
            ) from exc

    candidates: dict[float, MixtureParams] = {}
    for lam in grid:
        lam = float(lam)
        if lam not in fits:
            try:
                fits[lam] = fit_at(lam)
            except FscError:
                continue  # failed candidates drop out of the argmin
        candidates[lam] = fits[lam].params
    if not candidates:
        raise StrategyUnavailableError(f"{variant} unavailable: every grid fit failed")
    return kl_tradeoff_choice(fits[1.0].params, fits[0.0].params, candidates, variant)


def select_ari_oracle(fits: Mapping[float, FitResult], truth) -> WeightChoice:
    """Truth-dependent oracle: the grid weight whose hard assignments score
    the highest ARI against the true partition. Ties break to smaller weight."""
    if not fits:
        raise InputError("no fits supplied")
    truth = np.asarray(truth)
    diagnostics = {}
    best_lam, best_val = None, -np.inf
    for lam in sorted(fits):
        score = ari(truth, fits[lam].hard_assignments)
        diagnostics[lam] = score
        if score > best_val:
            best_lam, best_val = lam, score
    return WeightChoice(strategy="ari_oracle", value=best_lam, diagnostics=diagnostics)
