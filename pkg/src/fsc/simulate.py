"""Synthetic data generation, label masking, and replicated experiments.

The generator draws from a two-component bivariate mixture whose group
means are a distance `delta` apart along the y-axis, with correlated
covariance in group 1 and identity covariance in group 2. The harness
replicates draw -> mask -> fit-the-grid -> score sweeps with per-replicate
RNG streams derived from the master seed, so results are identical for
any worker count.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import as_matrix, check_partition
from .em import (
    EmConfig,
    SupervisedDataset,
    SupervisionWeight,
    em_fit,
    init_from_partition,
    kmeans_partition,
)
from .exceptions import DegenerateMaskError, FscError, InputError
from .metrics import ari
from .weights import (
    LambdaGrid,
    kl_tradeoff_choice,
    lambda_max,
    lambda_n2,
    select_ari_oracle,
)

GROUP1_COV = np.array([[1.0, 0.7], [0.7, 1.0]])
GROUP2_COV = np.eye(2)

STRATEGIES = ("n2", "max", "kl1", "kl2", "ari-oracle")

RUNS_HEADER = (
    "replicate,delta,p,lambda,strategy,ari,wll,iters,converged,error"
)
AGG_HEADER = "delta,p,lambda,mean_ari,se_ari,n_ok"
STRAT_AGG_HEADER = "delta,p,strategy,mean_lambda,mean_ari,se_ari,n_ok"
KL_AGG_HEADER = "delta,p,lambda,variant,mean_kl_da,mean_kl_clust,mean_kl_total,n_ok"


@dataclass(frozen=True)
class SimSpec:
    """Two-group bivariate mixture draw: n points, separation delta."""

    n: int = 300
    delta: float = 1.0
    pi: float = 0.5
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        if self.n < 2:
            raise InputError(f"n must be >= 2, got {self.n}")
        if not 0.0 < self.pi < 1.0:
            raise InputError(f"pi must lie in (0, 1), got {self.pi}")
        if self.delta < 0.0:
            raise InputError(f"delta must be >= 0, got {self.delta}")


@dataclass(frozen=True)
class MaskSpec:
    p_labelled: float
    mode: str = "random"

    def __post_init__(self):
        if not 0.0 < self.p_labelled <= 1.0:
            raise InputError(
                f"p_labelled must lie in (0, 1], got {self.p_labelled}"
            )
        if self.mode not in ("random", "biased"):
            raise InputError(f"mode must be 'random' or 'biased', got {self.mode!r}")


@dataclass(frozen=True)
class MaskedSplit:
    dataset: SupervisedDataset
    labelled_idx: np.ndarray
    unlabelled_idx: np.ndarray


def simulate(spec: SimSpec) -> tuple[np.ndarray, np.ndarray]:
    """Draw (data, truth) from the two-group model; deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    truth = (rng.random(spec.n) >= spec.pi).astype(int)
    z = rng.standard_normal((spec.n, 2))
    means = np.array([[0.0, 0.0], [0.0, spec.delta]])
    chols = np.stack([np.linalg.cholesky(GROUP1_COV), np.linalg.cholesky(GROUP2_COV)])
    X = means[truth] + np.einsum("nij,nj->ni", chols[truth], z)
    return X, truth


def _label_quota(p: float, n: int) -> int:
    return int(math.floor(p * n + 0.5))


def _per_class_quotas(n_lab: int, counts: np.ndarray) -> np.ndarray:
    """Largest-remainder split of the labelled quota across classes."""
    n = counts.sum()
    raw = n_lab * counts / n
    quotas = np.floor(raw).astype(int)
    remainder = n_lab - quotas.sum()
    order = np.argsort(-(raw - quotas), kind="stable")
    for k in range(remainder):
        quotas[order[k]] += 1
    return quotas


def mask_labels(
    truth,
    data,
    m: MaskSpec,
    seed: int | np.random.SeedSequence | np.random.Generator = 0,
    allow_missing_class: bool = False,
) -> MaskedSplit:
    """Split data into labelled and unlabelled blocks.

    Random mode labels a uniform sample of round(p*n) rows. Biased mode
    fills the quota with the group-1 rows of largest first coordinate
    and the group-2 rows of smallest first coordinate, split across the
    two groups proportionally to their sizes.
    """
    data = as_matrix(data, "data")
    truth = check_partition(truth, "truth")
    if truth.size != data.shape[0]:
        raise InputError("truth length must match data rows")
    n = data.shape[0]
    G = int(truth.max()) + 1
    n_lab = _label_quota(m.p_labelled, n)
    if n_lab < 1:
        raise InputError(f"labelled quota is {n_lab}; p_labelled too small")

    if m.mode == "random":
        rng = np.random.default_rng(seed)
        labelled = np.sort(rng.choice(n, size=n_lab, replace=False))
    else:
        if G != 2:
            raise InputError("biased masking is defined for exactly 2 groups")
        counts = np.bincount(truth, minlength=G)
        quotas = _per_class_quotas(n_lab, counts)
        x = data[:, 0]
        idx0 = np.flatnonzero(truth == 0)
        idx1 = np.flatnonzero(truth == 1)
        top0 = idx0[np.argsort(x[idx0], kind="stable")][::-1][: quotas[0]]
        bottom1 = idx1[np.argsort(x[idx1], kind="stable")][: quotas[1]]
        labelled = np.sort(np.concatenate([top0, bottom1]))

    mask = np.zeros(n, dtype=bool)
    mask[labelled] = True
    unlabelled = np.flatnonzero(~mask)

    if n_lab >= G and not allow_missing_class:
        present = np.bincount(truth[labelled], minlength=G)
        missing = [g for g in range(G) if present[g] == 0]
        if missing:
            raise DegenerateMaskError(missing)

    Z1 = np.zeros((n_lab, G))
    Z1[np.arange(n_lab), truth[labelled]] = 1.0
    dataset = SupervisedDataset(X1=data[labelled], Z1=Z1, X2=data[unlabelled])
    return MaskedSplit(dataset=dataset, labelled_idx=labelled, unlabelled_idx=unlabelled)


@dataclass(frozen=True)
class ExperimentConfig:
    """A replicated sweep over labelled fractions and grid weights.

    Exactly one of `sim` or `dataset` supplies the data. `dataset` is a
    fixed (data, truth) pair re-masked every replicate.
    """

    ps: tuple[float, ...]
    grid: LambdaGrid = LambdaGrid()
    sim: SimSpec | None = None
    dataset: tuple[np.ndarray, np.ndarray] | None = None
    reps: int = 100
    strategies: tuple[str, ...] = ()
    mode: str = "random"
    seed: int = 0
    epsilon: float = 1e-5
    max_iter: int = 1000
    restarts: int = 10
    jobs: int = 1

    def __post_init__(self):
        if (self.sim is None) == (self.dataset is None):
            raise InputError("exactly one of sim or dataset must be given")
        if self.reps < 1:
            raise InputError(f"reps must be >= 1, got {self.reps}")
        if not self.ps:
            raise InputError("at least one labelled fraction is required")
        for p in self.ps:
            if not 0.0 < p <= 1.0:
                raise InputError(f"labelled fraction {p} outside (0, 1]")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise InputError(f"unknown strategy {s!r}; choose from {STRATEGIES}")
        if self.mode not in ("random", "biased"):
            raise InputError(f"mode must be 'random' or 'biased', got {self.mode!r}")


@dataclass(frozen=True)
class ResultRow:
    replicate: int
    delta: float | None
    p: float
    lam: float | None
    strategy: str
    ari: float | None
    wll: float | None
    iters: int | None
    converged: bool | None
    error: str = ""


@dataclass(frozen=True)
class KlRecord:
    replicate: int
    delta: float | None
    p: float
    lam: float
    variant: str
    kl_da: float
    kl_clust: float


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)
    kl_records: list[KlRecord] = field(default_factory=list)

    def runs_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RUNS_HEADER.split(","))
        for r in self.rows:
            writer.writerow([
                r.replicate,
                _fmt(r.delta),
                _fmt(r.p),
                _fmt(r.lam),
                r.strategy,
                _fmt(r.ari),
                _fmt(r.wll),
                "" if r.iters is None else r.iters,
                "" if r.converged is None else str(r.converged).lower(),
                r.error,
            ])
        return buf.getvalue()

    def aggregate_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(AGG_HEADER.split(","))
        for key, vals in _group_rows(
            (r for r in self.rows if r.strategy == "grid"),
            lambda r: (r.delta, r.p, r.lam),
        ):
            delta, p, lam = key
            mean, se, n_ok = _summarize(vals)
            writer.writerow([_fmt(delta), _fmt(p), _fmt(lam), _fmt(mean), _fmt(se), n_ok])
        return buf.getvalue()

    def strategy_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(STRAT_AGG_HEADER.split(","))
        for key, rows in _group_rows(
            (r for r in self.rows if r.strategy not in ("grid",)),
            lambda r: (r.delta, r.p, r.strategy),
            values=False,
        ):
            delta, p, strategy = key
            scores = [r.ari for r in rows if not r.error and r.ari is not None]
            lams = [r.lam for r in rows if not r.error and r.lam is not None]
            mean, se, n_ok = _summarize(scores)
            mean_lam = float(np.mean(lams)) if lams else None
            writer.writerow(
                [_fmt(delta), _fmt(p), strategy, _fmt(mean_lam), _fmt(mean), _fmt(se), n_ok]
            )
        return buf.getvalue()

    def kl_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(KL_AGG_HEADER.split(","))
        grouped: dict[tuple, list[KlRecord]] = {}
        for rec in self.kl_records:
            grouped.setdefault((rec.delta, rec.p, rec.lam, rec.variant), []).append(rec)
        for key in sorted(grouped, key=_none_safe_key):
            recs = grouped[key]
            delta, p, lam, variant = key
            kd = float(np.mean([r.kl_da for r in recs]))
            kc = float(np.mean([r.kl_clust for r in recs]))
            writer.writerow(
                [_fmt(delta), _fmt(p), _fmt(lam), variant,
                 _fmt(kd), _fmt(kc), _fmt(kd + kc), len(recs)]
            )
        return buf.getvalue()

    def grid_mean_ari(self) -> dict[tuple, float]:
        """(delta, p, lambda) -> mean ARI over successful grid fits."""
        out = {}
        for key, vals in _group_rows(
            (r for r in self.rows if r.strategy == "grid"),
            lambda r: (r.delta, r.p, r.lam),
        ):
            mean, _, n_ok = _summarize(vals)
            if n_ok:
                out[key] = mean
        return out

    def failure_counts(self) -> dict[tuple, int]:
        """(delta, p, lambda or strategy) -> number of failed replicates."""
        out: dict[tuple, int] = {}
        for r in self.rows:
            key = (r.delta, r.p, r.lam if r.strategy == "grid" else r.strategy)
            out.setdefault(key, 0)
            if r.error:
                out[key] += 1
        return out


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _none_safe_key(key):
    return tuple(-math.inf if k is None else k for k in key)


def _group_rows(rows, key_fn, values=True):
    grouped: dict[tuple, list] = {}
    for r in rows:
        grouped.setdefault(key_fn(r), []).append(r)
    for key in sorted(grouped, key=_none_safe_key):
        rows_k = grouped[key]
        if values:
            yield key, [r.ari for r in rows_k if not r.error and r.ari is not None]
        else:
            yield key, rows_k


def _summarize(scores):
    n_ok = len(scores)
    if n_ok == 0:
        return None, None, 0
    mean = float(np.mean(scores))
    se = float(np.std(scores, ddof=1) / math.sqrt(n_ok)) if n_ok > 1 else 0.0
    return mean, se, n_ok


def da_feasible(dataset: SupervisedDataset) -> tuple[bool, str]:
    """Fully supervised fits need p+1 labelled rows per class for a
    nonsingular maximum-likelihood covariance."""
    counts = dataset.labelled_counts()
    need = dataset.dim + 1
    for g, c in enumerate(counts):
        if c < need:
            return False, (
                f"singular supervised covariance: class {g} has {int(c)} "
                f"labelled rows, needs at least {need}"
            )
    return True, ""


def clustering_feasible(dataset: SupervisedDataset, G: int) -> tuple[bool, str]:
    """Unsupervised fits need G*(p+1) unlabelled rows for all component
    covariances to be nonsingular even under hard assignments."""
    need = G * (dataset.dim + 1)
    if dataset.n_unlabelled < need:
        return False, (
            f"too few unlabelled rows ({dataset.n_unlabelled}) to estimate "
            f"{G} full covariances, needs at least {need}"
        )
    return True, ""


def _fit_and_score(dataset, partition, G, lam, truth_unlab, epsilon, max_iter):
    """Fit one weight from the shared partition; returns (row fields, fit)."""
    w = SupervisionWeight(lam)
    init = init_from_partition(dataset, partition, w, G)
    cfg = EmConfig(epsilon=epsilon, max_iter=max_iter, init_params=init)
    fit = em_fit(dataset, G, w, cfg)
    score = ari(truth_unlab, fit.hard_assignments) if truth_unlab.size >= 2 else None
    return score, fit


def _run_replicate(args) -> tuple[list[ResultRow], list[KlRecord]]:
    (rep, cfg, data, truth) = args
    delta = cfg.sim.delta if cfg.sim is not None else None
    if cfg.sim is not None:
        spec = SimSpec(
            n=cfg.sim.n, delta=cfg.sim.delta, pi=cfg.sim.pi,
            seed=np.random.SeedSequence(cfg.seed, spawn_key=(rep, 0)),
        )
        data, truth = simulate(spec)
    G = int(truth.max()) + 1
    rows: list[ResultRow] = []
    kl_records: list[KlRecord] = []

    for p in cfg.ps:
        pm = int(round(p * 1000))
        p_pct = round(p * 100, 6)  # rows report the labelled percentage
        split = mask_labels(
            truth, data, MaskSpec(p, cfg.mode),
            seed=np.random.SeedSequence(cfg.seed, spawn_key=(rep, 1, pm)),
            allow_missing_class=True,
        )
        dataset = split.dataset
        truth_unlab = truth[split.unlabelled_idx]
        counts = dataset.labelled_counts()
        missing = [g for g in range(G) if g >= counts.size or counts[g] == 0]
        mask_error = (
            f"degenerate mask: classes {missing} have no labelled rows"
            if missing else ""
        )

        def fail(lam, strategy, message):
            return ResultRow(rep, delta, p_pct, lam, strategy,
                             None, None, None, None, message)

        try:
            km_rng = np.random.default_rng(
                np.random.SeedSequence(cfg.seed, spawn_key=(rep, 2, pm))
            )
            partition = kmeans_partition(dataset.pooled(), G, cfg.restarts, km_rng)
            partition_error = ""
        except FscError as exc:
            partition = None
            partition_error = f"initialization failed: {exc}"

        fits = {}

        def fit_one(lam, strategy):
            lam = round(float(lam), 10)
            if partition_error:
                return fail(lam, strategy, partition_error), None
            if lam > 0.0 and mask_error:
                return fail(lam, strategy, mask_error), None
            if lam == 1.0:
                ok, msg = da_feasible(dataset)
                if not ok:
                    return fail(lam, strategy, msg), None
            if lam == 0.0:
                ok, msg = clustering_feasible(dataset, G)
                if not ok:
                    return fail(lam, strategy, msg), None
            try:
                score, fit = _fit_and_score(
                    dataset, partition, G, lam, truth_unlab,
                    cfg.epsilon, cfg.max_iter,
                )
            except FscError as exc:
                return fail(lam, strategy, str(exc)), None
            row = ResultRow(
                rep, delta, p_pct, lam, strategy, score,
                fit.final_wll, fit.iterations, fit.converged,
            )
            return row, fit

        for lam in cfg.grid:
            row, fit = fit_one(lam, "grid")
            rows.append(row)
            if fit is not None:
                fits[round(float(lam), 10)] = fit

        n1, n2 = dataset.n_labelled, dataset.n_unlabelled
        for strategy in cfg.strategies:
            if strategy == "n2":
                row, _ = fit_one(lambda_n2(n1, n2), "n2")
                rows.append(row)
            elif strategy == "max":
                row, _ = fit_one(lambda_max(n1, n2), "max")
                rows.append(row)
            elif strategy in ("kl1", "kl2"):
                anchors = {}
                for lam_a, name in ((1.0, "supervised"), (0.0, "clustering")):
                    if lam_a in fits:
                        anchors[lam_a] = fits[lam_a]
                    else:
                        _, fit = fit_one(lam_a, f"_anchor_{strategy}")
                        if fit is not None:
                            anchors[lam_a] = fit
                    if lam_a not in anchors:
                        rows.append(fail(None, strategy,
                                         f"{name} anchor fit unavailable"))
                        break
                else:
                    candidates = {lam: f.params for lam, f in fits.items()}
                    if not candidates:
                        rows.append(fail(None, strategy, "every grid fit failed"))
                        continue
                    choice = kl_tradeoff_choice(
                        anchors[1.0].params, anchors[0.0].params,
                        candidates, variant=strategy,
                    )
                    for lam, diag in choice.diagnostics.items():
                        kl_records.append(KlRecord(
                            rep, delta, p_pct, lam, strategy,
                            diag["kl_da"], diag["kl_clust"],
                        ))
                    chosen = fits[choice.value]
                    score = (ari(truth_unlab, chosen.hard_assignments)
                             if truth_unlab.size >= 2 else None)
                    rows.append(ResultRow(
                        rep, delta, p_pct, choice.value, strategy, score,
                        chosen.final_wll, chosen.iterations, chosen.converged,
                    ))
            elif strategy == "ari-oracle":
                if not fits:
                    rows.append(fail(None, strategy, "every grid fit failed"))
                    continue
                if truth_unlab.size < 2:
                    rows.append(fail(None, strategy, "no unlabelled rows to score"))
                    continue
                choice = select_ari_oracle(fits, truth_unlab)
                chosen = fits[choice.value]
                rows.append(ResultRow(
                    rep, delta, p_pct, choice.value, strategy,
                    choice.diagnostics[choice.value],
                    chosen.final_wll, chosen.iterations, chosen.converged,
                ))
    return rows, kl_records


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Run the replicated sweep; deterministic for a given master seed
    regardless of the worker count."""
    if cfg.dataset is not None:
        data = as_matrix(cfg.dataset[0], "data")
        truth = check_partition(cfg.dataset[1], "truth")
    else:
        data = truth = None
    payloads = [(rep, cfg, data, truth) for rep in range(cfg.reps)]
    table = ResultTable()
    if cfg.jobs > 1 and cfg.reps > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_run_replicate, payloads, chunksize=1))
    else:
        results = [_run_replicate(p) for p in payloads]
    for rows, kl_records in results:
        table.rows.extend(rows)
        table.kl_records.extend(kl_records)
    return table
