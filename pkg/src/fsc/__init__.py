"""Fractionally-supervised classification.

Weighted-likelihood EM for Gaussian mixtures over labelled + unlabelled
data, with a supervision weight interpolating between clustering,
semi-supervised classification, and discriminant analysis; plus weight
selection strategies, ARI evaluation, and a replication harness.
"""

from .datasets import DatasetSchema, load_builtin, load_csv, standardize, write_csv
from .em import (
    EmConfig,
    FitResult,
    SupervisedDataset,
    SupervisionWeight,
    da_fit,
    em_fit,
    init_from_partition,
    kmeans_init,
    kmeans_partition,
    weighted_log_likelihood,
)
from .estimator import FractionallySupervisedClassifier
from .exceptions import (
    DegenerateComponentError,
    DegenerateMaskError,
    FscError,
    InitializationError,
    InputError,
    InsufficientLabelsError,
    ParseError,
    SchemaError,
    SingularCovarianceError,
    StrategyUnavailableError,
)
from .gaussian import GaussianParams, SpdFactor, gaussian_kl, log_density
from .metrics import ari
from .mixture import (
    MixtureParams,
    mixture_kl_matched,
    mixture_log_density,
    responsibilities,
)
from .simulate import (
    ExperimentConfig,
    MaskSpec,
    MaskedSplit,
    ResultRow,
    ResultTable,
    SimSpec,
    mask_labels,
    run_experiment,
    simulate,
)
from .weights import (
    LambdaGrid,
    WeightChoice,
    lambda_max,
    lambda_n2,
    select_ari_oracle,
    select_kl,
)

__version__ = "0.1.0"

__all__ = [
    "DatasetSchema", "load_builtin", "load_csv", "standardize", "write_csv",
    "EmConfig", "FitResult", "SupervisedDataset", "SupervisionWeight",
    "da_fit", "em_fit", "init_from_partition", "kmeans_init",
    "kmeans_partition", "weighted_log_likelihood",
    "FractionallySupervisedClassifier",
    "DegenerateComponentError", "DegenerateMaskError", "FscError",
    "InitializationError", "InputError", "InsufficientLabelsError",
    "ParseError", "SchemaError", "SingularCovarianceError",
    "StrategyUnavailableError",
    "GaussianParams", "SpdFactor", "gaussian_kl", "log_density",
    "ari",
    "MixtureParams", "mixture_kl_matched", "mixture_log_density",
    "responsibilities",
    "ExperimentConfig", "MaskSpec", "MaskedSplit", "ResultRow", "ResultTable",
    "SimSpec", "mask_labels", "run_experiment", "simulate",
    "LambdaGrid", "WeightChoice", "lambda_max", "lambda_n2",
    "select_ari_oracle", "select_kl",
]
