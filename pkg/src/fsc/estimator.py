"""Scikit-learn estimator facade over the weighted-likelihood EM core."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ._validation import as_matrix
from .em import EmConfig, SupervisedDataset, SupervisionWeight, em_fit
from .exceptions import InputError
from .mixture import responsibilities

UNLABELLED = -1


class FractionallySupervisedClassifier(ClassifierMixin, BaseEstimator):
    """Gaussian-mixture classifier with a tunable supervision weight.

    Rows of ``y`` equal to ``-1`` are treated as unlabelled. The
    supervision weight interpolates between clustering on the unlabelled
    rows (0), classical semi-supervised classification (0.5), and pure
    discriminant analysis from the labelled rows (1).

    Parameters
    ----------
    supervision_weight : float in [0, 1]
        Weight on the labelled block of the likelihood.
    n_components : int or None
        Mixture components; defaults to the number of observed classes.
    epsilon : float
        EM stops when the weighted log-likelihood gain drops below this.
    max_iter : int
        Iteration cap.
    restarts : int
        k-means restarts used for initialization.
    random_state : int
        Seed for the k-means initialization.

    Attributes
    ----------
    classes_ : (G,) original class labels, sorted.
    weights_, means_, covariances_ : fitted mixture parameters.
    converged_ : bool. n_iter_ : int. wll_trace_ : list of floats.
    """

    def __init__(
        self,
        supervision_weight: float = 0.5,
        n_components: int | None = None,
        epsilon: float = 1e-5,
        max_iter: int = 1000,
        restarts: int = 10,
        random_state: int = 0,
    ):
        self.supervision_weight = supervision_weight
        self.n_components = n_components
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X, y):
        X = as_matrix(X, "X")
        y = np.asarray(y)
        if y.shape != (X.shape[0],):
            raise InputError(f"y must have shape ({X.shape[0]},), got {y.shape}")
        unlabelled = y == UNLABELLED
        self.classes_ = np.unique(y[~unlabelled])
        G = self.n_components if self.n_components is not None else len(self.classes_)
        if G < 1:
            raise InputError("no labelled classes and n_components not given")
        if len(self.classes_) and len(self.classes_) != G:
            raise InputError(
                f"n_components={G} but y contains {len(self.classes_)} classes"
            )
        n1 = int((~unlabelled).sum())
        Z1 = np.zeros((n1, G))
        if n1:
            idx = np.searchsorted(self.classes_, y[~unlabelled])
            Z1[np.arange(n1), idx] = 1.0
        dataset = SupervisedDataset(X1=X[~unlabelled], Z1=Z1, X2=X[unlabelled])
        cfg = EmConfig(
            epsilon=self.epsilon,
            max_iter=self.max_iter,
            restarts=self.restarts,
            seed=self.random_state,
        )
        result = em_fit(dataset, G, SupervisionWeight(self.supervision_weight), cfg)
        self.result_ = result
        self.weights_ = result.params.weights
        self.means_ = result.params.means
        self.covariances_ = result.params.covariances
        self.converged_ = result.converged
        self.n_iter_ = result.iterations
        self.wll_trace_ = result.wll_trace
        return self

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = as_matrix(X, "X", n_cols=self.means_.shape[1])
        return responsibilities(X, self.result_.params)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        idx = np.argmax(proba, axis=1)
        if len(self.classes_):
            return self.classes_[idx]
        return idx

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise InputError("estimator is not fitted; call fit first")
