"""Scikit-learn style estimators around staged reject-option chains.

``ChainClassifier`` trains a fixed stage layout; ``EvolvedChainClassifier``
searches for one during ``fit``.  Both follow estimator conventions
(``get_params``/``set_params``, ``fit``/``predict``, trailing-underscore
fitted attributes) so they compose with pipelines and ``clone``.  Unlike a
plain classifier, ``predict`` can return ``reject_label`` for inputs whose
confidence never clears the acceptance threshold.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .chain import StagePlan, train_chain
from .chromosome import Chromosome
from .data import split_50_25_25
from .evolution import GaConfig, run
from .objectives import ChainEvaluator

__all__ = ["ChainClassifier", "EvolvedChainClassifier"]


def _validate_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError(f"X must be 2-dimensional, got shape {X.shape}")
    if len(X) != len(y):
        raise ValueError(f"X has {len(X)} rows but y has {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    return X, y


def _resolve_costs(costs, n_features):
    if costs is None:
        return np.ones(n_features, dtype=np.float64)
    arr = np.asarray(costs, dtype=np.float64)
    if arr.shape != (n_features,):
        raise ValueError(f"need one cost per feature, got shape {arr.shape}")
    return arr


class ChainClassifier(BaseEstimator, ClassifierMixin):
    """Early-exit classifier chain with a fixed stage assignment.

    Parameters
    ----------
    stage_assignment : sequence of int or None
        Stage index per feature (gaps allowed; compressed before use).
        None puts every feature into a single stage.
    costs : sequence of float or None
        Per-feature acquisition cost; None means unit costs.
    threshold : float
        Confidence needed to accept a stage's prediction, in [0.5, 1).
    regularization : float
        L2 penalty weight of the per-stage logistic models.
    reject_label : int
        Value ``predict`` returns for inputs rejected at the final stage.
    """

    def __init__(
        self,
        stage_assignment=None,
        costs=None,
        threshold=0.75,
        regularization=1.0,
        reject_label=-1,
    ):
        self.stage_assignment = stage_assignment
        self.costs = costs
        self.threshold = threshold
        self.regularization = regularization
        self.reject_label = reject_label

    def fit(self, X, y):
        X, y = _validate_xy(X, y)
        n_features = X.shape[1]
        if self.stage_assignment is None:
            chromosome = Chromosome.single_stage(n_features)
        else:
            chromosome = Chromosome(tuple(int(g) for g in self.stage_assignment))
            if chromosome.n_features != n_features:
                raise ValueError(
                    f"stage_assignment covers {chromosome.n_features} features "
                    f"but X has {n_features}"
                )
            chromosome = chromosome.compress()
        self.chromosome_ = chromosome
        self.chain_ = train_chain(
            StagePlan.from_chromosome(chromosome),
            X,
            y,
            _resolve_costs(self.costs, n_features),
            threshold=self.threshold,
            lam=self.regularization,
        )
        self.classes_ = self.chain_.classes_
        self.n_features_in_ = n_features
        return self

    def _check_fitted_input(self, X):
        if not hasattr(self, "chain_"):
            raise ValueError("this estimator is not fitted yet; call fit first")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X must have shape (*, {self.n_features_in_}), got {X.shape}"
            )
        return X

    def predict(self, X):
        """Accepted inputs get their class; rejected ones get reject_label."""
        X = self._check_fitted_input(X)
        batch = self.chain_.evaluate_batch(X)
        return np.where(batch.accepted, batch.predicted, self.reject_label)

    def predict_proba(self, X):
        """Class probabilities from the stage each input exited at."""
        X = self._check_fitted_input(X)
        stage_probs = self.chain_.stage_probabilities(X)
        exit_stage = self.chain_.evaluate_batch(X).exit_stage
        rows = np.arange(len(X))
        return np.stack([stage_probs[s - 1][r] for r, s in zip(rows, exit_stage)])

    def decision_cost(self, X):
        """Per-input acquisition cost actually spent."""
        X = self._check_fitted_input(X)
        return self.chain_.evaluate_batch(X).incurred_cost


class EvolvedChainClassifier(BaseEstimator, ClassifierMixin):
    """Classifier that searches for its stage layout while fitting.

    ``fit`` holds out a third of the data (stratified by label, seeded by
    ``random_state``) to score candidate layouts, evolves the staging with
    the configured budget, then retrains the best layout on all of the
    data.  The discovered layout is exposed as ``chromosome_`` and the
    final non-dominated set as ``front_``.
    """

    def __init__(
        self,
        costs=None,
        threshold=0.75,
        population_size=100,
        max_iter=40,
        mutation_rate=None,
        crossover_rate=0.8,
        elitism_fraction=0.2,
        mutation_bias=2.0,
        epsilon=0.01,
        inc=0,
        stall_generations=20,
        max_stages=None,
        regularization=1.0,
        reject_label=-1,
        random_state=0,
    ):
        self.costs = costs
        self.threshold = threshold
        self.population_size = population_size
        self.max_iter = max_iter
        self.mutation_rate = mutation_rate
        self.crossover_rate = crossover_rate
        self.elitism_fraction = elitism_fraction
        self.mutation_bias = mutation_bias
        self.epsilon = epsilon
        self.inc = inc
        self.stall_generations = stall_generations
        self.max_stages = max_stages
        self.regularization = regularization
        self.reject_label = reject_label
        self.random_state = random_state

    def fit(self, X, y):
        X, y = _validate_xy(X, y)
        costs = _resolve_costs(self.costs, X.shape[1])
        # reuse the stratified splitter: train half + test quarter to fit,
        # validation quarter to score candidate layouts during the search
        train_idx, val_idx, test_idx = split_50_25_25(y, seed=self.random_state)
        fit_idx = np.sort(np.concatenate([train_idx, test_idx]))
        evaluator = ChainEvaluator(
            X[fit_idx],
            y[fit_idx],
            X[val_idx],
            y[val_idx],
            costs,
            self.threshold,
            lam=self.regularization,
        )
        config = GaConfig(
            population_size=self.population_size,
            max_iter=self.max_iter,
            mutation_rate=self.mutation_rate,
            crossover_rate=self.crossover_rate,
            elitism_fraction=self.elitism_fraction,
            mutation_bias=self.mutation_bias,
            epsilon=self.epsilon,
            inc=self.inc,
            stall_generations=self.stall_generations,
            max_stages=self.max_stages,
            rng_seed=self.random_state,
        )
        result = run(config, evaluator)
        best, best_objectives = result.best()
        self.chromosome_ = best
        self.front_ = [(c, o) for c, o in result.front]
        self.search_objectives_ = best_objectives
        self.n_generations_ = result.n_generations
        self.halt_reason_ = result.halt_reason
        self._delegate = ChainClassifier(
            stage_assignment=best.genes,
            costs=costs,
            threshold=self.threshold,
            regularization=self.regularization,
            reject_label=self.reject_label,
        ).fit(X, y)
        self.chain_ = self._delegate.chain_
        self.classes_ = self._delegate.classes_
        self.n_features_in_ = X.shape[1]
        return self

    def _fitted(self):
        if not hasattr(self, "_delegate"):
            raise ValueError("this estimator is not fitted yet; call fit first")
        return self._delegate

    def predict(self, X):
        return self._fitted().predict(X)

    def predict_proba(self, X):
        return self._fitted().predict_proba(X)

    def decision_cost(self, X):
        return self._fitted().decision_cost(X)
