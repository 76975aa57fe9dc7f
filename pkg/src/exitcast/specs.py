"""Per-component configuration objects plugged into the cross-validation loop.

Each spec bundles a component's hyperparameters with its preprocessing
choices: the linear and forest models consume all 19 raw features, while the
kernel model works in the reduced principal-component space and may cap its
training-set size (kernel training cost grows steeply with sample count).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forest, logreg, svm

__all__ = ["LogRegSpec", "ForestSpec", "SVMSpec", "COMPONENT_ORDER"]

COMPONENT_ORDER = ("lr", "rf", "svm")


@dataclass(frozen=True)
class LogRegSpec:
    ridge: float = 1e-6
    tol: float = 1e-8
    max_iter: int = 100
    name: str = "lr"
    pca_components: int | None = None
    max_train: int | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int) -> logreg.LogisticModel:
        return logreg.logreg_fit(X, y, ridge=self.ridge, tol=self.tol, max_iter=self.max_iter)

    def predict_prob(self, model: logreg.LogisticModel, X: np.ndarray) -> np.ndarray:
        return logreg.logit_prob(model, X)


@dataclass(frozen=True)
class ForestSpec:
    n_trees: int = 500
    mtry: int = 4
    min_node: int = 1
    name: str = "rf"
    pca_components: int | None = None
    max_train: int | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int) -> forest.ForestModel:
        return forest.forest_fit(
            X, y, n_trees=self.n_trees, mtry=self.mtry, min_node=self.min_node, seed=seed
        )

    def predict_prob(self, model: forest.ForestModel, X: np.ndarray) -> np.ndarray:
        return forest.forest_prob(model, X)


@dataclass(frozen=True)
class SVMSpec:
    cost: float = 0.5
    alpha: float = 0.125
    tol: float = 1e-3
    max_passes: int = 1_000_000
    calibration_folds: int = 3
    name: str = "svm"
    pca_components: int | None = 7
    max_train: int | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int) -> svm.SVMModel:
        return svm.svm_fit(
            X,
            y,
            cost=self.cost,
            alpha=self.alpha,
            tol=self.tol,
            max_passes=self.max_passes,
            calibration_folds=self.calibration_folds,
            seed=seed,
        )

    def predict_prob(self, model: svm.SVMModel, X: np.ndarray) -> np.ndarray:
        return svm.svm_prob(model, X)
