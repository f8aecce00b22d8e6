"""From-scratch classifier suite over sparse TF-IDF features.

Six algorithms cover the linear, tree and boosting families.  Every model
exposes a real-valued decision score where larger means more vishing-like;
``predict`` labels a row VISHING only when the score is strictly above the
model's threshold, so an exact tie goes to BENIGN.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp

from ..corpus import Label
from ..errors import ConfigError, ShapeError, TrainingError
from ..tfidf import SparseFeatureVector, stack
from .ensemble import AdaBoostModel, DecisionTreeModel, GradientBoostingModel, RandomForestModel
from .linear import LinearSVMModel, LogisticRegressionModel, logistic_loss_and_grad

FORMAT = "vishbench-classifier"
FORMAT_VERSION = 1


class Algorithm(str, enum.Enum):
    LOGISTIC_REGRESSION = "LogisticRegression"
    LINEAR_SVM = "LinearSVM"
    DECISION_TREE = "DecisionTree"
    RANDOM_FOREST = "RandomForest"
    ADABOOST = "AdaBoost"
    GRADIENT_BOOSTING = "GradientBoosting"


_MODELS = {
    Algorithm.LOGISTIC_REGRESSION: LogisticRegressionModel,
    Algorithm.LINEAR_SVM: LinearSVMModel,
    Algorithm.DECISION_TREE: DecisionTreeModel,
    Algorithm.RANDOM_FOREST: RandomForestModel,
    Algorithm.ADABOOST: AdaBoostModel,
    Algorithm.GRADIENT_BOOSTING: GradientBoostingModel,
}

DEFAULTS: dict[Algorithm, dict[str, Any]] = {
    Algorithm.LOGISTIC_REGRESSION: {"l2": 1e-4, "epochs": 500, "step": 0.5, "decay": 0.01},
    Algorithm.LINEAR_SVM: {"l2": 1e-4, "epochs": 500, "step": 0.5, "decay": 0.01},
    Algorithm.DECISION_TREE: {"max_depth": 32, "min_samples_leaf": 1, "max_features": None},
    Algorithm.RANDOM_FOREST: {
        "n_trees": 100, "max_depth": 32, "min_samples_leaf": 1,
        "max_features": "sqrt", "bootstrap": True,
    },
    Algorithm.ADABOOST: {"n_rounds": 50, "max_depth": 1},
    Algorithm.GRADIENT_BOOSTING: {
        "n_rounds": 100, "learning_rate": 0.1, "max_depth": 3, "min_samples_leaf": 1,
    },
}

_POSITIVE_INT = {"epochs", "max_depth", "min_samples_leaf", "n_trees", "n_rounds"}
_POSITIVE_REAL = {"step", "learning_rate"}
_NONNEG_REAL = {"l2", "decay"}


def validate_hyperparams(algorithm: Algorithm, hyperparams: dict | None) -> dict:
    """Merge ``hyperparams`` over the defaults, rejecting unknown keys and bad values."""
    defaults = DEFAULTS[algorithm]
    hp = dict(defaults)
    for key, val in (hyperparams or {}).items():
        if key not in defaults:
            raise ConfigError(f"{algorithm.value}: unknown hyperparameter {key!r}")
        hp[key] = val
    for key, val in hp.items():
        if key in _POSITIVE_INT and (isinstance(val, bool) or not isinstance(val, int) or val < 1):
            raise ConfigError(f"{algorithm.value}: {key} must be a positive integer, got {val!r}")
        if key in _POSITIVE_REAL and not (isinstance(val, (int, float)) and val > 0):
            raise ConfigError(f"{algorithm.value}: {key} must be > 0, got {val!r}")
        if key in _NONNEG_REAL and not (isinstance(val, (int, float)) and val >= 0):
            raise ConfigError(f"{algorithm.value}: {key} must be >= 0, got {val!r}")
        if key == "max_features" and val is not None and val not in ("sqrt", "log2"):
            ok = (isinstance(val, int) and not isinstance(val, bool) and val >= 1) or (
                isinstance(val, float) and 0 < val <= 1)
            if not ok:
                raise ConfigError(f"{algorithm.value}: bad max_features {val!r}")
        if key == "bootstrap" and not isinstance(val, bool):
            raise ConfigError(f"{algorithm.value}: bootstrap must be a boolean")
    return hp


@dataclass(frozen=True)
class ClassifierSpec:
    algorithm: Algorithm
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0
    name: str | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "algorithm", Algorithm(self.algorithm))
        except ValueError:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}") from None
        object.__setattr__(self, "hyperparams", validate_hyperparams(self.algorithm, self.hyperparams))

    @property
    def label(self) -> str:
        return self.name or self.algorithm.value

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm.value, "hyperparams": dict(self.hyperparams),
                "seed": self.seed, "name": self.name}

    @classmethod
    def from_dict(cls, obj: dict) -> "ClassifierSpec":
        return cls(obj["algorithm"], obj.get("hyperparams") or {}, int(obj.get("seed", 0)), obj.get("name"))


def default_suite(seed: int = 0) -> list[ClassifierSpec]:
    return [ClassifierSpec(a, seed=seed) for a in Algorithm]


def _as_matrix(X) -> sp.csr_matrix:
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    if isinstance(X, np.ndarray):
        return sp.csr_matrix(np.atleast_2d(X).astype(np.float64))
    X = list(X)
    if X and isinstance(X[0], SparseFeatureVector):
        return stack(X)
    return sp.csr_matrix(np.atleast_2d(np.asarray(X, dtype=np.float64)))


def _as_labels(y) -> np.ndarray:
    return np.array([int(Label.parse(v)) for v in y], dtype=np.int64)


@dataclass(frozen=True)
class TrainedClassifier:
    spec: ClassifierSpec
    model_state: Any
    feature_dimension: int

    @property
    def name(self) -> str:
        return self.spec.label

    @property
    def threshold(self) -> float:
        return self.model_state.threshold

    def _check(self, X) -> sp.csr_matrix:
        M = _as_matrix(X)
        if M.shape[1] != self.feature_dimension:
            raise ShapeError(f"{self.name}: expected dimension {self.feature_dimension}, got {M.shape[1]}")
        return M

    def decision_score(self, X) -> np.ndarray:
        return np.asarray(self.model_state.scores(self._check(X)), dtype=np.float64)

    def predict(self, X) -> np.ndarray:
        return (self.decision_score(X) > self.threshold).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "spec": self.spec.to_dict(),
            "feature_dimension": self.feature_dimension,
            "state": self.model_state.to_state(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainedClassifier":
        if obj.get("format") != FORMAT or obj.get("version") != FORMAT_VERSION:
            raise ValueError("not a version-1 vishbench classifier file")
        spec = ClassifierSpec.from_dict(obj["spec"])
        state = _MODELS[spec.algorithm].from_state(obj["state"])
        return cls(spec, state, int(obj["feature_dimension"]))

    @classmethod
    def load(cls, path: str | Path) -> "TrainedClassifier":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train(spec: ClassifierSpec, X, y: Sequence) -> TrainedClassifier:
    M = _as_matrix(X)
    labels = _as_labels(y)
    if M.shape[0] != labels.size:
        raise ShapeError(f"{M.shape[0]} rows but {labels.size} labels")
    if labels.size < 2:
        raise TrainingError("need at least two training rows")
    if np.unique(labels).size < 2:
        raise TrainingError("training labels contain a single class")
    state = _MODELS[spec.algorithm].fit(M, labels, spec.hyperparams, spec.seed)
    return TrainedClassifier(spec, state, M.shape[1])


def predict(model: TrainedClassifier, X) -> np.ndarray:
    return model.predict(X)


def decision_score(model: TrainedClassifier, X) -> np.ndarray:
    return model.decision_score(X)


__all__ = [
    "Algorithm", "ClassifierSpec", "TrainedClassifier", "DEFAULTS", "default_suite",
    "train", "predict", "decision_score", "validate_hyperparams", "logistic_loss_and_grad",
]
