"""Tree-based classifiers built on the shared CART builder."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..errors import TrainingError
from .tree import GINI, MSE, Tree, build_tree


def _resolve_max_features(spec, d: int) -> int | None:
    if spec is None:
        return None
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    if spec == "log2":
        return max(1, int(math.log2(d))) if d > 1 else 1
    if isinstance(spec, float):
        return max(1, int(spec * d))
    return int(spec)


@dataclass
class DecisionTreeModel:
    tree: Tree
    threshold = 0.5

    @classmethod
    def fit(cls, X: sp.csr_matrix, y: np.ndarray, hp: dict, seed: int):
        mf = _resolve_max_features(hp["max_features"], X.shape[1])
        rng = np.random.default_rng(seed) if mf is not None else None
        tree = build_tree(
            X, y, criterion=GINI, max_depth=hp["max_depth"],
            min_samples_leaf=hp["min_samples_leaf"], max_features=mf, rng=rng,
        )
        return cls(tree)

    def scores(self, X) -> np.ndarray:
        return self.tree.predict_value(X)

    def to_state(self):
        return {"tree": self.tree.to_state()}

    @classmethod
    def from_state(cls, state):
        return cls(Tree.from_state(state["tree"]))


@dataclass
class RandomForestModel:
    trees: list[Tree]
    threshold = 0.5

    @classmethod
    def fit(cls, X: sp.csr_matrix, y: np.ndarray, hp: dict, seed: int):
        n, d = X.shape
        mf = _resolve_max_features(hp["max_features"], d)
        trees = []
        # one child seed per tree keeps results stable under any build order
        for child in np.random.SeedSequence(seed).spawn(hp["n_trees"]):
            rng = np.random.default_rng(child)
            if hp["bootstrap"]:
                weights = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
            else:
                weights = np.ones(n)
            trees.append(build_tree(
                X, y, weights, criterion=GINI, max_depth=hp["max_depth"],
                min_samples_leaf=hp["min_samples_leaf"], max_features=mf, rng=rng,
            ))
        return cls(trees)

    def scores(self, X) -> np.ndarray:
        votes = np.zeros(X.shape[0])
        for t in self.trees:
            votes += t.predict_value(X) > 0.5
        return votes / len(self.trees)

    def to_state(self):
        return {"trees": [t.to_state() for t in self.trees]}

    @classmethod
    def from_state(cls, state):
        return cls([Tree.from_state(t) for t in state["trees"]])


@dataclass
class AdaBoostModel:
    """Binary SAMME; each stump's leaves hold a vote of +1 or -1."""

    stumps: list[Tree]
    alphas: list[float]
    threshold = 0.0

    @classmethod
    def fit(cls, X: sp.csr_matrix, y: np.ndarray, hp: dict, seed: int):
        n = X.shape[0]
        s = np.where(y == 1, 1.0, -1.0)
        w = np.full(n, 1.0 / n)
        stumps, alphas = [], []
        for _ in range(hp["n_rounds"]):
            tree = build_tree(X, y, w, criterion=GINI, max_depth=hp["max_depth"])
            tree.value = np.where(tree.value > 0.5, 1.0, -1.0)
            miss = tree.predict_value(X) != s
            err = float(w[miss].sum() / w.sum())
            if err >= 0.5:
                break
            if err <= 0.0:
                stumps.append(tree)
                alphas.append(1.0)
                break
            alpha = math.log((1.0 - err) / err)
            stumps.append(tree)
            alphas.append(alpha)
            w = w * np.exp(alpha * miss)
            w /= w.sum()
        if not stumps:
            raise TrainingError("AdaBoost found no weak learner better than chance")
        return cls(stumps, alphas)

    def scores(self, X) -> np.ndarray:
        total = np.zeros(X.shape[0])
        for tree, a in zip(self.stumps, self.alphas):
            total += a * tree.predict_value(X)
        return total / sum(self.alphas)

    def to_state(self):
        return {"stumps": [t.to_state() for t in self.stumps], "alphas": list(self.alphas)}

    @classmethod
    def from_state(cls, state):
        return cls([Tree.from_state(t) for t in state["stumps"]], [float(a) for a in state["alphas"]])


def log_loss(y, F) -> float:
    return float(np.mean(np.logaddexp(0.0, F) - y * F))


@dataclass
class GradientBoostingModel:
    """Logistic-loss boosting with Newton leaf values and shrinkage.

    Stored trees already carry the shrinkage factor in their leaf values.
    """

    init: float
    trees: list[Tree]
    loss_history: list = field(default_factory=list, repr=False)
    threshold = 0.5

    @classmethod
    def fit(cls, X: sp.csr_matrix, y: np.ndarray, hp: dict, seed: int):
        yf = y.astype(np.float64)
        p0 = min(max(yf.mean(), 1e-12), 1 - 1e-12)
        init = math.log(p0 / (1 - p0))
        F = np.full(X.shape[0], init)
        cur = log_loss(yf, F)
        history, trees = [cur], []
        for _ in range(hp["n_rounds"]):
            p = expit(F)
            resid, hess = yf - p, p * (1 - p)
            tree = build_tree(
                X, resid, criterion=MSE, max_depth=hp["max_depth"],
                min_samples_leaf=hp["min_samples_leaf"], leaf_num=resid, leaf_den=hess,
            )
            step = tree.predict_value(X)
            eta = hp["learning_rate"]
            # shrink further if a Newton step overshoots, keeping loss non-increasing
            for _ in range(20):
                new = log_loss(yf, F + eta * step)
                if new <= cur:
                    break
                eta *= 0.5
            else:
                history.append(cur)
                continue
            tree.value = tree.value * eta
            F = F + tree.predict_value(X)
            cur = log_loss(yf, F)
            trees.append(tree)
            history.append(cur)
        return cls(init, trees, history)

    def raw_scores(self, X) -> np.ndarray:
        F = np.full(X.shape[0], self.init)
        for t in self.trees:
            F += t.predict_value(X)
        return F

    def scores(self, X) -> np.ndarray:
        return expit(self.raw_scores(X))

    def to_state(self):
        return {"init": self.init, "trees": [t.to_state() for t in self.trees]}

    @classmethod
    def from_state(cls, state):
        return cls(float(state["init"]), [Tree.from_state(t) for t in state["trees"]])
