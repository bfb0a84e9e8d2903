"""Gradient-boosted trees, random forests, and the boosted ROI classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._tree_kernels import LEAF, apply_tree, build_tree, predict_forest
from .inputs import flat_features

GBDT = "gbdt"
RF = "rf"


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if self.feature[node] != LEAF:
                depth[self.left[node]] = depth[node] + 1
                depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        return apply_tree(np.ascontiguousarray(X, dtype=float), self.feature, self.threshold, self.left, self.right)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_json(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
        )


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    max_depth: int,
    min_samples_leaf: int = 1,
    sample_idx: np.ndarray | None = None,
    mtries: int | None = None,
    rng: np.random.Generator | None = None,
) -> Tree:
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("cannot fit a tree on empty data")
    if sample_idx is None:
        sample_idx = np.arange(len(y), dtype=np.int64)
    n_feat = X.shape[1]
    mtries = n_feat if mtries is None else int(mtries)
    if not 1 <= mtries <= n_feat:
        raise ValueError(f"mtries must be in [1, {n_feat}]")
    if mtries < n_feat:
        if rng is None:
            raise ValueError("feature subsampling needs an rng")
        keys = rng.random((2 * len(sample_idx) + 1, n_feat))
    else:
        keys = np.zeros((1, n_feat))
    f, t, l, r, v, _ = build_tree(X, y, np.asarray(sample_idx, dtype=np.int64), int(max_depth), int(min_samples_leaf), mtries, keys)
    return Tree(f, t, l, r, v)


@dataclass
class TreeEnsembleModel:
    """Additive tree ensemble: prediction = base + sum_t weight_t * tree_t(x),
    divided by the tree count for a forest."""

    kind: str
    trees: list[Tree]
    base: float
    weights: np.ndarray
    hyperparameters: dict = field(default_factory=dict)
    train_rmse: list[float] = field(default_factory=list)
    _packed: tuple | None = field(default=None, repr=False, compare=False)

    def _pack(self):
        if self._packed is None:
            offsets = np.zeros(len(self.trees) + 1, dtype=np.int64)
            offsets[1:] = np.cumsum([t.n_nodes for t in self.trees])
            cat = lambda attr, dt: (
                np.concatenate([getattr(t, attr) for t in self.trees]).astype(dt) if self.trees else np.zeros(0, dt)
            )
            self._packed = (
                cat("feature", np.int64),
                cat("threshold", float),
                cat("left", np.int64),
                cat("right", np.int64),
                cat("value", float),
                offsets,
                np.asarray(self.weights, dtype=float),
            )
        return self._packed

    def decision(self, X) -> np.ndarray:
        X = np.ascontiguousarray(flat_features(X, self.hyperparameters.get("graph_sums", False)))
        out = predict_forest(X, *self._pack())
        if self.kind == RF and self.trees:
            # unit weights, one division: exact whenever the sum is
            out = out / len(self.trees)
        return self.base + out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.decision(X)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "base": self.base,
            "weights": np.asarray(self.weights).tolist(),
            "hyperparameters": self.hyperparameters,
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, d: dict) -> "TreeEnsembleModel":
        return cls(d["kind"], [Tree.from_json(t) for t in d["trees"]], float(d["base"]), np.asarray(d["weights"], dtype=float), d["hyperparameters"])


def _rmse(a, b) -> float:
    return float(np.sqrt(np.mean((a - b) ** 2)))


def train_gbdt(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 100,
    max_depth: int = 5,
    learning_rate: float = 0.1,
    min_samples_leaf: int = 5,
) -> TreeEnsembleModel:
    """Least-squares boosting: each tree fits the current residuals, shrunk by the learning rate."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("empty training data")
    base = float(y.mean())
    pred = np.full(len(y), base)
    trees = []
    history = [_rmse(y, pred)]
    for _ in range(n_estimators):
        tree = fit_tree(X, y - pred, max_depth, min_samples_leaf)
        pred = pred + learning_rate * tree.predict(X)
        trees.append(tree)
        history.append(_rmse(y, pred))
    hp = dict(n_estimators=n_estimators, max_depth=max_depth, learning_rate=learning_rate, min_samples_leaf=min_samples_leaf)
    return TreeEnsembleModel(GBDT, trees, base, np.full(len(trees), learning_rate), hp, history)


def train_rf(
    X: np.ndarray,
    y: np.ndarray,
    n_estimators: int = 100,
    max_depth: int = 20,
    mtries: int | None = None,
    min_samples_leaf: int = 1,
    bootstrap: bool = True,
    seed: int = 0,
) -> TreeEnsembleModel:
    """Bagged trees with per-split random feature subsets of size ``mtries``."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, n_feat = X.shape
    if n == 0:
        raise ValueError("empty training data")
    if mtries is None:
        mtries = max(1, n_feat // 3)
    rng = np.random.default_rng(seed)
    trees = []
    for _ in range(n_estimators):
        idx = rng.integers(0, n, n) if bootstrap else np.arange(n)
        trees.append(fit_tree(X, y, max_depth, min_samples_leaf, idx, mtries, rng))
    hp = dict(n_estimators=n_estimators, max_depth=max_depth, mtries=int(mtries), min_samples_leaf=min_samples_leaf, bootstrap=bootstrap, seed=seed)
    return TreeEnsembleModel(RF, trees, 0.0, np.ones(len(trees)), hp)


@dataclass
class BoostedClassifier:
    """Binary gradient boosting with logistic loss and Newton leaf values."""

    ensemble: TreeEnsembleModel

    def decision(self, X) -> np.ndarray:
        return self.ensemble.decision(X)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.decision(X)))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.decision(X) > 0.0

    def to_json(self) -> dict:
        return self.ensemble.to_json()

    @classmethod
    def from_json(cls, d: dict) -> "BoostedClassifier":
        return cls(TreeEnsembleModel.from_json(d))


def train_boosted_classifier(
    X: np.ndarray,
    labels: np.ndarray,
    n_estimators: int = 100,
    max_depth: int = 4,
    learning_rate: float = 0.1,
    min_samples_leaf: int = 3,
) -> BoostedClassifier:
    X = np.ascontiguousarray(X, dtype=float)
    yb = np.asarray(labels, dtype=float)
    if len(yb) == 0:
        raise ValueError("empty training data")
    if yb.min() == yb.max():
        raise ValueError("classifier needs both classes in the training data")
    p0 = yb.mean()
    base = float(np.log(p0 / (1.0 - p0)))
    f = np.full(len(yb), base)
    trees = []
    for _ in range(n_estimators):
        p = 1.0 / (1.0 + np.exp(-f))
        g = yb - p
        tree = fit_tree(X, g, max_depth, min_samples_leaf)
        leaves = tree.apply(X)
        num = np.bincount(leaves, weights=g, minlength=tree.n_nodes)
        den = np.bincount(leaves, weights=p * (1.0 - p), minlength=tree.n_nodes)
        tree.value = np.where(den > 1e-12, num / np.maximum(den, 1e-12), 0.0)
        tree.value = np.clip(tree.value, -20.0, 20.0)
        f = f + learning_rate * tree.value[leaves]
        trees.append(tree)
    hp = dict(n_estimators=n_estimators, max_depth=max_depth, learning_rate=learning_rate, min_samples_leaf=min_samples_leaf)
    return BoostedClassifier(TreeEnsembleModel("gbdt_logistic", trees, base, np.full(len(trees), learning_rate), hp))
