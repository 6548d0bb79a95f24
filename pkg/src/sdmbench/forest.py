"""Per-species random forest: CART trees with Gini impurity, per-node
feature subsampling, bootstrap resampling, and an exhaustive cross-validated
grid search over hyperparameters. Predicted probability is the fraction of
trees voting presence.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .core import ConfigError, DataError

DEFAULT_GRID = {"n_trees": [50, 200], "max_depth": [4, 8, 16], "min_leaf": [1, 5]}


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    vote: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"vote": self.vote}
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeNode":
        if "vote" in d:
            return cls(vote=d["vote"])
        return cls(
            feature=d["feature"],
            threshold=d["threshold"],
            left=cls.from_dict(d["left"]),
            right=cls.from_dict(d["right"]),
        )


def _best_split(
    X: np.ndarray, y: np.ndarray, features: np.ndarray, min_leaf: int
) -> tuple[float, int, float] | None:
    """Lowest weighted Gini split over the candidate features.

    Returns (gini, feature, threshold); thresholds are midpoints between
    consecutive distinct sorted values, and splits leaving fewer than
    ``min_leaf`` rows on either side are skipped.
    """
    n = len(y)
    best: tuple[float, int, float] | None = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        ones_left = np.cumsum(ys)[:-1]
        n_left = np.arange(1, n)
        boundary = xs[1:] != xs[:-1]
        valid = boundary & (n_left >= min_leaf) & ((n - n_left) >= min_leaf)
        if not valid.any():
            continue
        nl = n_left[valid].astype(float)
        nr = n - nl
        ol = ones_left[valid].astype(float)
        orr = ys.sum() - ol
        gini = (nl / n) * (1.0 - (ol / nl) ** 2 - ((nl - ol) / nl) ** 2) + (nr / n) * (
            1.0 - (orr / nr) ** 2 - ((nr - orr) / nr) ** 2
        )
        pos = int(np.argmin(gini))
        if best is None or gini[pos] < best[0]:
            cut = np.flatnonzero(valid)[pos]
            threshold = 0.5 * (xs[cut] + xs[cut + 1])
            best = (float(gini[pos]), int(f), float(threshold))
    return best


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    depth: int,
    max_depth: int,
    min_leaf: int,
    features_per_split: int,
) -> TreeNode:
    n = len(y)
    ones = int(y.sum())
    if depth >= max_depth or n < 2 * min_leaf or ones == 0 or ones == n:
        return TreeNode(vote=int(2 * ones >= n))
    features = rng.choice(X.shape[1], size=min(features_per_split, X.shape[1]), replace=False)
    split = _best_split(X, y, features, min_leaf)
    if split is None:
        return TreeNode(vote=int(2 * ones >= n))
    _, f, threshold = split
    mask = X[:, f] <= threshold
    return TreeNode(
        feature=f,
        threshold=threshold,
        left=_grow(X[mask], y[mask], rng, depth + 1, max_depth, min_leaf, features_per_split),
        right=_grow(X[~mask], y[~mask], rng, depth + 1, max_depth, min_leaf, features_per_split),
    )


def _tree_votes(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X), dtype=np.int8)
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = nd.vote
            continue
        mask = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


@dataclass
class ForestModel:
    """Bootstrap ensemble; probability is the vote fraction, so it is
    invariant to tree evaluation order."""

    trees: list[TreeNode] = field(default_factory=list)
    n_trees: int = 0
    max_depth: int = 0
    min_leaf: int = 1
    features_per_split: int = 1
    constant: float | None = None  # single-class fallback probability
    single_class: bool = False

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.constant is not None:
            return np.full(len(X), self.constant)
        votes = np.zeros(len(X), dtype=float)
        for tree in self.trees:
            votes += _tree_votes(tree, X)
        return votes / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "features_per_split": self.features_per_split,
            "constant": self.constant,
            "single_class": self.single_class,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        return cls(
            trees=[TreeNode.from_dict(t) for t in d["trees"]],
            n_trees=d["n_trees"],
            max_depth=d["max_depth"],
            min_leaf=d["min_leaf"],
            features_per_split=d["features_per_split"],
            constant=d["constant"],
            single_class=d["single_class"],
        )


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_trees: int,
    max_depth: int,
    min_leaf: int,
    seed: int,
    features_per_split: int | None = None,
) -> ForestModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int8)
    if not np.isfinite(X).all():
        raise DataError("non-finite feature values")
    if features_per_split is None:
        features_per_split = int(np.ceil(np.sqrt(X.shape[1])))
    if y.sum() == 0 or y.sum() == len(y):
        return ForestModel(
            constant=float(y.mean()),
            single_class=True,
            n_trees=n_trees,
            max_depth=max_depth,
            min_leaf=min_leaf,
            features_per_split=features_per_split,
        )
    trees = []
    for t in range(n_trees):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, t))))
        boot = rng.integers(0, len(y), size=len(y))
        trees.append(
            _grow(X[boot], y[boot], rng, 0, max_depth, min_leaf, features_per_split)
        )
    return ForestModel(
        trees=trees,
        n_trees=n_trees,
        max_depth=max_depth,
        min_leaf=min_leaf,
        features_per_split=features_per_split,
    )


def binary_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """F1 of the positive class with the 0/0 case defined as 0."""
    y_true = np.asarray(y_true).astype(bool)
    y_pred = np.asarray(y_pred).astype(bool)
    tp = float(np.sum(y_true & y_pred))
    fp = float(np.sum(~y_true & y_pred))
    fn = float(np.sum(y_true & ~y_pred))
    denom = tp + (fp + fn) / 2.0
    return tp / denom if denom > 0 else 0.0


def cv_fold_assignment(n: int, cv_folds: int, seed: int) -> np.ndarray:
    """Deterministic shuffled fold labels, as balanced as n allows."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 987))))
    labels = np.arange(n) % cv_folds
    return labels[rng.permutation(n)]


@dataclass
class GridSearchResult:
    model: ForestModel
    best_params: dict
    cv_scores: dict[tuple, float]
    single_class: bool = False


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    grid: dict[str, list] | None = None,
    cv_folds: int = 3,
    seed: int = 0,
    features_per_split: int | None = None,
) -> GridSearchResult:
    """Exhaustive grid search maximizing mean CV F1 (threshold 0.5 on the
    vote fraction), then a refit of the winning configuration on all rows.

    Ties keep the first grid cell in declaration order. A single-class
    response short-circuits to a flagged constant-probability model.
    """
    if grid is None:
        grid = DEFAULT_GRID
    if not grid or any(not v for v in grid.values()):
        raise ConfigError("grid must be non-empty")
    missing = {"n_trees", "max_depth", "min_leaf"} - set(grid)
    if missing:
        raise ConfigError(f"grid missing parameters: {sorted(missing)}")
    if cv_folds < 2:
        raise ConfigError("cv_folds must be >= 2")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(np.int8)
    if y.sum() == 0 or y.sum() == len(y):
        model = fit_random_forest(X, y, 1, 1, 1, seed, features_per_split)
        return GridSearchResult(model, {}, {}, single_class=True)

    folds = cv_fold_assignment(len(y), cv_folds, seed)
    keys = list(grid.keys())
    cv_scores: dict[tuple, float] = {}
    best_cell: tuple | None = None
    for cell in product(*(grid[k] for k in keys)):
        params = dict(zip(keys, cell))
        scores = []
        for fold in range(cv_folds):
            test = folds == fold
            model = fit_random_forest(
                X[~test],
                y[~test],
                params["n_trees"],
                params["max_depth"],
                params["min_leaf"],
                seed=(seed * 1000 + fold),
                features_per_split=features_per_split,
            )
            pred = model.predict_proba(X[test]) >= 0.5
            scores.append(binary_f1(y[test], pred))
        cv_scores[cell] = float(np.mean(scores))
        if best_cell is None or cv_scores[cell] > cv_scores[best_cell] + 1e-15:
            best_cell = cell
    best_params = dict(zip(keys, best_cell))
    final = fit_random_forest(
        X,
        y,
        best_params["n_trees"],
        best_params["max_depth"],
        best_params["min_leaf"],
        seed=seed,
        features_per_split=features_per_split,
    )
    return GridSearchResult(final, best_params, cv_scores)
