import numpy as np
import pytest

from sdmbench.core import ConfigError
from sdmbench.forest import (
    ForestModel,
    binary_f1,
    cv_fold_assignment,
    fit_forest,
    fit_random_forest,
)


def test_pure_threshold_data_learned_exactly(rng):
    X = rng.uniform(-1, 1, size=(200, 1))
    y = (X[:, 0] > 0.2).astype(int)
    model = fit_random_forest(X, y, n_trees=20, max_depth=3, min_leaf=1, seed=0)
    pred = model.predict_proba(X) >= 0.5
    assert np.array_equal(pred, y.astype(bool))


def test_constant_response_gives_constant_probability(rng):
    X = rng.standard_normal((30, 2))
    model = fit_random_forest(X, np.ones(30), n_trees=5, max_depth=2, min_leaf=1, seed=0)
    assert model.single_class
    assert np.all(model.predict_proba(X) == 1.0)
    zero = fit_random_forest(X, np.zeros(30), n_trees=5, max_depth=2, min_leaf=1, seed=0)
    assert np.all(zero.predict_proba(X) == 0.0)


def test_forest_deterministic_given_seed(rng):
    X = rng.standard_normal((100, 4))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    a = fit_random_forest(X, y, 15, 5, 2, seed=42)
    b = fit_random_forest(X, y, 15, 5, 2, seed=42)
    Xq = rng.standard_normal((40, 4))
    assert np.array_equal(a.predict_proba(Xq), b.predict_proba(Xq))
    c = fit_random_forest(X, y, 15, 5, 2, seed=43)
    assert not np.array_equal(a.predict_proba(Xq), c.predict_proba(Xq))


def test_vote_fraction_in_unit_interval(rng):
    X = rng.standard_normal((80, 3))
    y = (rng.random(80) < 0.4).astype(int)
    model = fit_random_forest(X, y, 11, 4, 2, seed=1)
    p = model.predict_proba(rng.standard_normal((200, 3)))
    assert np.all((p >= 0.0) & (p <= 1.0))
    # vote fractions are multiples of 1/n_trees
    assert np.allclose(p * 11, np.round(p * 11))


def test_max_depth_respected(rng):
    X = rng.standard_normal((200, 3))
    y = (rng.random(200) < 0.5).astype(int)
    model = fit_random_forest(X, y, 8, max_depth=3, min_leaf=1, seed=3)

    def depth(node):
        if node.is_leaf:
            return 0
        return 1 + max(depth(node.left), depth(node.right))

    assert all(depth(t) <= 3 for t in model.trees)


def test_binary_f1_cases():
    assert binary_f1([1, 1, 0], [1, 1, 0]) == 1.0
    assert binary_f1([1, 0], [0, 1]) == 0.0
    assert binary_f1([0, 0], [0, 0]) == 0.0  # 0/0 defined as 0
    assert binary_f1([1, 1, 0, 0], [1, 0, 1, 0]) == pytest.approx(0.5)


def test_cv_folds_balanced():
    folds = cv_fold_assignment(10, 3, seed=0)
    counts = np.bincount(folds, minlength=3)
    assert sorted(counts) == [3, 3, 4]
    assert np.array_equal(folds, cv_fold_assignment(10, 3, seed=0))


def test_grid_search_matches_brute_force_reevaluation(rng):
    X = rng.standard_normal((90, 3))
    y = ((X[:, 0] > 0) & (X[:, 1] < 0.5)).astype(int)
    grid = {"n_trees": [5, 10], "max_depth": [2, 4], "min_leaf": [1, 5]}
    result = fit_forest(X, y, grid=grid, cv_folds=3, seed=7)

    # recompute every cell with the same folds and seeds
    folds = cv_fold_assignment(len(y), 3, seed=7)
    best_cell, best_score = None, -np.inf
    from itertools import product

    for cell in product(grid["n_trees"], grid["max_depth"], grid["min_leaf"]):
        scores = []
        for fold in range(3):
            test = folds == fold
            model = fit_random_forest(
                X[~test], y[~test], cell[0], cell[1], cell[2], seed=(7 * 1000 + fold)
            )
            scores.append(binary_f1(y[test], model.predict_proba(X[test]) >= 0.5))
        mean = float(np.mean(scores))
        assert mean == pytest.approx(result.cv_scores[cell], abs=1e-12)
        if mean > best_score + 1e-15:
            best_cell, best_score = cell, mean
    assert result.best_params == dict(zip(["n_trees", "max_depth", "min_leaf"], best_cell))


def test_grid_search_single_class_short_circuits(rng):
    X = rng.standard_normal((20, 2))
    result = fit_forest(X, np.zeros(20), grid={"n_trees": [3], "max_depth": [2], "min_leaf": [1]})
    assert result.single_class
    assert np.all(result.model.predict_proba(X) == 0.0)


def test_grid_search_validation():
    X = np.zeros((10, 1))
    y = np.array([0, 1] * 5)
    with pytest.raises(ConfigError):
        fit_forest(X, y, grid={}, cv_folds=3)
    with pytest.raises(ConfigError):
        fit_forest(X, y, grid={"n_trees": [5], "max_depth": [2], "min_leaf": [1]}, cv_folds=1)


def test_forest_serialization_roundtrip(rng):
    X = rng.standard_normal((60, 3))
    y = (X[:, 0] > 0).astype(int)
    model = fit_random_forest(X, y, 7, 4, 2, seed=5)
    back = ForestModel.from_dict(model.to_dict())
    Xq = rng.standard_normal((30, 3))
    assert np.array_equal(back.predict_proba(Xq), model.predict_proba(Xq))


def test_prediction_invariant_to_tree_order(rng):
    X = rng.standard_normal((80, 3))
    y = (X[:, 0] > 0).astype(int)
    model = fit_random_forest(X, y, 9, 4, 1, seed=2)
    Xq = rng.standard_normal((30, 3))
    base = model.predict_proba(Xq)
    shuffled = ForestModel(
        trees=[model.trees[i] for i in rng.permutation(len(model.trees))],
        n_trees=model.n_trees,
        max_depth=model.max_depth,
        min_leaf=model.min_leaf,
        features_per_split=model.features_per_split,
    )
    assert np.array_equal(shuffled.predict_proba(Xq), base)
