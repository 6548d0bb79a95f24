"""Per-species model bank: fits one model per species over a shared feature
matrix, calibrates probabilities, optionally filters species by predictive
skill on a held-out sub-validation split, and predicts full probability
vectors (dropped or unkept species pinned to 0).
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assemblage import AssemblageRule, assemble
from .forest import ForestModel, fit_forest
from .glm import PoissonGLM, calibrate_cloglog, fit_poisson_l1

log = logging.getLogger(__name__)

MIN_PRESENCES_FIT = 5  # below this a species is dropped (predicted absent)
MIN_PRESENCES_FULL_FEATURES = 20  # below this only linear terms are used


@dataclass
class SpeciesModel:
    species: int
    kind: str  # "glm" | "forest" | "dropped"
    n_presences: int
    glm: PoissonGLM | None = None
    forest: ForestModel | None = None
    feature_columns: np.ndarray | None = None  # column subset the model saw
    sub_val_f1: float | None = None
    kept: bool = True

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "dropped" or not self.kept:
            return np.zeros(len(X))
        cols = X if self.feature_columns is None else X[:, self.feature_columns]
        if self.kind == "glm":
            return np.clip(self.glm.probability(cols), 0.0, 1.0)
        return self.forest.predict_proba(cols)

    def to_dict(self) -> dict:
        return {
            "species": self.species,
            "kind": self.kind,
            "n_presences": self.n_presences,
            "glm": self.glm.to_dict() if self.glm else None,
            "forest": self.forest.to_dict() if self.forest else None,
            "feature_columns": None
            if self.feature_columns is None
            else [int(c) for c in self.feature_columns],
            "sub_val_f1": self.sub_val_f1,
            "kept": self.kept,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpeciesModel":
        return cls(
            species=d["species"],
            kind=d["kind"],
            n_presences=d["n_presences"],
            glm=PoissonGLM.from_dict(d["glm"]) if d["glm"] else None,
            forest=ForestModel.from_dict(d["forest"]) if d["forest"] else None,
            feature_columns=None
            if d["feature_columns"] is None
            else np.asarray(d["feature_columns"], dtype=int),
            sub_val_f1=d["sub_val_f1"],
            kept=d["kept"],
        )


@dataclass
class SpeciesModelBank:
    models: list[SpeciesModel]
    n_species: int
    kept_count: int | None = None  # set by filtering
    meta: dict = field(default_factory=dict)

    def predict_probs(self, X: np.ndarray) -> np.ndarray:
        """(N, S) probability matrix; absent models contribute zeros."""
        X = np.asarray(X, dtype=float)
        out = np.zeros((len(X), self.n_species))
        for m in self.models:
            out[:, m.species] = m.predict(X)
        return out

    def to_dict(self) -> dict:
        return {
            "n_species": self.n_species,
            "kept_count": self.kept_count,
            "meta": self.meta,
            "models": [m.to_dict() for m in self.models],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpeciesModelBank":
        return cls(
            models=[SpeciesModel.from_dict(m) for m in d["models"]],
            n_species=d["n_species"],
            kept_count=d["kept_count"],
            meta=d.get("meta", {}),
        )


def _presence_column(Y: np.ndarray, s: int) -> np.ndarray:
    return Y[:, s]


def fit_glm_bank(
    X: np.ndarray,
    Y: np.ndarray,
    linear_columns: np.ndarray,
    lam: float | None = None,
    seed: int = 0,
    workers: int = 1,
) -> SpeciesModelBank:
    """One L1 Poisson model per species on expanded features.

    Species with fewer than 5 presences are dropped (always predicted
    absent); species under 20 presences are fit on the linear columns only.
    The cloglog coefficient is calibrated per species on the same rows.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, n_species = Y.shape
    if lam is None:
        lam = 1e-3 * n
    lin_cols = np.flatnonzero(linear_columns)

    def fit_one(s: int) -> SpeciesModel:
        y = _presence_column(Y, s)
        presences = int(y.sum())
        if presences < MIN_PRESENCES_FIT:
            return SpeciesModel(s, "dropped", presences)
        cols = None if presences >= MIN_PRESENCES_FULL_FEATURES else lin_cols
        Xs = X if cols is None else X[:, cols]
        model = fit_poisson_l1(Xs, y, lam)
        model.cloglog_c = calibrate_cloglog(model, Xs, y)
        if not model.converged:
            log.warning("species %d: GLM did not converge in %d iterations", s, model.n_iter)
        return SpeciesModel(s, "glm", presences, glm=model, feature_columns=cols)

    models = _map_species(fit_one, n_species, workers)
    dropped = sum(1 for m in models if m.kind == "dropped")
    if dropped:
        log.info("%d of %d species dropped (insufficient presences)", dropped, n_species)
    return SpeciesModelBank(models, n_species, meta={"lambda": lam, "kind": "glm"})


def fit_forest_bank(
    X: np.ndarray,
    Y: np.ndarray,
    grid: dict | None = None,
    cv_folds: int = 3,
    seed: int = 0,
    workers: int = 1,
    n_trees: int | None = None,
    max_depth: int | None = None,
    min_leaf: int | None = None,
) -> SpeciesModelBank:
    """One random forest per species.

    With explicit (n_trees, max_depth, min_leaf) the grid search is skipped;
    otherwise each species runs the cross-validated search on ``grid``.
    """
    from .forest import fit_random_forest

    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, n_species = Y.shape
    fixed = n_trees is not None and max_depth is not None and min_leaf is not None

    def fit_one(s: int) -> SpeciesModel:
        y = _presence_column(Y, s)
        presences = int(y.sum())
        if presences < MIN_PRESENCES_FIT:
            return SpeciesModel(s, "dropped", presences)
        species_seed = int(np.random.SeedSequence((seed, 17, s)).generate_state(1)[0])
        if fixed:
            forest = fit_random_forest(X, y, n_trees, max_depth, min_leaf, seed=species_seed)
        else:
            forest = fit_forest(X, y, grid=grid, cv_folds=cv_folds, seed=species_seed).model
        return SpeciesModel(s, "forest", presences, forest=forest)

    models = _map_species(fit_one, n_species, workers)
    return SpeciesModelBank(models, n_species, meta={"kind": "forest"})


def _map_species(fit_one, n_species: int, workers: int) -> list:
    if workers <= 1:
        return [fit_one(s) for s in range(n_species)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fit_one, range(n_species)))


def sub_split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Random (train, validation) row split; validation gets ~fraction rows."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 31))))
    perm = rng.permutation(n)
    n_val = max(1, int(round(fraction * n)))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def filter_species_models(
    bank: SpeciesModelBank,
    X_subval: np.ndarray,
    truth_sets: list[frozenset[int]],
    s_max: int | None = None,
) -> SpeciesModelBank:
    """Keep the species prefix that maximizes sub-validation micro F1.

    Each species gets a standalone sub-validation F1 (its own probability
    thresholded at 0.5 against its own presence column). Species are ranked
    by descending F1 (ties toward the lower index); for each prefix length
    the micro F1 of the expected-size assemblage is recomputed with only
    those species predictable, and the best prefix (smallest on ties) sets
    the kept flags.
    """
    probs = bank.predict_probs(X_subval)
    present = np.zeros_like(probs, dtype=bool)
    for i, truth in enumerate(truth_sets):
        for s in truth:
            present[i, s] = True
    predicted = probs >= 0.5
    tp = (predicted & present).sum(axis=0).astype(float)
    fp = (predicted & ~present).sum(axis=0).astype(float)
    fn = (~predicted & present).sum(axis=0).astype(float)
    denom = tp + (fp + fn) / 2.0
    f1 = np.divide(tp, denom, out=np.zeros(bank.n_species), where=denom > 0)

    fitted = sorted(
        (m.species for m in bank.models if m.kind != "dropped"),
        key=lambda s: (-f1[s], s),
    )
    for m in bank.models:
        m.sub_val_f1 = float(f1[m.species]) if m.kind != "dropped" else None

    best_m, best_score = 0, -1.0
    mask = np.zeros(bank.n_species, dtype=bool)
    for m_count in range(1, len(fitted) + 1):
        mask[fitted[m_count - 1]] = True
        masked_rule = AssemblageRule(kind="top_s_expected", s_max=s_max, kept=mask)
        score = _micro_f1_sets(
            truth_sets, [assemble(probs[i], masked_rule) for i in range(len(X_subval))]
        )
        if score > best_score + 1e-15:
            best_score, best_m = score, m_count
    kept = set(fitted[:best_m])
    for m in bank.models:
        m.kept = m.species in kept
    bank.kept_count = best_m
    bank.meta["filter_subval_micro_f1"] = best_score
    return bank


def _micro_f1_sets(truth_sets, pred_sets) -> float:
    total = 0.0
    for y, yhat in zip(truth_sets, pred_sets):
        tp = len(y & yhat)
        denom = tp + (len(yhat) - tp + len(y) - tp) / 2.0
        total += tp / denom if denom > 0 else 0.0
    return total / len(truth_sets)
