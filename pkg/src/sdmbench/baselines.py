"""Nonparametric baselines: the constant set, spatial nearest neighbors on
either data type, and the co-occurrence assemblage seeded by nearby
occurrence records.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assemblage import species_frequency_ranking
from .core import ConfigError, DataError, Location, PASurvey, PORecord
from .spatial import SpatialIndex


def constant_predictor(validation: list[PASurvey], k: int, n_species: int) -> frozenset[int]:
    """The same top-K-frequent species set for every survey."""
    if k < 0:
        raise ConfigError("k must be >= 0")
    ranking = species_frequency_ranking(validation, n_species)
    return frozenset(int(s) for s in ranking[:k])


class KnnPoPredictor:
    """Union of the species labels of the k nearest occurrence records."""

    def __init__(self, po_records: list[PORecord], k: int = 100):
        if not po_records:
            raise DataError("no occurrence records")
        if k < 1 or k > len(po_records):
            raise ConfigError(f"k must be in [1, {len(po_records)}]")
        self.k = k
        self.species = np.array([r.species for r in po_records])
        self.index = SpatialIndex(
            np.array([r.location.x for r in po_records]),
            np.array([r.location.y for r in po_records]),
            crs=po_records[0].location.crs,
        )

    def predict(self, loc: Location) -> frozenset[int]:
        return self.predict_many([loc])[0]

    def predict_many(self, locs: list[Location]) -> list[frozenset[int]]:
        xs = np.array([p.x for p in locs])
        ys = np.array([p.y for p in locs])
        neighbor_lists = self.index.knn(xs, ys, self.k)
        return [
            frozenset(int(s) for s in np.unique(self.species[nbrs]))
            for nbrs in neighbor_lists
        ]


class KnnPaPredictor:
    """Per-species probability = fraction of the k nearest surveys that
    contain the species (ties at the k-th distance all count)."""

    def __init__(self, pa_train: list[PASurvey], n_species: int, k: int = 25):
        if not pa_train:
            raise DataError("no training surveys")
        if k < 1 or k > len(pa_train):
            raise ConfigError(f"k must be in [1, {len(pa_train)}]")
        self.k = k
        self.n_species = n_species
        self.present = [np.fromiter(s.present, dtype=int) for s in pa_train]
        self.index = SpatialIndex(
            np.array([s.location.x for s in pa_train]),
            np.array([s.location.y for s in pa_train]),
            crs=pa_train[0].location.crs,
        )

    def predict_probs(self, locs: list[Location]) -> np.ndarray:
        xs = np.array([p.x for p in locs])
        ys = np.array([p.y for p in locs])
        out = np.zeros((len(locs), self.n_species))
        for i, nbrs in enumerate(self.index.knn(xs, ys, self.k)):
            for j in nbrs:
                out[i, self.present[j]] += 1.0
            out[i] /= len(nbrs)
        return out


@dataclass
class CooccurrenceTable:
    """cond[s, c]: fraction of surveys containing s among those containing c;
    marginal[c]: fraction of surveys containing c."""

    cond: np.ndarray
    marginal: np.ndarray


def build_cooccurrence(pa_validation: list[PASurvey], n_species: int) -> CooccurrenceTable:
    if not pa_validation:
        raise DataError("no validation surveys")
    counts = np.zeros(n_species)
    joint = np.zeros((n_species, n_species))
    for s in pa_validation:
        members = np.fromiter(s.present, dtype=int)
        counts[members] += 1.0
        joint[np.ix_(members, members)] += 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(counts[None, :] > 0, joint / counts[None, :], 0.0)
    return CooccurrenceTable(cond=cond, marginal=counts / len(pa_validation))


class CooccurrencePredictor:
    """Weighted average of per-conditioner presence profiles, conditioning on
    the occurrence species observed within a radius; the weight of each
    conditioning species is its marginal survey prevalence. With no nearby
    records (or all-zero weights) the marginal prevalence vector is used.
    """

    def __init__(
        self,
        table: CooccurrenceTable,
        po_records: list[PORecord],
        radius: float,
    ):
        if radius <= 0:
            raise ConfigError("radius must be > 0")
        self.table = table
        self.radius = radius
        self.species = np.array([r.species for r in po_records]) if po_records else np.empty(0, dtype=int)
        self.index = (
            SpatialIndex(
                np.array([r.location.x for r in po_records]),
                np.array([r.location.y for r in po_records]),
                crs=po_records[0].location.crs,
            )
            if po_records
            else None
        )

    def predict_probs(self, locs: list[Location]) -> np.ndarray:
        out = np.zeros((len(locs), len(self.table.marginal)))
        hits = (
            self.index.radius(
                np.array([p.x for p in locs]), np.array([p.y for p in locs]), self.radius
            )
            if self.index is not None
            else [np.empty(0, dtype=int)] * len(locs)
        )
        for i, nbrs in enumerate(hits):
            conditioners = np.unique(self.species[nbrs]) if len(nbrs) else np.empty(0, dtype=int)
            weights = self.table.marginal[conditioners] if len(conditioners) else np.empty(0)
            if weights.sum() <= 0:
                out[i] = self.table.marginal
            else:
                out[i] = (self.table.cond[:, conditioners] @ weights) / weights.sum()
        return out
