"""Assemblage: turning per-species probabilities into discrete species sets,
plus the constant-set calibration and probability-vector ensembling.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ConfigError, DataError, PASurvey, PredictionSet, SpeciesIndex

TOP_S_EXPECTED = "top_s_expected"
FIXED_THRESHOLD = "fixed_threshold"
FIXED_K = "fixed_k"


@dataclass
class AssemblageRule:
    """How a probability vector becomes a species set.

    kind:
      - top_s_expected: keep the S most probable species, S = the rounded
        (half away from zero) sum of probabilities over kept species;
      - fixed_threshold: keep species with p >= tau;
      - fixed_k: keep the K most probable species.
    ``kept`` masks species that are always predicted absent (probability 0).
    Probability ties break toward the lower species index.
    """

    kind: str = TOP_S_EXPECTED
    tau: float = 0.5
    k: int = 0
    s_max: int | None = None
    kept: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (TOP_S_EXPECTED, FIXED_THRESHOLD, FIXED_K):
            raise ConfigError(f"unknown assemblage kind {self.kind!r}")
        if self.kind == FIXED_THRESHOLD and not (0.0 < self.tau < 1.0):
            raise ConfigError("tau must be in (0, 1)")
        if self.kind == FIXED_K and self.k < 0:
            raise ConfigError("k must be >= 0")

    @classmethod
    def from_config(cls, cfg: dict | None) -> "AssemblageRule":
        cfg = dict(cfg or {})
        return cls(
            kind=cfg.get("kind", TOP_S_EXPECTED),
            tau=float(cfg.get("tau", 0.5)),
            k=int(cfg.get("k", 0)),
            s_max=cfg.get("s_max"),
        )


def round_half_away(x: float) -> int:
    """Round to nearest with halves away from zero (0.5 -> 1, not 0)."""
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def _top_by_probability(p: np.ndarray, candidates: np.ndarray, count: int) -> frozenset[int]:
    if count <= 0:
        return frozenset()
    count = min(count, len(candidates))
    # sort by descending probability, ascending index among ties
    order = np.lexsort((candidates, -p[candidates]))
    return frozenset(int(i) for i in candidates[order[:count]])


def assemble(p: np.ndarray, rule: AssemblageRule) -> frozenset[int]:
    """Apply one assemblage rule to one probability vector. Species outside
    the ``kept`` mask are always predicted absent."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ConfigError("probability vector must be 1-D")
    if np.any((p < 0) | (p > 1)):
        raise DataError("probabilities outside [0, 1]")
    if rule.kept is not None:
        if len(rule.kept) != len(p):
            raise ConfigError("kept mask length mismatch")
        candidates = np.flatnonzero(rule.kept)
    else:
        candidates = np.arange(len(p))
    if rule.kind == FIXED_THRESHOLD:
        return frozenset(int(i) for i in candidates[p[candidates] >= rule.tau])
    if rule.kind == FIXED_K:
        return _top_by_probability(p, candidates, rule.k)
    size = round_half_away(float(p[candidates].sum()))
    if rule.s_max is not None:
        size = min(size, rule.s_max)
    return _top_by_probability(p, candidates, size)


def assemble_all(
    probs: np.ndarray, survey_ids: list[str], rule: AssemblageRule
) -> list[PredictionSet]:
    """Assemble a (N, S) probability matrix into one set per survey."""
    if probs.shape[0] != len(survey_ids):
        raise ConfigError("row count does not match survey ids")
    return [PredictionSet(sid, assemble(probs[i], rule)) for i, sid in enumerate(survey_ids)]


def species_frequency_ranking(validation: list[PASurvey], n_species: int) -> np.ndarray:
    """Species indices sorted by descending validation presence count,
    ascending index among ties."""
    counts = np.zeros(n_species, dtype=np.int64)
    for s in validation:
        for sp in s.present:
            counts[sp] += 1
    return np.lexsort((np.arange(n_species), -counts))


def calibrate_constant_k(
    validation: list[PASurvey],
    counts: np.ndarray | None = None,
    n_species: int | None = None,
    k_max: int = 100,
) -> int:
    """Best K for the constant predictor.

    Ranks species by validation frequency (or by ``counts`` when supplied)
    and returns the K in [1, k_max] whose constant top-K set maximizes the
    validation micro F1; ties go to the smallest K.
    """
    if not validation:
        raise DataError("empty validation set")
    if n_species is None:
        n_species = 1 + max(max(s.present) for s in validation)
    if counts is None:
        counts = np.zeros(n_species, dtype=np.int64)
        for s in validation:
            for sp in s.present:
                counts[sp] += 1
    ranking = np.lexsort((np.arange(n_species), -np.asarray(counts, dtype=float)))
    k_max = min(k_max, n_species)

    # For a constant set, each survey's F1 depends only on how many of the
    # top-K species it contains; sweep K updating per-survey intersections.
    surveys_with: dict[int, list[int]] = {}
    for i, s in enumerate(validation):
        for sp in s.present:
            surveys_with.setdefault(sp, []).append(i)
    sizes = np.array([len(s.present) for s in validation], dtype=float)
    tp = np.zeros(len(validation), dtype=float)
    best_k, best_score = 1, -1.0
    for k in range(1, k_max + 1):
        added = int(ranking[k - 1])
        for i in surveys_with.get(added, ()):
            tp[i] += 1.0
        f1 = float((tp / (tp + ((k - tp) + (sizes - tp)) / 2.0)).mean())
        if f1 > best_score + 1e-15:
            best_score, best_k = f1, k
    return best_k


def ensemble_average(
    ps: list[np.ndarray], weights: list[float] | None = None
) -> np.ndarray:
    """Weighted mean of probability vectors (uniform by default)."""
    if not ps:
        raise ConfigError("empty ensemble")
    arrs = [np.asarray(p, dtype=float) for p in ps]
    length = arrs[0].shape
    if any(a.shape != length for a in arrs):
        raise DataError("probability vector length mismatch")
    if weights is None:
        w = np.ones(len(arrs))
    else:
        w = np.asarray(weights, dtype=float)
        if len(w) != len(arrs):
            raise ConfigError("one weight per member required")
        if np.any(w < 0) or w.sum() <= 0:
            raise ConfigError("weights must be >= 0 and not all zero")
    w = w / w.sum()
    return np.tensordot(w, np.stack(arrs), axes=1)


def write_submission(
    path: str | Path, preds: list[PredictionSet], index: SpeciesIndex
) -> None:
    """Export predicted sets as ``surveyId,speciesIds`` with the species ids
    space-separated in ascending dense-index order."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["surveyId", "speciesIds"])
        for p in preds:
            writer.writerow([p.survey_id, " ".join(index.id_of(s) for s in sorted(p.species))])


def read_submission(path: str | Path, index: SpeciesIndex) -> list[PredictionSet]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"submission not found: {path}")
    preds = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "surveyId" not in reader.fieldnames or "speciesIds" not in reader.fieldnames:
            raise DataError(f"submission {path}: expected header surveyId,speciesIds")
        for row in reader:
            ids = row["speciesIds"].split() if row["speciesIds"] else []
            unknown = [sid for sid in ids if sid not in index]
            if unknown:
                raise DataError(f"submission {path}: unknown species {unknown[:3]}")
            preds.append(
                PredictionSet(row["surveyId"], frozenset(index.lookup(sid) for sid in ids))
            )
    return preds
