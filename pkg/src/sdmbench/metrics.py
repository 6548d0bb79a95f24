"""Evaluation metrics: per-survey micro F1, per-species macro F1, set-size
error diagnostics, per-stratum scores, species accumulation curves, and the
occurrence-count comparison between the two observation data types.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .core import DataError, PASurvey, PORecord, PredictionSet
from .spatial import SpatialIndex

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SurveyConfusion:
    tp: int
    fp: int
    fn: int

    @property
    def f1(self) -> float:
        denom = self.tp + (self.fp + self.fn) / 2.0
        return self.tp / denom if denom > 0 else 0.0


@dataclass
class SetSizeReport:
    abs_error: float
    bias: float


@dataclass
class MetricsReport:
    micro_f1: float
    macro_species_f1: float
    n_surveys: int
    per_stratum: dict[str, float]
    set_size: SetSizeReport
    n_missing_predictions: int = 0
    n_extra_predictions: int = 0

    def to_dict(self) -> dict:
        return {
            "micro_f1": self.micro_f1,
            "macro_species_f1": self.macro_species_f1,
            "n_surveys": self.n_surveys,
            "per_stratum": dict(sorted(self.per_stratum.items())),
            "set_size": {"abs_error": self.set_size.abs_error, "bias": self.set_size.bias},
            "n_missing_predictions": self.n_missing_predictions,
            "n_extra_predictions": self.n_extra_predictions,
        }


def align_predictions(
    truth: list[PASurvey], preds: list[PredictionSet]
) -> tuple[list[frozenset[int]], int, int]:
    """Pair predictions with truth surveys by id.

    Missing survey ids count as empty predictions (reported, not an error);
    predictions for unknown survey ids are ignored and counted.
    """
    if not truth:
        raise DataError("zero surveys")
    by_id: dict[str, frozenset[int]] = {}
    for p in preds:
        if p.survey_id in by_id:
            raise DataError(f"duplicate prediction for survey {p.survey_id}")
        by_id[p.survey_id] = p.species
    truth_ids = {t.survey_id for t in truth}
    aligned = [by_id.get(t.survey_id, frozenset()) for t in truth]
    missing = sum(1 for t in truth if t.survey_id not in by_id)
    extra = sum(1 for sid in by_id if sid not in truth_ids)
    if missing:
        log.warning("%d surveys had no prediction; treated as empty sets", missing)
    if extra:
        log.warning("%d predictions had no matching truth survey; ignored", extra)
    return aligned, missing, extra


def survey_confusion(truth_set: frozenset[int], pred_set: frozenset[int]) -> SurveyConfusion:
    tp = len(pred_set & truth_set)
    return SurveyConfusion(tp=tp, fp=len(pred_set) - tp, fn=len(truth_set) - tp)


def micro_f1(truth: list[PASurvey], preds: list[PredictionSet]) -> float:
    """Mean over surveys of TP / (TP + (FP + FN)/2)."""
    aligned, _, _ = align_predictions(truth, preds)
    return _micro_f1_aligned([t.present for t in truth], aligned)


def _micro_f1_aligned(truth_sets: list[frozenset[int]], pred_sets: list[frozenset[int]]) -> float:
    total = 0.0
    for y, yhat in zip(truth_sets, pred_sets):
        total += survey_confusion(y, yhat).f1
    return total / len(truth_sets)


def macro_species_f1(truth: list[PASurvey], preds: list[PredictionSet]) -> float:
    """Species-averaged F1.

    Counts TP/FP/FN per species over all surveys. The averaging universe is
    every species appearing in the truth or in any prediction; a species
    with no truth presences and no predictions would be 0/0 and is excluded.
    """
    aligned, _, _ = align_predictions(truth, preds)
    tp: Counter = Counter()
    fp: Counter = Counter()
    fn: Counter = Counter()
    universe: set[int] = set()
    for t, yhat in zip(truth, aligned):
        y = t.present
        universe |= y | yhat
        for s in y & yhat:
            tp[s] += 1
        for s in yhat - y:
            fp[s] += 1
        for s in y - yhat:
            fn[s] += 1
    if not universe:
        return 0.0
    total = 0.0
    for s in universe:
        denom = tp[s] + (fp[s] + fn[s]) / 2.0
        total += tp[s] / denom if denom > 0 else 0.0
    return total / len(universe)


def set_size_errors(truth: list[PASurvey], preds: list[PredictionSet]) -> SetSizeReport:
    """Mean absolute and mean signed difference of predicted vs true set size."""
    aligned, _, _ = align_predictions(truth, preds)
    errors = np.array([len(yhat) - len(t.present) for t, yhat in zip(truth, aligned)], dtype=float)
    return SetSizeReport(abs_error=float(np.abs(errors).mean()), bias=float(errors.mean()))


def per_stratum_micro_f1(truth: list[PASurvey], preds: list[PredictionSet]) -> dict[str, float]:
    """micro F1 restricted to each stratum tag (missing tags pool as 'all')."""
    aligned, _, _ = align_predictions(truth, preds)
    groups: dict[str, list[tuple[frozenset[int], frozenset[int]]]] = {}
    for t, yhat in zip(truth, aligned):
        groups.setdefault(t.stratum or "all", []).append((t.present, yhat))
    return {
        stratum: _micro_f1_aligned([y for y, _ in pairs], [p for _, p in pairs])
        for stratum, pairs in sorted(groups.items())
    }


def evaluate_predictions(truth: list[PASurvey], preds: list[PredictionSet]) -> MetricsReport:
    """All headline metrics in one report."""
    aligned, missing, extra = align_predictions(truth, preds)
    errors = np.array([len(yhat) - len(t.present) for t, yhat in zip(truth, aligned)], dtype=float)
    return MetricsReport(
        micro_f1=_micro_f1_aligned([t.present for t in truth], aligned),
        macro_species_f1=macro_species_f1(truth, preds),
        n_surveys=len(truth),
        per_stratum=per_stratum_micro_f1(truth, preds),
        set_size=SetSizeReport(float(np.abs(errors).mean()), float(errors.mean())),
        n_missing_predictions=missing,
        n_extra_predictions=extra,
    )


def species_accumulation(
    surveys: list[PASurvey], n_repeats: int, seed: int
) -> list[tuple[int, float]]:
    """Expected count of distinct species as surveys accumulate.

    Each repeat draws one random ordering of the surveys and records the
    running distinct-species count, so position n is a uniform random
    n-subset. Returns [(n, mean distinct count)] for n = 1..len(surveys).
    """
    if n_repeats < 1:
        raise DataError("n_repeats must be >= 1")
    if not surveys:
        return []
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    n = len(surveys)
    totals = np.zeros(n)
    for _ in range(n_repeats):
        seen: set[int] = set()
        for pos, idx in enumerate(rng.permutation(n)):
            seen |= surveys[idx].present
            totals[pos] += len(seen)
    return [(i + 1, float(totals[i] / n_repeats)) for i in range(n)]


def rankdata_average(values: np.ndarray) -> np.ndarray:
    """Ranks starting at 1, ties receiving the average rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rank correlation with average ranks for ties.

    Returns nan when either input is constant (correlation undefined).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DataError("inputs must be equal-length 1-D arrays")
    ra, rb = rankdata_average(a), rankdata_average(b)
    sa, sb = ra.std(), rb.std()
    if sa == 0.0 or sb == 0.0:
        return float("nan")
    return float(((ra - ra.mean()) * (rb - rb.mean())).mean() / (sa * sb))


@dataclass
class PresenceComparison:
    """Per-species presence counts in surveys vs nearby occurrence records."""

    pa_counts: np.ndarray
    po_counts: np.ndarray
    spearman: float


def presence_count_comparison(
    pa: list[PASurvey], po: list[PORecord], radius: float, n_species: int | None = None
) -> PresenceComparison:
    """Count, per species, PA survey presences and PO records falling within
    ``radius`` of any PA survey; Spearman is over species with pa_count > 0.
    """
    if radius < 0:
        raise DataError("radius must be >= 0")
    if not pa:
        raise DataError("zero surveys")
    if n_species is None:
        n_species = 1 + max(
            max((max(s.present) for s in pa), default=-1),
            max((r.species for r in po), default=-1),
        )
    pa_counts = np.zeros(n_species, dtype=np.int64)
    for s in pa:
        for sp in s.present:
            pa_counts[sp] += 1
    po_counts = np.zeros(n_species, dtype=np.int64)
    if po:
        index = SpatialIndex(
            np.array([s.location.x for s in pa]),
            np.array([s.location.y for s in pa]),
            crs=pa[0].location.crs,
        )
        dmin = index.min_distance(
            np.array([r.location.x for r in po]), np.array([r.location.y for r in po])
        )
        for rec, d in zip(po, dmin):
            if d <= radius:
                po_counts[rec.species] += 1
    observed = pa_counts > 0
    rho = spearman_rho(pa_counts[observed], po_counts[observed]) if observed.sum() >= 2 else float("nan")
    return PresenceComparison(pa_counts, po_counts, rho)
