import numpy as np
import pytest

from sdmbench.assemblage import (
    AssemblageRule,
    assemble,
    calibrate_constant_k,
    ensemble_average,
    read_submission,
    round_half_away,
    write_submission,
)
from sdmbench.core import ConfigError, DataError, PredictionSet, build_species_index
from sdmbench.metrics import micro_f1

from conftest import make_pred, make_survey


def test_round_half_away():
    assert round_half_away(3.4) == 3
    assert round_half_away(3.5) == 4
    assert round_half_away(0.5) == 1
    assert round_half_away(0.49999) == 0
    assert round_half_away(-0.5) == -1


def test_top_s_expected_basic():
    p = np.array([0.9, 0.9, 0.9, 0.7])
    assert assemble(p, AssemblageRule()) == {0, 1, 2}  # S = round(3.4) = 3


def test_top_s_expected_all_zero_empty():
    assert assemble(np.zeros(5), AssemblageRule()) == frozenset()


def test_top_s_ties_break_to_lower_index():
    p = np.array([0.5, 0.5, 0.5, 0.5])
    got = assemble(p, AssemblageRule())  # S = round(2.0) = 2
    assert got == {0, 1}


def test_s_max_cap():
    p = np.array([1.0, 1.0, 1.0, 1.0])
    assert len(assemble(p, AssemblageRule(s_max=2))) == 2


def test_fixed_threshold_inclusive():
    p = np.array([0.5, 0.49, 0.9])
    assert assemble(p, AssemblageRule(kind="fixed_threshold", tau=0.5)) == {0, 2}


def test_fixed_k():
    p = np.array([0.1, 0.8, 0.3])
    assert assemble(p, AssemblageRule(kind="fixed_k", k=2)) == {1, 2}
    assert assemble(p, AssemblageRule(kind="fixed_k", k=0)) == frozenset()


def test_kept_mask_forces_absence():
    p = np.array([0.99, 0.8, 0.7])
    kept = np.array([False, True, True])
    got = assemble(p, AssemblageRule(kept=kept))
    assert 0 not in got
    got_thr = assemble(p, AssemblageRule(kind="fixed_threshold", tau=0.5, kept=kept))
    assert 0 not in got_thr


def test_assemble_monotone_in_probability(rng):
    for _ in range(200):
        p = rng.random(8)
        for rule in (
            AssemblageRule(),
            AssemblageRule(kind="fixed_threshold", tau=0.4),
            AssemblageRule(kind="fixed_k", k=3),
        ):
            base = assemble(p, rule)
            s = int(rng.integers(8))
            boosted = p.copy()
            boosted[s] = min(1.0, p[s] + rng.random() * (1 - p[s]))
            if s in base:
                assert s in assemble(boosted, rule)


def test_fixed_k_invariant_to_monotone_transform(rng):
    for _ in range(100):
        p = rng.random(10)
        rule = AssemblageRule(kind="fixed_k", k=4)
        q = 1.0 / (1.0 + np.exp(-(3.0 * p - 1.0)))  # strictly increasing map
        assert assemble(p, rule) == assemble(q, rule)


def test_top_s_size_equals_rounded_mass(rng):
    for _ in range(100):
        p = rng.random(12)
        got = assemble(p, AssemblageRule())
        assert len(got) == round_half_away(float(p.sum()))


def test_assemble_rejects_bad_probabilities():
    with pytest.raises(DataError):
        assemble(np.array([0.5, 1.2]), AssemblageRule())
    with pytest.raises(ConfigError):
        AssemblageRule(kind="fixed_threshold", tau=1.5)
    with pytest.raises(ConfigError):
        AssemblageRule(kind="nope")


def test_calibrate_constant_k_identical_surveys():
    surveys = [make_survey(f"s{i}", i, 0, {0, 1, 2}) for i in range(10)]
    assert calibrate_constant_k(surveys, n_species=6, k_max=6) == 3


def test_calibrate_constant_k_matches_exhaustive(rng):
    for trial in range(20):
        n_species = int(rng.integers(5, 20))
        surveys = []
        weights = rng.random(n_species) ** 2
        weights /= weights.sum()
        for i in range(int(rng.integers(10, 40))):
            size = int(rng.integers(1, max(2, n_species // 2)))
            chosen = rng.choice(n_species, size=size, replace=False, p=None)
            surveys.append(make_survey(f"s{i}", i, 0, map(int, chosen)))
        k_max = min(40, n_species)
        got = calibrate_constant_k(surveys, n_species=n_species, k_max=k_max)

        # exhaustive brute-force sweep using the public metric
        counts = np.zeros(n_species)
        for s in surveys:
            for sp in s.present:
                counts[sp] += 1
        ranking = np.lexsort((np.arange(n_species), -counts))
        best_k, best_score = None, -1.0
        for k in range(1, k_max + 1):
            members = frozenset(int(x) for x in ranking[:k])
            preds = [make_pred(s.survey_id, members) for s in surveys]
            score = micro_f1(surveys, preds)
            if score > best_score + 1e-15:
                best_k, best_score = k, score
        assert got == best_k


def test_ensemble_average_identity_and_mean():
    a = np.array([0.0, 1.0])
    b = np.array([1.0, 0.0])
    assert np.array_equal(ensemble_average([a]), a)
    assert np.allclose(ensemble_average([a, b]), [0.5, 0.5])
    assert np.allclose(ensemble_average([a, b], weights=[3.0, 1.0]), [0.25, 0.75])
    with pytest.raises(DataError):
        ensemble_average([a, np.zeros(3)])
    with pytest.raises(ConfigError):
        ensemble_average([a, b], weights=[0.0, 0.0])


def test_submission_roundtrip(tmp_path, rng):
    index = build_species_index([f"sp{i:03d}" for i in range(20)])
    preds = []
    for i in range(30):
        size = int(rng.integers(0, 6))
        preds.append(
            PredictionSet(f"s{i}", frozenset(int(x) for x in rng.choice(20, size, replace=False)))
        )
    path = tmp_path / "submission.csv"
    write_submission(path, preds, index)
    assert path.read_text().splitlines()[0] == "surveyId,speciesIds"
    back = read_submission(path, index)
    assert back == preds


def test_submission_species_sorted_ascending(tmp_path):
    index = build_species_index(["a", "b", "c"])
    write_submission(tmp_path / "s.csv", [PredictionSet("x", frozenset({2, 0}))], index)
    row = (tmp_path / "s.csv").read_text().splitlines()[1]
    assert row == "x,a c"


def test_fixed_k_never_selects_masked_species():
    p = np.array([0.9, 0.8, 0.7, 0.6])
    kept = np.array([False, True, False, True])
    got = assemble(p, AssemblageRule(kind="fixed_k", k=4, kept=kept))
    assert got == {1, 3}  # masked species stay absent even when K exceeds kept
    got_s = assemble(np.array([1.0, 1.0, 1.0, 1.0]), AssemblageRule(kept=kept))
    assert got_s == {1, 3}
