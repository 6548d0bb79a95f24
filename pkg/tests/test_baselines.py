import numpy as np
import pytest

from sdmbench.baselines import (
    CooccurrencePredictor,
    KnnPaPredictor,
    KnnPoPredictor,
    build_cooccurrence,
    constant_predictor,
)
from sdmbench.core import ConfigError, DataError, Location

from conftest import make_record, make_survey


def test_constant_predictor_top_k():
    surveys = [
        make_survey("a", 0, 0, {0, 1}),
        make_survey("b", 1, 0, {0, 2}),
        make_survey("c", 2, 0, {0}),
    ]
    assert constant_predictor(surveys, 0, 4) == frozenset()
    assert constant_predictor(surveys, 1, 4) == {0}
    assert constant_predictor(surveys, 2, 4) == {0, 1}  # tie 1 vs 2 -> lower index


def test_knn_po_k1_and_k_all(rng):
    records = [make_record(f"r{i}", i * 1.0, 0.0, i % 3) for i in range(9)]
    predictor = KnnPoPredictor(records, k=1)
    assert predictor.predict(Location(0.1, 0.0)) == {0}
    full = KnnPoPredictor(records, k=9)
    assert full.predict(Location(0.0, 0.0)) == {0, 1, 2}


def test_knn_po_set_size_non_decreasing_in_k(rng):
    records = [
        make_record(f"r{i}", float(rng.random() * 10), float(rng.random() * 10), int(rng.integers(6)))
        for i in range(60)
    ]
    loc = Location(5.0, 5.0)
    sizes = [len(KnnPoPredictor(records, k=k).predict(loc)) for k in (1, 5, 15, 40, 60)]
    assert all(a <= b for a, b in zip(sizes, sizes[1:]))


def test_knn_po_validation():
    records = [make_record("r", 0, 0, 0)]
    with pytest.raises(DataError):
        KnnPoPredictor([], k=1)
    with pytest.raises(ConfigError):
        KnnPoPredictor(records, k=2)


def test_knn_pa_probabilities_match_brute_force(rng):
    surveys = [
        make_survey(
            f"s{i}",
            float(rng.random() * 10),
            float(rng.random() * 10),
            map(int, rng.choice(5, size=rng.integers(1, 4), replace=False)),
        )
        for i in range(20)
    ]
    k = 7
    predictor = KnnPaPredictor(surveys, n_species=5, k=k)
    for _ in range(10):
        loc = Location(float(rng.random() * 10), float(rng.random() * 10))
        probs = predictor.predict_probs([loc])[0]
        d = np.array(
            [np.hypot(s.location.x - loc.x, s.location.y - loc.y) for s in surveys]
        )
        order = np.argsort(d, kind="stable")[:k]
        want = np.zeros(5)
        for i in order:
            for sp in surveys[i].present:
                want[sp] += 1
        assert np.allclose(probs, want / k)


def test_knn_pa_k1_yields_indicator():
    surveys = [make_survey("a", 0, 0, {0, 2}), make_survey("b", 10, 0, {1})]
    predictor = KnnPaPredictor(surveys, n_species=3, k=1)
    probs = predictor.predict_probs([Location(0.1, 0.0)])[0]
    assert probs.tolist() == [1.0, 0.0, 1.0]


def test_knn_pa_identical_sets_give_binary_probs(rng):
    surveys = [make_survey(f"s{i}", i * 1.0, 0.0, {1, 3}) for i in range(10)]
    predictor = KnnPaPredictor(surveys, n_species=5, k=4)
    probs = predictor.predict_probs([Location(3.0, 1.0)])[0]
    assert set(probs.tolist()) <= {0.0, 1.0}


def test_knn_pa_mass_identity(rng):
    surveys = [
        make_survey(
            f"s{i}",
            float(rng.random() * 10),
            float(rng.random() * 10),
            map(int, rng.choice(8, size=rng.integers(1, 5), replace=False)),
        )
        for i in range(30)
    ]
    predictor = KnnPaPredictor(surveys, n_species=8, k=5)
    loc = Location(4.0, 4.0)
    probs = predictor.predict_probs([loc])[0]
    d = np.array([np.hypot(s.location.x - loc.x, s.location.y - loc.y) for s in surveys])
    nearest = np.argsort(d, kind="stable")[:5]
    mean_size = np.mean([len(surveys[i].present) for i in nearest])
    assert probs.sum() == pytest.approx(mean_size)


def test_cooccurrence_hand_counts():
    surveys = [make_survey("p1", 0, 0, {0, 1}), make_survey("p2", 1, 0, {0})]
    table = build_cooccurrence(surveys, n_species=3)
    assert table.cond[1, 0] == pytest.approx(0.5)  # b given a
    assert table.cond[0, 1] == pytest.approx(1.0)  # a given b
    assert table.marginal.tolist() == [1.0, 0.5, 0.0]
    assert table.cond[0, 0] == 1.0 and table.cond[1, 1] == 1.0
    assert np.all(table.cond[:, 2] == 0.0)  # never-present conditioner column


def test_cooccurrence_random_matches_brute_force(rng):
    surveys = [
        make_survey(
            f"s{i}", i, 0, map(int, rng.choice(6, size=rng.integers(1, 4), replace=False))
        )
        for i in range(10)
    ]
    table = build_cooccurrence(surveys, n_species=6)
    for c in range(6):
        with_c = [s for s in surveys if c in s.present]
        for s in range(6):
            if with_c:
                want = sum(1 for t in with_c if s in t.present) / len(with_c)
            else:
                want = 0.0
            assert table.cond[s, c] == pytest.approx(want)


def test_cooccurrence_predict_singleton_and_fallback():
    surveys = [make_survey("p1", 0, 0, {0, 1}), make_survey("p2", 1, 0, {0})]
    table = build_cooccurrence(surveys, n_species=3)
    po = [make_record("r1", 5.0, 5.0, 0)]
    predictor = CooccurrencePredictor(table, po, radius=1.0)
    near = predictor.predict_probs([Location(5.2, 5.0)])[0]
    assert np.allclose(near, table.cond[:, 0])  # single conditioner -> its column
    far = predictor.predict_probs([Location(50.0, 50.0)])[0]
    assert np.allclose(far, table.marginal)  # fallback to marginals


def test_cooccurrence_predict_weighted_average_hand_case():
    surveys = [
        make_survey("p1", 0, 0, {0, 1}),
        make_survey("p2", 1, 0, {0}),
        make_survey("p3", 2, 0, {2}),
    ]
    table = build_cooccurrence(surveys, n_species=3)
    po = [make_record("r1", 5.0, 5.0, 0), make_record("r2", 5.1, 5.0, 2)]
    predictor = CooccurrencePredictor(table, po, radius=1.0)
    got = predictor.predict_probs([Location(5.0, 5.0)])[0]
    w = table.marginal[[0, 2]]
    want = (table.cond[:, 0] * w[0] + table.cond[:, 2] * w[1]) / w.sum()
    assert np.allclose(got, want)
    assert np.all((got >= 0.0) & (got <= 1.0))


def test_cooccurrence_outputs_probabilities(rng):
    surveys = [
        make_survey(
            f"s{i}", i, 0, map(int, rng.choice(6, size=rng.integers(1, 4), replace=False))
        )
        for i in range(15)
    ]
    table = build_cooccurrence(surveys, n_species=6)
    po = [
        make_record(f"r{i}", float(rng.random() * 15), 0.0, int(rng.integers(6)))
        for i in range(40)
    ]
    predictor = CooccurrencePredictor(table, po, radius=2.0)
    probs = predictor.predict_probs([Location(float(x), 0.0) for x in range(15)])
    assert np.all((probs >= 0.0) & (probs <= 1.0))
