import numpy as np
import pytest

from sdmbench.core import Location, PASurvey, PORecord, PredictionSet


def make_survey(sid, x, y, species, stratum=None):
    return PASurvey(sid, Location(float(x), float(y)), frozenset(species), stratum)


def make_record(rid, x, y, species):
    return PORecord(rid, Location(float(x), float(y)), species)


def make_pred(sid, species):
    return PredictionSet(sid, frozenset(species))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def random_instance(rng, n_surveys, n_species, allow_empty_pred=True):
    """Random truth surveys plus random predictions over the same ids."""
    truth, preds = [], []
    for i in range(n_surveys):
        size = int(rng.integers(1, max(2, n_species // 2 + 1)))
        present = rng.choice(n_species, size=size, replace=False)
        truth.append(make_survey(f"s{i}", rng.random() * 100, rng.random() * 100, map(int, present)))
        pred_size = int(rng.integers(0 if allow_empty_pred else 1, n_species + 1))
        chosen = rng.choice(n_species, size=pred_size, replace=False)
        preds.append(make_pred(f"s{i}", map(int, chosen)))
    return truth, preds
