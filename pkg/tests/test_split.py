import numpy as np
import pytest

from sdmbench.core import ConfigError, DataError, Location
from sdmbench.split import (
    block_id,
    load_split_csv,
    save_split_csv,
    spatial_block_split,
)

from conftest import make_survey


def test_block_id_basics():
    assert block_id(Location(0.0, 0.0), 50.0, (0.0, 0.0)) == (0, 0)
    assert block_id(Location(50.0, 0.0), 50.0, (0.0, 0.0)) == (1, 0)  # boundary
    assert block_id(Location(-0.1, 0.0), 50.0, (0.0, 0.0)) == (-1, 0)


def test_block_id_matches_floor_arithmetic(rng):
    origin = (-7.0, 13.0)
    size = 3.25
    for _ in range(1000):
        x = float(rng.uniform(-100, 100))
        y = float(rng.uniform(-100, 100))
        i, j = block_id(Location(x, y), size, origin)
        assert i == int(np.floor((x - origin[0]) / size))
        assert j == int(np.floor((y - origin[1]) / size))


def grid_world_surveys(rng, blocks=20, per_block=10, size=10.0):
    """Surveys spread over `blocks` spatial blocks of width `size`."""
    surveys = []
    cols = 5
    for b in range(blocks):
        bi, bj = b % cols, b // cols
        for k in range(per_block):
            x = bi * size + float(rng.uniform(0.01, size - 0.01))
            y = bj * size + float(rng.uniform(0.01, size - 0.01))
            surveys.append(make_survey(f"b{b}k{k}", x, y, {int(rng.integers(5))}))
    return surveys


def test_split_no_block_straddles_sides(rng):
    surveys = grid_world_surveys(rng)
    split = spatial_block_split(surveys, block_size=10.0, test_fraction=0.8, seed=3, origin=(0.0, 0.0))
    sides_per_block = {}
    for s in surveys:
        b = block_id(s.location, 10.0, (0.0, 0.0))
        sides_per_block.setdefault(b, set()).add(split.survey_split[s.survey_id])
    assert all(len(v) == 1 for v in sides_per_block.values())


def test_split_fraction_within_one_block(rng):
    surveys = grid_world_surveys(rng)
    split = spatial_block_split(surveys, block_size=10.0, test_fraction=0.8, seed=3, origin=(0.0, 0.0))
    max_block_weight = 10 / len(surveys)
    assert 0.8 <= split.test_fraction <= 0.8 + max_block_weight + 1e-12


def test_split_deterministic_and_order_invariant(rng):
    surveys = grid_world_surveys(rng)
    a = spatial_block_split(surveys, 10.0, 0.8, seed=5)
    shuffled = [surveys[i] for i in rng.permutation(len(surveys))]
    b = spatial_block_split(shuffled, 10.0, 0.8, seed=5)
    assert a.survey_split == b.survey_split
    c = spatial_block_split(surveys, 10.0, 0.8, seed=6)
    assert a.survey_split != c.survey_split  # different seed shuffles blocks


def test_split_single_block_errors():
    surveys = [make_survey(f"s{i}", 1.0 + i * 0.01, 1.0, {0}) for i in range(5)]
    with pytest.raises(DataError, match="one block"):
        spatial_block_split(surveys, block_size=100.0, test_fraction=0.5, seed=0)


def test_split_fraction_one_empties_train(rng):
    surveys = grid_world_surveys(rng, blocks=4)
    with pytest.raises(DataError, match="empty train"):
        spatial_block_split(surveys, 10.0, 1.0, seed=0)
    with pytest.raises(ConfigError):
        spatial_block_split(surveys, 10.0, 0.0, seed=0)
    with pytest.raises(ConfigError):
        spatial_block_split(surveys, -1.0, 0.5, seed=0)


def test_split_csv_roundtrip(tmp_path, rng):
    surveys = grid_world_surveys(rng, blocks=6)
    split = spatial_block_split(surveys, 10.0, 0.5, seed=1)
    path = tmp_path / "split.csv"
    save_split_csv(path, split, surveys)
    sides = load_split_csv(path)
    assert sides == split.survey_split
    header = path.read_text().splitlines()[0]
    assert header == "surveyId,side,blockI,blockJ"
