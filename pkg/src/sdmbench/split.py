"""Spatial block hold-out: partition surveys on a square grid so train and
test never share a block.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ConfigError, DataError, LONLAT, Location, PASurvey

TRAIN = "train"
TEST = "test"

# 50 km expressed in degrees, the default block width for geographic data
DEFAULT_LONLAT_BLOCK_DEG = 0.45


@dataclass
class SplitAssignment:
    block_size: float
    origin: tuple[float, float]
    assignment: dict[tuple[int, int], str]
    survey_split: dict[str, str]

    def side_of(self, survey_id: str) -> str:
        return self.survey_split[survey_id]

    def surveys_on(self, surveys: list[PASurvey], side: str) -> list[PASurvey]:
        return [s for s in surveys if self.survey_split[s.survey_id] == side]

    @property
    def test_fraction(self) -> float:
        n = len(self.survey_split)
        return sum(1 for v in self.survey_split.values() if v == TEST) / n if n else 0.0


def block_id(loc: Location, block_size: float, origin: tuple[float, float]) -> tuple[int, int]:
    """Grid cell of a point: floor((x - x0)/size), floor((y - y0)/size)."""
    if block_size <= 0:
        raise ConfigError("block_size must be > 0")
    i = int(np.floor((loc.x - origin[0]) / block_size))
    j = int(np.floor((loc.y - origin[1]) / block_size))
    return i, j


def default_block_size(crs: str) -> float:
    return DEFAULT_LONLAT_BLOCK_DEG if crs == LONLAT else 50.0


def spatial_block_split(
    surveys: list[PASurvey],
    block_size: float,
    test_fraction: float,
    seed: int,
    origin: tuple[float, float] | None = None,
) -> SplitAssignment:
    """Assign whole blocks to the test side until the survey-weighted test
    fraction first reaches the target; remaining blocks are train.

    Blocks are visited in a seed-shuffled order that does not depend on the
    survey input order. The achieved fraction lands in
    [target, target + heaviest block weight].
    """
    if not surveys:
        raise DataError("no surveys to split")
    if not (0.0 < test_fraction <= 1.0):
        raise ConfigError("test_fraction must be in (0, 1]")
    if origin is None:
        origin = (min(s.location.x for s in surveys), min(s.location.y for s in surveys))

    blocks: dict[tuple[int, int], list[str]] = {}
    for s in surveys:
        blocks.setdefault(block_id(s.location, block_size, origin), []).append(s.survey_id)
    if len(blocks) < 2:
        raise DataError("cannot split: all surveys fall in one block")

    block_ids = sorted(blocks)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    order = rng.permutation(len(block_ids))

    n_total = len(surveys)
    assignment: dict[tuple[int, int], str] = {b: TRAIN for b in block_ids}
    n_test = 0
    for pos in order:
        if n_test >= test_fraction * n_total:
            break
        b = block_ids[pos]
        assignment[b] = TEST
        n_test += len(blocks[b])
    if all(side == TEST for side in assignment.values()):
        raise DataError("empty train")

    survey_split = {}
    for b, sids in blocks.items():
        for sid in sids:
            survey_split[sid] = assignment[b]
    return SplitAssignment(block_size, origin, assignment, survey_split)


def save_split_csv(path: str | Path, split: SplitAssignment, surveys: list[PASurvey]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["surveyId", "side", "blockI", "blockJ"])
        for s in surveys:
            i, j = block_id(s.location, split.block_size, split.origin)
            writer.writerow([s.survey_id, split.survey_split[s.survey_id], i, j])


def load_split_csv(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"split file not found: {path}")
    sides = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "surveyId" not in reader.fieldnames or "side" not in reader.fieldnames:
            raise DataError(f"split {path}: expected surveyId,side columns")
        for row in reader:
            if row["side"] not in (TRAIN, TEST):
                raise DataError(f"split {path}: bad side {row['side']!r}")
            sides[row["surveyId"]] = row["side"]
    return sides
