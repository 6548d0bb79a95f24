"""Domain types shared by every other module.

Species are referenced everywhere by a dense integer index in ``[0, S)``;
the :class:`SpeciesIndex` keeps the bijection to the external (opaque)
species id strings so external ids survive round-trips.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


class ConfigError(ValueError):
    """Bad configuration or arguments (CLI exit code 2)."""


class DataError(ValueError):
    """Bad or inconsistent input data (CLI exit code 3)."""


class SchemaError(DataError):
    """A required column or field is missing from an input file."""


LONLAT = "lonlat"
PLANAR = "planar"


@dataclass(frozen=True)
class Location:
    """A point in either geographic (lon/lat degrees) or planar units."""

    x: float
    y: float
    crs: str = PLANAR

    def validate(self) -> None:
        if self.crs not in (LONLAT, PLANAR):
            raise ConfigError(f"unknown crs {self.crs!r}")
        if self.crs == LONLAT and not (-180.0 <= self.x <= 180.0 and -90.0 <= self.y <= 90.0):
            raise DataError(f"lon/lat out of range: ({self.x}, {self.y})")


@dataclass(frozen=True)
class PORecord:
    """Presence-only occurrence: one species seen at one location.

    Carries exactly one (single positive) species label; nothing is implied
    about the species that were not reported.
    """

    record_id: str
    location: Location
    species: int
    year: int | None = None
    source: str | None = None


@dataclass(frozen=True)
class PASurvey:
    """Presence-absence survey: exhaustive species inventory of one plot.

    ``present`` is never empty; species not in it are genuinely absent.
    """

    survey_id: str
    location: Location
    present: frozenset[int]
    stratum: str | None = None


@dataclass(frozen=True)
class PredictionSet:
    """Predicted species set for one survey. May be empty."""

    survey_id: str
    species: frozenset[int]


class SpeciesIndex:
    """Bijection between external species ids and dense indices 0..S-1.

    Dense indices follow the lexicographic order of the unique ids, so the
    index is deterministic regardless of input order.
    """

    def __init__(self, ids: Sequence[str]):
        self._ids = tuple(ids)
        self._pos = {sid: i for i, sid in enumerate(self._ids)}
        if len(self._pos) != len(self._ids):
            raise DataError("duplicate species ids in index")

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, species_id: str) -> bool:
        return species_id in self._pos

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SpeciesIndex) and other._ids == self._ids

    @property
    def ids(self) -> tuple[str, ...]:
        return self._ids

    def lookup(self, species_id: str) -> int:
        return self._pos[species_id]

    def id_of(self, index: int) -> str:
        return self._ids[index]

    def to_list(self) -> list[str]:
        return list(self._ids)

    @classmethod
    def from_list(cls, ids: Sequence[str]) -> "SpeciesIndex":
        return cls(ids)


def build_species_index(species_ids: Iterable[str]) -> SpeciesIndex:
    """Build a :class:`SpeciesIndex` from any iterable of id strings.

    Duplicates are collapsed; ordering is by sorted unique id.
    """
    unique = sorted(set(species_ids))
    if not unique:
        raise DataError("no species")
    return SpeciesIndex(unique)
