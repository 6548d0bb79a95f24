"""CSV ingestion and export for occurrence records and survey inventories.

Files are UTF-8, comma-separated, with a header row. Rows that cannot be
parsed (bad coordinates, unknown species against a fixed index, missing
fields) are counted per reason and reported, never silently dropped.
"""
from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

from .core import (
    LONLAT,
    DataError,
    Location,
    PASurvey,
    PORecord,
    SchemaError,
    SpeciesIndex,
    build_species_index,
)


@dataclass(frozen=True)
class POColumns:
    record_id: str = "recordId"
    lon: str = "lon"
    lat: str = "lat"
    species: str = "speciesId"
    year: str = "year"
    source: str = "source"


@dataclass(frozen=True)
class PAColumns:
    survey_id: str = "surveyId"
    lon: str = "lon"
    lat: str = "lat"
    species: str = "speciesId"
    stratum: str = "stratum"


@dataclass
class IngestReport:
    """Row accounting for one loaded file."""

    n_rows: int = 0
    n_loaded: int = 0
    rejected: Counter = field(default_factory=Counter)

    @property
    def n_rejected(self) -> int:
        return sum(self.rejected.values())


@dataclass
class POLoadResult:
    records: list[PORecord]
    report: IngestReport
    index: SpeciesIndex


@dataclass
class PALoadResult:
    surveys: list[PASurvey]
    report: IngestReport
    index: SpeciesIndex


def _open_rows(path: str | Path, required: list[str]):
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    fh = path.open(newline="", encoding="utf-8")
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    for col in required:
        if col not in header:
            fh.close()
            raise SchemaError(f"missing column {col!r} in {path}")
    return fh, reader, header


def _parse_coord(row: dict, xcol: str, ycol: str, crs: str) -> Location | None:
    try:
        x = float(row[xcol])
        y = float(row[ycol])
    except (TypeError, ValueError):
        return None
    loc = Location(x, y, crs)
    if crs == LONLAT and not (-180.0 <= x <= 180.0 and -90.0 <= y <= 90.0):
        return None
    return loc


def load_po_csv(
    path: str | Path,
    columns: POColumns = POColumns(),
    index: SpeciesIndex | None = None,
    crs: str = LONLAT,
) -> POLoadResult:
    """Load presence-only records, one per row.

    When ``index`` is None a species index is built from the file itself
    (sorted unique ids); otherwise rows with species missing from the given
    index are rejected and counted.
    """
    if index is None:
        fh, reader, _ = _open_rows(path, [columns.species])
        with fh:
            ids = {row[columns.species] for row in reader if row.get(columns.species)}
        if not ids:
            raise DataError(f"no species in {path}")
        index = build_species_index(ids)

    required = [columns.record_id, columns.lon, columns.lat, columns.species]
    fh, reader, header = _open_rows(path, required)
    report = IngestReport()
    records: list[PORecord] = []
    with fh:
        for row in reader:
            report.n_rows += 1
            loc = _parse_coord(row, columns.lon, columns.lat, crs)
            if loc is None:
                report.rejected["bad_coordinates"] += 1
                continue
            sid = row.get(columns.species) or ""
            if sid not in index:
                report.rejected["unknown_species"] += 1
                continue
            year = None
            if columns.year in header and row.get(columns.year):
                try:
                    year = int(row[columns.year])
                except ValueError:
                    report.rejected["bad_year"] += 1
                    continue
            source = row.get(columns.source) or None if columns.source in header else None
            records.append(
                PORecord(row[columns.record_id], loc, index.lookup(sid), year, source)
            )
            report.n_loaded += 1
    return POLoadResult(records, report, index)


def load_pa_csv(
    path: str | Path,
    columns: PAColumns = PAColumns(),
    index: SpeciesIndex | None = None,
    crs: str = LONLAT,
) -> PALoadResult:
    """Load presence-absence surveys from long-format rows.

    Rows sharing a survey id are grouped into one survey; duplicate
    (survey, species) pairs are deduplicated. The survey location and
    stratum come from its first valid row. Surveys that end up with an
    empty species set are rejected and counted.
    """
    if index is None:
        fh, reader, _ = _open_rows(path, [columns.species])
        with fh:
            ids = {row[columns.species] for row in reader if row.get(columns.species)}
        if not ids:
            raise DataError(f"no species in {path}")
        index = build_species_index(ids)

    required = [columns.survey_id, columns.lon, columns.lat, columns.species]
    fh, reader, header = _open_rows(path, required)
    report = IngestReport()
    order: list[str] = []
    locs: dict[str, Location] = {}
    strata: dict[str, str | None] = {}
    species: dict[str, set[int]] = {}
    with fh:
        for row in reader:
            report.n_rows += 1
            survey_id = row.get(columns.survey_id) or ""
            if not survey_id:
                report.rejected["missing_survey_id"] += 1
                continue
            loc = _parse_coord(row, columns.lon, columns.lat, crs)
            if loc is None:
                report.rejected["bad_coordinates"] += 1
                continue
            if survey_id not in locs:
                order.append(survey_id)
                locs[survey_id] = loc
                strata[survey_id] = (
                    row.get(columns.stratum) or None if columns.stratum in header else None
                )
                species[survey_id] = set()
            sid = row.get(columns.species) or ""
            if sid not in index:
                report.rejected["unknown_species"] += 1
                continue
            species[survey_id].add(index.lookup(sid))
            report.n_loaded += 1

    surveys = []
    for survey_id in order:
        if not species[survey_id]:
            report.rejected["empty_survey"] += 1
            continue
        surveys.append(
            PASurvey(survey_id, locs[survey_id], frozenset(species[survey_id]), strata[survey_id])
        )
    return PALoadResult(surveys, report, index)


def save_po_csv(
    path: str | Path,
    records: list[PORecord],
    index: SpeciesIndex,
    columns: POColumns = POColumns(),
) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [columns.record_id, columns.lon, columns.lat, columns.species, columns.year, columns.source]
        )
        for rec in records:
            writer.writerow(
                [
                    rec.record_id,
                    repr(rec.location.x),
                    repr(rec.location.y),
                    index.id_of(rec.species),
                    "" if rec.year is None else rec.year,
                    rec.source or "",
                ]
            )


def save_pa_csv(
    path: str | Path,
    surveys: list[PASurvey],
    index: SpeciesIndex,
    columns: PAColumns = PAColumns(),
) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            [columns.survey_id, columns.lon, columns.lat, columns.species, columns.stratum]
        )
        for survey in surveys:
            for sp in sorted(survey.present):
                writer.writerow(
                    [
                        survey.survey_id,
                        repr(survey.location.x),
                        repr(survey.location.y),
                        index.id_of(sp),
                        survey.stratum or "",
                    ]
                )


def po_columns_from_config(cfg: dict) -> POColumns:
    return replace(POColumns(), **{k: v for k, v in cfg.items() if k in POColumns.__dataclass_fields__})


def pa_columns_from_config(cfg: dict) -> PAColumns:
    return replace(PAColumns(), **{k: v for k, v in cfg.items() if k in PAColumns.__dataclass_fields__})
