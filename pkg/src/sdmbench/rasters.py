"""Gridded environmental rasters: ESRI ASCII grid I/O and point sampling.

Sampling is nearest-cell (the cell containing the point, floor semantics);
there is no interpolation, so categorical layers sample correctly.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DataError, Location

DEFAULT_NODATA = -9999.0


@dataclass
class RasterGrid:
    """A regular grid of values.

    ``values`` has shape (ny, nx) with row 0 at the southern edge (y0), so
    ``values[j, i]`` covers x in [x0 + i*cell, x0 + (i+1)*cell) and the
    analogous y interval.
    """

    name: str
    nx: int
    ny: int
    x0: float
    y0: float
    cell: float
    nodata: float = DEFAULT_NODATA
    values: np.ndarray = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.cell <= 0:
            raise DataError(f"grid {self.name}: cell size must be > 0")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.ny, self.nx):
            raise DataError(
                f"grid {self.name}: values shape {self.values.shape} != ({self.ny}, {self.nx})"
            )

    @property
    def x1(self) -> float:
        return self.x0 + self.nx * self.cell

    @property
    def y1(self) -> float:
        return self.y0 + self.ny * self.cell

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        i = int(np.floor((x - self.x0) / self.cell))
        j = int(np.floor((y - self.y0) / self.cell))
        if 0 <= i < self.nx and 0 <= j < self.ny:
            return i, j
        return None

    def sample_many(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized sampling. Returns (values, valid_mask); invalid entries are 0."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        i = np.floor((xs - self.x0) / self.cell).astype(np.int64)
        j = np.floor((ys - self.y0) / self.cell).astype(np.int64)
        inside = (i >= 0) & (i < self.nx) & (j >= 0) & (j < self.ny)
        vals = np.zeros(xs.shape, dtype=float)
        vals[inside] = self.values[j[inside], i[inside]]
        valid = inside & (vals != self.nodata)
        vals[~valid] = 0.0
        return vals, valid


def sample_point(grid: RasterGrid, loc: Location) -> float | None:
    """Value of the cell containing ``loc``; None if out of extent or nodata."""
    cell = grid.cell_of(loc.x, loc.y)
    if cell is None:
        return None
    value = float(grid.values[cell[1], cell[0]])
    if value == grid.nodata:
        return None
    return value


def read_ascii_grid(path: str | Path, name: str | None = None) -> RasterGrid:
    """Read an ESRI ASCII grid (textual header + values, north row first)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"raster not found: {path}")
    header: dict[str, float] = {}
    rows: list[np.ndarray] = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            key = parts[0].lower()
            if key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"):
                header[key] = float(parts[1])
            else:
                rows.append(np.array(parts, dtype=float))
    for key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if key not in header:
            raise DataError(f"raster {path}: missing header field {key}")
    nx, ny = int(header["ncols"]), int(header["nrows"])
    flat = np.concatenate(rows) if rows else np.empty(0)
    if flat.size != nx * ny:
        raise DataError(f"raster {path}: expected {nx * ny} values, found {flat.size}")
    # file rows run north to south; flip so row 0 is the southern edge
    values = flat.reshape(ny, nx)[::-1].copy()
    return RasterGrid(
        name=name or path.stem,
        nx=nx,
        ny=ny,
        x0=header["xllcorner"],
        y0=header["yllcorner"],
        cell=header["cellsize"],
        nodata=header.get("nodata_value", DEFAULT_NODATA),
        values=values,
    )


def write_ascii_grid(path: str | Path, grid: RasterGrid) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"ncols {grid.nx}\n")
        fh.write(f"nrows {grid.ny}\n")
        fh.write(f"xllcorner {float(grid.x0)!r}\n")
        fh.write(f"yllcorner {float(grid.y0)!r}\n")
        fh.write(f"cellsize {float(grid.cell)!r}\n")
        fh.write(f"NODATA_value {float(grid.nodata)!r}\n")
        for j in range(grid.ny - 1, -1, -1):
            fh.write(" ".join(repr(float(v)) for v in grid.values[j]) + "\n")
