"""Georeferenced single-band rasters and ESRI ASCII grid I/O.

A grid file has five or six header lines (``ncols``, ``nrows``, ``xllcorner``,
``yllcorner``, ``cellsize``, optional ``NODATA_value``) followed by ``nrows``
lines of ``ncols`` whitespace-separated elevation values, north row first.
Header keys are case-insensitive. Cells are square; row 0 of the value array
is the northernmost row.

Internally nodata cells are held as NaN; the sentinel only appears in files.
Values are printed with shortest round-trip precision so that
``read_ascii_grid(write_ascii_grid(g))`` reproduces ``g`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import AsciiGridError, GeorefMismatchError

DEFAULT_NODATA = -9999.0

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")

# Origin/cellsize agreement required for grid algebra, in meters.
GEOREF_TOLERANCE_M = 1e-6


def format_value(v: float) -> str:
    """Shortest decimal text that parses back to exactly ``v``.

    Integral values are printed without a decimal point ("5", not "5.0").
    """
    f = float(v)
    if f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


@dataclass(frozen=True)
class GridGeoref:
    """Spatial frame of a raster: cell counts, lower-left corner, cell size.

    Cell (row r, col c) has its center at
    ``(xll + (c + 0.5) * cellsize, yll + (nrows - 1 - r + 0.5) * cellsize)``;
    row 0 is the northernmost row.
    """

    ncols: int
    nrows: int
    xll: float
    yll: float
    cellsize: float

    def __post_init__(self):
        if self.ncols < 1 or self.nrows < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.ncols}x{self.nrows}")
        if self.cellsize <= 0:
            raise ValueError(f"cellsize must be positive, got {self.cellsize}")

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        x = self.xll + (col + 0.5) * self.cellsize
        y = self.yll + (self.nrows - 1 - row + 0.5) * self.cellsize
        return x, y

    def col_centers(self) -> np.ndarray:
        return self.xll + (np.arange(self.ncols) + 0.5) * self.cellsize

    def row_centers(self) -> np.ndarray:
        """Y coordinate of each row center, row 0 (north) first."""
        return self.yll + (self.nrows - 1 - np.arange(self.nrows) + 0.5) * self.cellsize

    def approx_equal(self, other: "GridGeoref", tol: float = GEOREF_TOLERANCE_M) -> bool:
        return (
            self.ncols == other.ncols
            and self.nrows == other.nrows
            and abs(self.xll - other.xll) <= tol
            and abs(self.yll - other.yll) <= tol
            and abs(self.cellsize - other.cellsize) <= tol
        )


@dataclass
class Grid:
    """Elevation raster. ``data`` is float64, shape (nrows, ncols), NaN = nodata."""

    georef: GridGeoref
    data: np.ndarray
    nodata: float = DEFAULT_NODATA

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.shape != (self.georef.nrows, self.georef.ncols):
            raise ValueError(
                f"data shape {arr.shape} does not match georef "
                f"({self.georef.nrows}, {self.georef.ncols})"
            )
        if np.isinf(arr).any():
            raise ValueError("grid values must be finite or nodata")
        # Sentinel-valued cells are nodata by definition; canonicalize to NaN.
        arr = arr.copy()
        arr[arr == self.nodata] = np.nan
        self.data = arr

    @property
    def valid_mask(self) -> np.ndarray:
        return ~np.isnan(self.data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.georef == other.georef
            and self.nodata == other.nodata
            and np.array_equal(self.data, other.data, equal_nan=True)
        )


@dataclass
class GridStats:
    """Summary over valid cells. Extrema are None when no cell is valid."""

    min: Optional[float]
    max: Optional[float]
    mean: Optional[float]
    count: int


def _parse_header_line(line: str, line_no: int, expected_key: str) -> float:
    parts = line.split()
    if len(parts) != 2:
        raise AsciiGridError(
            f"expected '{expected_key} <value>', got {line.strip()!r}", line_no
        )
    key, value = parts
    if key.lower() != expected_key:
        raise AsciiGridError(
            f"expected header key {expected_key!r}, got {key!r}", line_no
        )
    try:
        return float(value)
    except ValueError:
        raise AsciiGridError(
            f"non-numeric value {value!r} for header key {expected_key!r}", line_no
        ) from None


def read_ascii_grid(text: str) -> Grid:
    """Parse an ESRI ASCII grid from a string.

    Raises AsciiGridError (with the offending line number) on malformed
    headers, non-numeric tokens, or a wrong body value count.
    """
    lines = text.splitlines()
    if len(lines) < len(_HEADER_KEYS):
        raise AsciiGridError("incomplete header", len(lines) or 1)

    raw = {}
    for i, key in enumerate(_HEADER_KEYS):
        raw[key] = _parse_header_line(lines[i], i + 1, key)

    if raw["ncols"] != int(raw["ncols"]) or raw["nrows"] != int(raw["nrows"]):
        raise AsciiGridError("ncols/nrows must be integers", 1)
    ncols, nrows = int(raw["ncols"]), int(raw["nrows"])
    if ncols < 1 or nrows < 1:
        raise AsciiGridError(f"grid must be at least 1x1, got {ncols}x{nrows}", 1)
    if raw["cellsize"] <= 0:
        raise AsciiGridError(f"cellsize must be positive, got {raw['cellsize']}", 5)

    nodata = DEFAULT_NODATA
    body_start = len(_HEADER_KEYS)
    if body_start < len(lines):
        parts = lines[body_start].split()
        if parts and parts[0].lower() == "nodata_value":
            nodata = _parse_header_line(lines[body_start], body_start + 1, "nodata_value")
            body_start += 1

    expected = ncols * nrows
    values = np.empty(expected, dtype=np.float64)
    count = 0
    for line_no0 in range(body_start, len(lines)):
        for token in lines[line_no0].split():
            if count >= expected:
                raise AsciiGridError(
                    f"too many values: expected {expected}", line_no0 + 1
                )
            try:
                values[count] = float(token)
            except ValueError:
                raise AsciiGridError(
                    f"non-numeric value token {token!r}", line_no0 + 1
                ) from None
            count += 1
    if count < expected:
        raise AsciiGridError(
            f"too few values: expected {expected}, got {count}", len(lines)
        )

    georef = GridGeoref(ncols, nrows, raw["xllcorner"], raw["yllcorner"], raw["cellsize"])
    return Grid(georef, values.reshape(nrows, ncols), nodata)


def write_ascii_grid(g: Grid) -> str:
    """Serialize a Grid to ESRI ASCII text (always includes NODATA_value)."""
    ref = g.georef
    out = [
        f"ncols {ref.ncols}",
        f"nrows {ref.nrows}",
        f"xllcorner {format_value(ref.xll)}",
        f"yllcorner {format_value(ref.yll)}",
        f"cellsize {format_value(ref.cellsize)}",
        f"NODATA_value {format_value(g.nodata)}",
    ]
    sentinel = format_value(g.nodata)
    for row in g.data:
        out.append(" ".join(sentinel if np.isnan(v) else format_value(v) for v in row))
    return "\n".join(out) + "\n"


def grid_subtract(a: Grid, b: Grid) -> Grid:
    """Per-cell a - b. Nodata in either operand yields nodata in the result."""
    if not a.georef.approx_equal(b.georef):
        raise GeorefMismatchError(
            f"grid georefs differ: {a.georef} vs {b.georef}"
        )
    return Grid(a.georef, a.data - b.data, a.nodata)


def grid_stats(g: Grid) -> GridStats:
    """Min/max/mean/count over valid cells; count 0 leaves extrema absent."""
    valid = g.data[g.valid_mask]
    if valid.size == 0:
        return GridStats(None, None, None, 0)
    return GridStats(
        float(valid.min()), float(valid.max()), float(valid.mean()), int(valid.size)
    )
