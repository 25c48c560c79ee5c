import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from popvol import (
    BuildingHeightRecord,
    EstimationConfig,
    Footprint,
    Grid,
    GridGeoref,
    aggregate,
    estimate_building,
)
from popvol.synth import rectangle_ring

import site_data


def make_grid(values, cellsize=1.0, xll=0.0, yll=0.0, nodata=-9999.0) -> Grid:
    arr = np.asarray(values, dtype=np.float64)
    georef = GridGeoref(arr.shape[1], arr.shape[0], xll, yll, cellsize)
    return Grid(georef, arr, nodata)


@pytest.fixture
def site_rows():
    return site_data.BUILDINGS


@pytest.fixture
def site_society():
    """Aggregated estimate over the reference site with the per-type override."""
    cfg = EstimationConfig()
    estimates = []
    for bid, type_label, height, _, width, depth, unit_area in site_data.BUILDINGS:
        fp = Footprint(
            id=bid,
            type_label=type_label,
            ring=rectangle_ring(0.0, 0.0, width, depth),
            unit_area_m2=unit_area,
            units_per_floor_override=site_data.UNITS_PER_FLOOR,
        )
        rec = BuildingHeightRecord(bid, height, width * depth, 100)
        estimates.append(estimate_building(rec, fp, cfg))
    return aggregate(estimates)
