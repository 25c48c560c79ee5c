"""Synthetic surface-model scenes with exact ground truth.

A scene is flat or planar-ramp terrain plus rectangular-footprint prisms of
known height, with optional uniform noise. The noise generator is a fixed
64-bit linear congruential generator (Knuth MMIX constants) so identical
seeds produce bit-identical grids on every platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import SceneError
from .footprints import Footprint, rasterize_polygon
from .grid import Grid, GridGeoref

LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407
LCG_MOD = 1 << 64


@dataclass(frozen=True)
class TerrainModel:
    """Planar terrain: elevation at (x, y) = origin_elev
    + grad_x * (x - xll) + grad_y * (y - yll)."""

    origin_elev: float = 0.0
    grad_x: float = 0.0
    grad_y: float = 0.0


@dataclass
class SyntheticScene:
    georef: GridGeoref
    terrain: TerrainModel = TerrainModel()
    prisms: list[tuple[Footprint, float]] = field(default_factory=list)
    noise_amplitude_m: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_amplitude_m < 0:
            raise SceneError("noise_amplitude_m must be >= 0")
        for fp, height in self.prisms:
            if height < 0:
                raise SceneError(f"prism {fp.id!r}: height must be >= 0")


@dataclass
class SynthResult:
    dsm: Grid
    truth_dtm: Grid
    true_heights: dict[str, float]


def lcg_noise(seed: int, count: int, amplitude: float) -> np.ndarray:
    """Deterministic uniform noise in [-amplitude, +amplitude]."""
    out = np.empty(count, dtype=np.float64)
    state = seed % LCG_MOD
    for i in range(count):
        state = (state * LCG_MULT + LCG_INC) % LCG_MOD
        out[i] = (2.0 * (state / LCG_MOD) - 1.0) * amplitude
    return out


def load_scene(text: str) -> SyntheticScene:
    """Scene JSON: {georef, terrain, prisms: [{id, ring, height_m, ...}],
    noise_amplitude_m, seed}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneError(f"invalid scene JSON: {e}") from None
    try:
        g = doc["georef"]
        georef = GridGeoref(
            int(g["ncols"]), int(g["nrows"]),
            float(g["xll"]), float(g["yll"]), float(g["cellsize"]),
        )
        t = doc.get("terrain", {})
        terrain = TerrainModel(
            float(t.get("origin_elev", 0.0)),
            float(t.get("grad_x", 0.0)),
            float(t.get("grad_y", 0.0)),
        )
        prisms = []
        for p in doc.get("prisms", []):
            fp = Footprint(
                id=str(p["id"]),
                type_label=str(p.get("type_label", "building")),
                ring=[(q[0], q[1]) for q in p["ring"]],
                unit_area_m2=float(p["unit_area_m2"]) if "unit_area_m2" in p else None,
                units_per_floor_override=(
                    int(p["units_per_floor"]) if "units_per_floor" in p else None
                ),
            )
            prisms.append((fp, float(p["height_m"])))
        return SyntheticScene(
            georef=georef,
            terrain=terrain,
            prisms=prisms,
            noise_amplitude_m=float(doc.get("noise_amplitude_m", 0.0)),
            seed=int(doc.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SceneError(f"invalid scene definition: {e}") from None


def synthesize_dsm(scene: SyntheticScene) -> SynthResult:
    """Build the surface model, the exact bare-earth grid, and true heights.

    Prisms sit on the terrain (cell value = terrain + prism height + noise).
    Nested prisms are allowed, innermost winning; partially overlapping
    prisms are rejected.
    """
    ref = scene.georef
    xs = ref.col_centers()
    ys = ref.row_centers()
    gx, gy = np.meshgrid(xs, ys)
    terrain = (
        scene.terrain.origin_elev
        + scene.terrain.grad_x * (gx - ref.xll)
        + scene.terrain.grad_y * (gy - ref.yll)
    )

    cell_sets = [(fp, h, rasterize_polygon(fp, ref)) for fp, h in scene.prisms]
    for i in range(len(cell_sets)):
        for j in range(i + 1, len(cell_sets)):
            a, b = cell_sets[i][2], cell_sets[j][2]
            common = a & b
            if common and not (a <= b or b <= a):
                raise SceneError(
                    f"prisms {cell_sets[i][0].id!r} and {cell_sets[j][0].id!r} overlap"
                )

    dsm_data = terrain.copy()
    # larger prisms first so nested (smaller) prisms overwrite them
    for fp, h, cells in sorted(cell_sets, key=lambda t: -len(t[2])):
        for r, c in cells:
            dsm_data[r, c] = terrain[r, c] + h

    if scene.noise_amplitude_m > 0:
        noise = lcg_noise(scene.seed, ref.nrows * ref.ncols, scene.noise_amplitude_m)
        dsm_data = dsm_data + noise.reshape(ref.nrows, ref.ncols)

    return SynthResult(
        dsm=Grid(ref, dsm_data),
        truth_dtm=Grid(ref, terrain),
        true_heights={fp.id: h for fp, h in scene.prisms},
    )


def rectangle_ring(x0: float, y0: float, width: float, depth: float) -> list[tuple[float, float]]:
    """Axis-aligned rectangle, counter-clockwise from the southwest corner."""
    return [(x0, y0), (x0 + width, y0), (x0 + width, y0 + depth), (x0, y0 + depth)]
