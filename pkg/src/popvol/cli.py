"""Command-line pipeline: dtm, estimate, validate, amenities, model3d, synth, run.

Stages exchange data through CSV and ASCII-grid files so each is independently
runnable. A JSON config supplies shared parameters; command-line flags override
config values. Per-building failures never abort a batch: they are recorded as
warnings and flagged rows, and the command still exits 0.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .dtm import DtmFilterParams, progressive_morphological_filter
from .errors import ConfigError, FootprintError, PipelineError
from .estimate import (
    BuildingEstimate,
    EstimationConfig,
    PersonsBand,
    aggregate,
    estimate_building,
)
from .footprints import Footprint, parse_footprints, zonal_height
from .grid import Grid, grid_subtract, read_ascii_grid, write_ascii_grid
from .mesh import extrude, write_obj
from .osm import count_within_radius, filter_amenities, load_rules, parse_osm
from .synth import load_scene, synthesize_dsm
from .validate import (
    diff_footnotes,
    person_total_footnotes,
    read_ground_truth,
    render_report_csv,
    validate_report,
)

HEIGHTS_HEADER = "id,type_label,height_m,footprint_area_m2,valid_cells"
ESTIMATES_HEADER = (
    "id,type_label,height_m,floors,units_per_floor,units,unit_area_m2,persons,excluded"
)

ESTIMATION_KEYS = (
    "floor_height_m",
    "min_building_height_m",
    "occupancy_rate",
    "efficiency",
    "height_percentile",
    "min_cells",
)
FILTER_KEYS = (
    "initial_window",
    "max_window_m",
    "slope",
    "initial_threshold_m",
    "max_threshold_m",
)


def _read_text(path) -> str:
    p = Path(path)
    if not p.is_file():
        raise PipelineError(f"input file not found: {p}")
    return p.read_text()


def _write_text(path, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text)


def _load_config(path) -> dict:
    try:
        doc = json.loads(_read_text(path))
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid config JSON in {path}: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return doc


def build_estimation_config(cfg: dict) -> EstimationConfig:
    kwargs = {k: cfg[k] for k in ESTIMATION_KEYS if cfg.get(k) is not None}
    if cfg.get("bands") is not None:
        kwargs["bands"] = tuple(
            PersonsBand(float(b["min_area_m2"]), float(b["max_area_m2"]), float(b["persons"]))
            for b in cfg["bands"]
        )
    return EstimationConfig(**kwargs)


def build_filter_params(cfg: dict) -> DtmFilterParams:
    kwargs = {k: cfg[k] for k in FILTER_KEYS if cfg.get(k) is not None}
    return DtmFilterParams(**kwargs)


def _fmt_real(v: Optional[float], decimals: int = 3) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.{decimals}f}"


def _csv_text(header: str, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header.split(","))
    writer.writerows(rows)
    return buf.getvalue()


def render_heights_csv(rows) -> str:
    """rows: (Footprint, BuildingHeightRecord) pairs."""
    return _csv_text(
        HEIGHTS_HEADER,
        (
            (rec.id, fp.type_label, _fmt_real(rec.height_m),
             _fmt_real(rec.footprint_area_m2), rec.valid_cells)
            for fp, rec in rows
        ),
    )


def render_estimates_csv(estimates: Sequence[BuildingEstimate]) -> str:
    return _csv_text(
        ESTIMATES_HEADER,
        (
            (e.id, e.type_label, _fmt_real(e.height_m), e.floors,
             e.units_per_floor, e.units, _fmt_real(e.unit_area_m2),
             _fmt_real(e.persons), e.excluded_reason if e.excluded else "")
            for e in estimates
        ),
    )


def read_estimates_csv(text: str) -> list[BuildingEstimate]:
    reader = csv.DictReader(io.StringIO(text))
    required = set(ESTIMATES_HEADER.split(","))
    if reader.fieldnames is None or set(reader.fieldnames) < required:
        raise PipelineError(f"estimates CSV needs columns: {ESTIMATES_HEADER}")
    rows = []
    for rec in reader:
        excluded = bool(rec["excluded"])
        rows.append(
            BuildingEstimate(
                id=rec["id"],
                type_label=rec["type_label"],
                height_m=float(rec["height_m"]) if rec["height_m"] else float("nan"),
                floors=int(rec["floors"]),
                units_per_floor=int(rec["units_per_floor"]),
                units=int(rec["units"]),
                unit_area_m2=float(rec["unit_area_m2"]) if rec["unit_area_m2"] else None,
                persons=float(rec["persons"]) if rec["persons"] else 0.0,
                excluded=excluded,
                excluded_reason=rec["excluded"],
            )
        )
    return rows


def estimate_buildings(
    dsm: Grid, dtm: Grid, footprints: Sequence[Footprint], cfg: EstimationConfig
) -> tuple[list, list[BuildingEstimate], list[str]]:
    """Shared core of the estimate stage.

    Returns (height rows, estimates, warnings); buildings that fail height
    extraction or configuration checks become excluded rows with the error
    text, and processing continues.
    """
    ndsm = grid_subtract(dsm, dtm)
    height_rows = []
    estimates: list[BuildingEstimate] = []
    warnings: list[str] = []
    for fp in footprints:
        try:
            rec = zonal_height(ndsm, fp, cfg.height_percentile, cfg.min_cells)
        except FootprintError as e:
            warnings.append(str(e))
            estimates.append(
                BuildingEstimate(
                    id=fp.id,
                    type_label=fp.type_label,
                    height_m=float("nan"),
                    floors=0,
                    units_per_floor=0,
                    units=0,
                    unit_area_m2=fp.unit_area_m2,
                    persons=0.0,
                    excluded=True,
                    excluded_reason=f"error: {e}",
                )
            )
            continue
        height_rows.append((fp, rec))
        try:
            estimates.append(estimate_building(rec, fp, cfg))
        except ConfigError as e:
            warnings.append(str(e))
            estimates.append(
                BuildingEstimate(
                    id=fp.id,
                    type_label=fp.type_label,
                    height_m=rec.height_m,
                    floors=0,
                    units_per_floor=0,
                    units=0,
                    unit_area_m2=fp.unit_area_m2,
                    persons=0.0,
                    excluded=True,
                    excluded_reason=f"error: {e}",
                )
            )
    return height_rows, estimates, warnings


def _ground_mask_grid(dsm: Grid, ground_mask: np.ndarray) -> Grid:
    data = np.where(ground_mask, 1.0, 0.0)
    data[~dsm.valid_mask] = np.nan
    return Grid(dsm.georef, data, dsm.nodata)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_dtm(args) -> int:
    dsm = read_ascii_grid(_read_text(args.dsm))
    params = build_filter_params(vars(args))
    dtm, ground_mask = progressive_morphological_filter(dsm, params)
    _write_text(args.out_dtm, write_ascii_grid(dtm))
    if args.out_mask:
        _write_text(args.out_mask, write_ascii_grid(_ground_mask_grid(dsm, ground_mask)))
    non_ground = int((~ground_mask & dsm.valid_mask).sum())
    print(f"dtm: {dsm.georef.nrows}x{dsm.georef.ncols} cells, {non_ground} non-ground")
    return 0


def cmd_estimate(args) -> int:
    cfg_dict = _load_config(args.config) if args.config else {}
    cfg = build_estimation_config(cfg_dict)
    dsm = read_ascii_grid(_read_text(args.dsm))
    dtm = read_ascii_grid(_read_text(args.dtm))
    footprints = parse_footprints(_read_text(args.footprints))
    height_rows, estimates, warnings = estimate_buildings(dsm, dtm, footprints, cfg)
    _write_text(args.out_heights, render_heights_csv(height_rows))
    _write_text(args.out_estimates, render_estimates_csv(estimates))
    society = aggregate(estimates)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(
        f"estimate: {len(estimates)} buildings, {society.total_units} units, "
        f"{society.total_persons_rounded} persons, {len(warnings)} warnings"
    )
    return 0


def cmd_validate(args) -> int:
    estimates = read_estimates_csv(_read_text(args.estimates))
    gt = read_ground_truth(_read_text(args.ground_truth))
    rows = validate_report(aggregate(estimates), gt)
    _write_text(args.out, render_report_csv(rows))
    total = rows[-1]
    print(
        f"validate: estimated {total.estimated_units} vs ground "
        f"{total.ground_units} units, diff {total.diff_pct:.2f}%"
    )
    return 0


def cmd_amenities(args) -> int:
    elements = parse_osm(_read_text(args.osm))
    rules = load_rules(_read_text(args.rules))
    amenities = filter_amenities(elements, rules)
    counts, matched = count_within_radius(
        amenities, args.center_lat, args.center_lon, args.radius_m
    )
    _write_text(args.out_records, _amenity_records_csv(matched))
    _write_text(args.out_summary, _amenity_summary_csv(counts))
    print(
        "amenities: "
        + ", ".join(f"{c}={counts[c]}" for c in sorted(counts))
        + f" within {args.radius_m} m"
    )
    return 0


def _amenity_records_csv(matched) -> str:
    return _csv_text(
        "category,element_id,name,lat,lon,distance_m",
        (
            (rec.category, rec.element_id, rec.name or "",
             f"{rec.lat:.7f}", f"{rec.lon:.7f}", f"{dist:.2f}")
            for rec, dist in sorted(matched, key=lambda t: (t[0].category, t[0].element_id))
        ),
    )


def _amenity_summary_csv(counts) -> str:
    return _csv_text("category,count", ((c, counts[c]) for c in sorted(counts)))


def _read_heights_by_id(text: str) -> dict[str, float]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or not {"id", "height_m"} <= set(reader.fieldnames):
        raise PipelineError("heights CSV needs columns: id,height_m")
    return {rec["id"]: float(rec["height_m"]) for rec in reader if rec["height_m"]}


def cmd_model3d(args) -> int:
    footprints = parse_footprints(_read_text(args.footprints))
    heights = _read_heights_by_id(_read_text(args.heights))
    buildings = []
    skipped = 0
    for fp in footprints:
        if fp.id not in heights:
            print(f"warning: no height for footprint {fp.id!r}, skipped", file=sys.stderr)
            skipped += 1
            continue
        buildings.append((fp, heights[fp.id]))
    mesh = extrude(buildings, args.base_elevation)
    _write_text(args.out, write_obj(mesh))
    print(
        f"model3d: {len(mesh.groups)} buildings, {len(mesh.vertices)} vertices, "
        f"{len(mesh.faces)} faces ({skipped} skipped)"
    )
    return 0


def cmd_synth(args) -> int:
    scene = load_scene(_read_text(args.scene))
    result = synthesize_dsm(scene)
    _write_text(args.out_dsm, write_ascii_grid(result.dsm))
    if args.out_truth_dtm:
        _write_text(args.out_truth_dtm, write_ascii_grid(result.truth_dtm))
    if args.out_heights:
        _write_text(
            args.out_heights,
            _csv_text(
                "id,type_label,height_m",
                ((fp.id, fp.type_label, _fmt_real(h)) for fp, h in scene.prisms),
            ),
        )
    if args.out_footprints:
        _write_text(args.out_footprints, footprints_to_geojson([fp for fp, _ in scene.prisms]))
    print(
        f"synth: {scene.georef.nrows}x{scene.georef.ncols} cells, "
        f"{len(scene.prisms)} prisms, seed {scene.seed}"
    )
    return 0


def footprints_to_geojson(footprints: Sequence[Footprint]) -> str:
    features = []
    for fp in footprints:
        props = {"id": fp.id, "type_label": fp.type_label}
        if fp.unit_area_m2 is not None:
            props["unit_area_m2"] = fp.unit_area_m2
        if fp.units_per_floor_override is not None:
            props["units_per_floor"] = fp.units_per_floor_override
        ring = [[x, y] for x, y in fp.ring] + [[fp.ring[0][0], fp.ring[0][1]]]
        features.append(
            {"type": "Feature", "properties": props,
             "geometry": {"type": "Polygon", "coordinates": [ring]}}
        )
    return json.dumps({"type": "FeatureCollection", "features": features}, indent=2) + "\n"


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    for key in ("dsm", "footprints"):
        if not cfg.get(key):
            raise ConfigError(f"config is missing required key {key!r}")
    if not args.out_dir and not cfg.get("out_dir"):
        raise ConfigError("config is missing required key 'out_dir'")

    # config-relative input paths; an --out-dir flag stays cwd-relative
    base_dir = Path(args.config).parent
    def resolve(p):
        q = Path(p)
        return q if q.is_absolute() else base_dir / q
    for key in ("dsm", "footprints", "ground_truth", "osm", "rules", "published_reference"):
        if cfg.get(key) and not resolve(cfg[key]).is_file():
            raise ConfigError(f"config key {key!r}: file not found: {resolve(cfg[key])}")

    out = Path(args.out_dir) if args.out_dir else resolve(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    summary: dict = {"stages": {}, "warnings": [], "footnotes": []}

    # stage: dtm
    dsm = read_ascii_grid(_read_text(resolve(cfg["dsm"])))
    params = build_filter_params(cfg)
    dtm, ground_mask = progressive_morphological_filter(dsm, params)
    _write_text(out / "dtm.asc", write_ascii_grid(dtm))
    _write_text(out / "ground_mask.asc", write_ascii_grid(_ground_mask_grid(dsm, ground_mask)))
    summary["stages"]["dtm"] = {
        "status": "ok",
        "non_ground_cells": int((~ground_mask & dsm.valid_mask).sum()),
        "outputs": ["dtm.asc", "ground_mask.asc"],
    }

    # stage: estimate (heights + unit/person conversion)
    est_cfg = build_estimation_config(cfg)
    footprints = parse_footprints(_read_text(resolve(cfg["footprints"])))
    height_rows, estimates, warnings = estimate_buildings(dsm, dtm, footprints, est_cfg)
    heights_csv = render_heights_csv(height_rows)
    _write_text(out / "heights.csv", heights_csv)
    _write_text(out / "estimates.csv", render_estimates_csv(estimates))
    summary["warnings"].extend(warnings)
    society = aggregate(estimates)
    summary["stages"]["estimate"] = {
        "status": "ok",
        "buildings": len(estimates),
        "failed_buildings": len(warnings),
        "outputs": ["heights.csv", "estimates.csv"],
    }
    summary["totals"] = {
        "units": society.total_units,
        "persons": society.total_persons,
        "persons_rounded": society.total_persons_rounded,
        "by_type": {
            label: {"units": tot.units, "persons": tot.persons}
            for label, tot in society.per_type.items()
        },
    }

    published = {}
    if cfg.get("published_reference"):
        published = json.loads(_read_text(resolve(cfg["published_reference"])))

    # stage: validate (optional)
    if cfg.get("ground_truth"):
        gt = read_ground_truth(_read_text(resolve(cfg["ground_truth"])))
        rows = validate_report(society, gt)
        _write_text(out / "validation.csv", render_report_csv(rows))
        summary["stages"]["validate"] = {
            "status": "ok",
            "total_diff_pct": round(rows[-1].diff_pct, 2),
            "outputs": ["validation.csv"],
        }
        if published.get("unit_diff_pct"):
            summary["footnotes"].extend(diff_footnotes(rows, published["unit_diff_pct"]))
    else:
        summary["stages"]["validate"] = {"status": "skipped"}
    if published.get("persons"):
        summary["footnotes"].extend(person_total_footnotes(society, published["persons"]))

    # stage: model3d, fed from the heights CSV so it matches a standalone
    # `popvol model3d` run on the same files
    heights_by_id = _read_heights_by_id(heights_csv)
    buildings = [(fp, heights_by_id[fp.id]) for fp in footprints if fp.id in heights_by_id]
    mesh = extrude(buildings, float(cfg.get("base_elevation_m", 0.0)))
    _write_text(out / "model.obj", write_obj(mesh))
    summary["stages"]["model3d"] = {
        "status": "ok",
        "buildings": len(mesh.groups),
        "outputs": ["model.obj"],
    }

    # stage: amenities (optional)
    amenity_keys = ("osm", "rules", "center_lat", "center_lon", "radius_m")
    if all(cfg.get(k) is not None for k in amenity_keys):
        elements = parse_osm(_read_text(resolve(cfg["osm"])))
        rules = load_rules(_read_text(resolve(cfg["rules"])))
        amenities = filter_amenities(elements, rules)
        counts, matched = count_within_radius(
            amenities, float(cfg["center_lat"]), float(cfg["center_lon"]), float(cfg["radius_m"])
        )
        _write_text(out / "amenities.csv", _amenity_records_csv(matched))
        _write_text(out / "amenities_summary.csv", _amenity_summary_csv(counts))
        summary["stages"]["amenities"] = {
            "status": "ok",
            "counts": {c: counts[c] for c in sorted(counts)},
            "outputs": ["amenities.csv", "amenities_summary.csv"],
        }
    else:
        summary["stages"]["amenities"] = {"status": "skipped"}

    _write_text(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(
        f"run: {society.total_units} units, {society.total_persons_rounded} persons, "
        f"{len(summary['warnings'])} warnings -> {out}"
    )
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_filter_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--initial-window", dest="initial_window", type=int, default=None)
    p.add_argument("--max-window-m", dest="max_window_m", type=float, default=None)
    p.add_argument("--slope", dest="slope", type=float, default=None)
    p.add_argument("--initial-threshold-m", dest="initial_threshold_m", type=float, default=None)
    p.add_argument("--max-threshold-m", dest="max_threshold_m", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="popvol",
        description="Population estimation from a surface-elevation raster and building footprints.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dtm", help="derive a bare-earth terrain model from a surface model")
    p.add_argument("--dsm", required=True)
    p.add_argument("--out-dtm", required=True)
    p.add_argument("--out-mask", default=None)
    _add_filter_args(p)
    p.set_defaults(func=cmd_dtm)

    p = sub.add_parser("estimate", help="per-building heights, units and persons")
    p.add_argument("--dsm", required=True)
    p.add_argument("--dtm", required=True)
    p.add_argument("--footprints", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out-heights", required=True)
    p.add_argument("--out-estimates", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("validate", help="compare estimated units against ground truth")
    p.add_argument("--estimates", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("amenities", help="count OSM amenities around a site")
    p.add_argument("--osm", required=True)
    p.add_argument("--rules", required=True)
    p.add_argument("--center-lat", type=float, required=True)
    p.add_argument("--center-lon", type=float, required=True)
    p.add_argument("--radius-m", type=float, required=True)
    p.add_argument("--out-records", required=True)
    p.add_argument("--out-summary", required=True)
    p.set_defaults(func=cmd_amenities)

    p = sub.add_parser("model3d", help="extrude footprints into an OBJ block model")
    p.add_argument("--footprints", required=True)
    p.add_argument("--heights", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--base-elevation", type=float, default=0.0)
    p.set_defaults(func=cmd_model3d)

    p = sub.add_parser("synth", help="generate a synthetic scene with known ground truth")
    p.add_argument("--scene", required=True)
    p.add_argument("--out-dsm", required=True)
    p.add_argument("--out-truth-dtm", default=None)
    p.add_argument("--out-heights", default=None)
    p.add_argument("--out-footprints", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="full pipeline driven by a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PipelineError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
