"""Comparison of estimated unit counts against ground-truth survey data.

Percent differences always use the ground truth as the denominator; when an
external reference report used a different convention, the discrepancies can
be footnoted next to the recomputed values.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import PipelineError, ReportMismatchError
from .estimate import SocietyEstimate

TOTAL_LABEL = "TOTAL"


@dataclass(frozen=True)
class GroundTruthRow:
    type_label: str
    units: int

    def __post_init__(self):
        if self.units < 0:
            raise ValueError(f"ground-truth units must be >= 0, got {self.units}")


@dataclass(frozen=True)
class ValidationRow:
    type_label: str
    estimated_units: int
    ground_units: int
    diff_pct: float


def read_ground_truth(text: str) -> list[GroundTruthRow]:
    """Parse a `type_label,units` CSV; type labels must be unique."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or set(reader.fieldnames) < {"type_label", "units"}:
        raise PipelineError("ground-truth CSV needs columns: type_label,units")
    rows = []
    seen = set()
    for rec in reader:
        label = rec["type_label"].strip()
        if label in seen:
            raise PipelineError(f"duplicate ground-truth type label {label!r}")
        seen.add(label)
        rows.append(GroundTruthRow(label, int(rec["units"])))
    return rows


def percent_diff(estimated: int, ground: int) -> float:
    """|estimated - ground| / ground * 100, ground truth as denominator."""
    if ground == 0:
        raise ReportMismatchError("ground-truth units are 0; percent difference undefined")
    return abs(estimated - ground) / ground * 100.0


def validate_report(
    est: SocietyEstimate, gt: Sequence[GroundTruthRow]
) -> list[ValidationRow]:
    """One row per type plus a TOTAL row; both sides must list the same types."""
    gt_by_type = {row.type_label: row.units for row in gt}
    est_types = set(est.per_type)
    gt_types = set(gt_by_type)
    if est_types != gt_types:
        only_est = sorted(est_types - gt_types)
        only_gt = sorted(gt_types - est_types)
        parts = []
        if only_est:
            parts.append(f"only estimated: {', '.join(only_est)}")
        if only_gt:
            parts.append(f"only ground truth: {', '.join(only_gt)}")
        raise ReportMismatchError("type labels do not match (" + "; ".join(parts) + ")")

    rows = [
        ValidationRow(label, tot.units, gt_by_type[label], percent_diff(tot.units, gt_by_type[label]))
        for label, tot in est.per_type.items()
    ]
    ground_total = sum(gt_by_type.values())
    rows.append(
        ValidationRow(
            TOTAL_LABEL,
            est.total_units,
            ground_total,
            percent_diff(est.total_units, ground_total),
        )
    )
    return rows


def render_report_csv(rows: Sequence[ValidationRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["type_label", "estimated_units", "ground_units", "diff_pct"])
    for row in rows:
        writer.writerow(
            [row.type_label, row.estimated_units, row.ground_units, f"{row.diff_pct:.2f}"]
        )
    return buf.getvalue()


def diff_footnotes(
    rows: Sequence[ValidationRow], published_diffs: Mapping[str, float]
) -> list[str]:
    """Note rows whose recomputed percent difference disagrees with a
    previously published figure (usually a denominator-convention artifact)."""
    notes = []
    for row in rows:
        published = published_diffs.get(row.type_label)
        if published is None:
            continue
        if abs(round(row.diff_pct, 2) - published) > 0.005:
            notes.append(
                f"{row.type_label}: recomputed unit diff {row.diff_pct:.2f}% differs "
                f"from published {published}% (denominator convention)"
            )
    return notes


def person_total_footnotes(
    est: SocietyEstimate, published_persons: Mapping[str, float]
) -> list[str]:
    """Note per-type person totals that disagree with published figures."""
    notes = []
    for label, tot in est.per_type.items():
        published = published_persons.get(label)
        if published is None:
            continue
        if abs(tot.persons - published) > 1e-9:
            notes.append(
                f"{label}: computed {tot.persons:g} persons vs published "
                f"{published:g} (arithmetic discrepancy in the published total)"
            )
    published_total = published_persons.get(TOTAL_LABEL)
    if published_total is not None and abs(est.total_persons - published_total) > 1e-9:
        notes.append(
            f"{TOTAL_LABEL}: computed {est.total_persons:g} persons vs published "
            f"{published_total:g}"
        )
    return notes
