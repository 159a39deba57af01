"""CSV ingestion and export for validation registries.

Canonical columns: ``cpm_id, study_id, auc`` and either ``se`` or
``ci_lower, ci_upper``. Optional: ``sequence_index``, ``development_auc``.
A ``column_map`` renames canonical names to whatever the file uses.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .core import CpmSeries, ValidationStudy
from .errors import DataError
from .sim import CpmTruth

Z95 = 1.96
REQUIRED = ("cpm_id", "study_id", "auc")
COLUMNS = ("cpm_id", "study_id", "sequence_index", "auc", "se", "development_auc")


@dataclass
class FilterReport:
    rows_in: int = 0
    cpms_in: int = 0
    rows_kept: int = 0
    cpms_kept: int = 0
    dropped: Counter = field(default_factory=Counter)

    @property
    def rows_dropped(self) -> int:
        return sum(self.dropped.values())

    def to_json(self) -> dict:
        return {
            "rows_in": self.rows_in,
            "cpms_in": self.cpms_in,
            "rows_kept": self.rows_kept,
            "cpms_kept": self.cpms_kept,
            "rows_dropped": self.rows_dropped,
            "dropped": dict(sorted(self.dropped.items())),
        }


def _num(text) -> Optional[float]:
    if text is None:
        return None
    text = text.strip()
    if not text or text.upper() in ("NA", "NAN", "NULL"):
        return None
    try:
        x = float(text)
    except ValueError:
        return None
    return x if math.isfinite(x) else None


def parse_registry(path, column_map: Optional[dict] = None, z: float = Z95):
    """Read a registry CSV and apply completeness filters.

    Returns ``(registry, report)``. Rows with a missing AUC, a missing or
    nonpositive standard error, or an AUC outside (0, 1) are dropped and
    tallied by reason. A missing ``se`` is derived from the 95% CI as
    ``(ci_upper - ci_lower) / (2 * z)``.
    """
    names = {c: c for c in REQUIRED + ("se", "ci_lower", "ci_upper", "sequence_index", "development_auc")}
    names.update(column_map or {})
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            rows = list(reader)
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"cannot read {path}: {exc}", "unreadable") from exc

    missing = [c for c in REQUIRED if names[c] not in header]
    has_se = names["se"] in header
    has_ci = names["ci_lower"] in header and names["ci_upper"] in header
    if missing or not (has_se or has_ci):
        need = missing + ([] if has_se or has_ci else ["se or ci_lower/ci_upper"])
        raise DataError(f"{path}: header lacks {', '.join(need)}", "malformed-header")
    has_seq = names["sequence_index"] in header
    has_dev = names["development_auc"] in header

    report = FilterReport(rows_in=len(rows))
    groups: dict[str, list] = {}
    dev: dict[str, Optional[float]] = {}
    for row in rows:
        cpm = row[names["cpm_id"]].strip()
        groups.setdefault(cpm, [])
        if has_dev and dev.get(cpm) is None:
            dev[cpm] = _num(row.get(names["development_auc"]))
        auc = _num(row[names["auc"]])
        se = _num(row[names["se"]]) if has_se else None
        if se is None and has_ci:
            lo, hi = _num(row[names["ci_lower"]]), _num(row[names["ci_upper"]])
            if lo is not None and hi is not None:
                se = (hi - lo) / (2.0 * z)
        if auc is None:
            report.dropped["missing_auc"] += 1
        elif se is None:
            report.dropped["missing_se"] += 1
        elif se <= 0:
            report.dropped["nonpositive_se"] += 1
        elif not 0.0 < auc < 1.0:
            report.dropped["auc_out_of_range"] += 1
        else:
            seq = _num(row[names["sequence_index"]]) if has_seq else None
            groups[cpm].append((seq, row[names["study_id"]].strip(), auc, se))
    report.cpms_in = len(groups)

    registry = []
    for cpm, items in groups.items():
        if not items:
            continue
        if has_seq and all(it[0] is not None for it in items):
            items = sorted(items, key=lambda it: it[0])
            seqs = [int(it[0]) for it in items]
        else:
            seqs = list(range(len(items)))
        if len(set(seqs)) != len(seqs):
            raise DataError(f"{path}: duplicate sequence_index in CPM {cpm!r}", "duplicate-sequence")
        studies = tuple(ValidationStudy(auc, se, sid, q) for q, (_, sid, auc, se) in zip(seqs, items))
        registry.append(CpmSeries(cpm, studies, dev.get(cpm)))
    report.rows_kept = sum(len(s) for s in registry)
    report.cpms_kept = len(registry)
    if not registry:
        raise DataError(f"{path}: no rows survive filtering", "no-surviving-rows")
    return registry, report


def write_registry(registry: Sequence[CpmSeries], path) -> None:
    """Write a registry in the canonical schema; floats use ``repr`` so reading back is exact."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for series in registry:
            dev = "" if series.development_auc is None else repr(series.development_auc)
            for s in series.studies:
                w.writerow([series.cpm_label, s.study_label, s.sequence_index,
                            repr(s.auc_hat), repr(s.se), dev])


def write_truth(truth: Sequence[CpmTruth], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cpm_id", "auc_i", "tau_i", "sequence_index", "auc_ij"])
        for t in truth:
            for j, a in enumerate(t.study_aucs):
                w.writerow([t.cpm_label, repr(t.auc), repr(t.tau), j, repr(a)])
