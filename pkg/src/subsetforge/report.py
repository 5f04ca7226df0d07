"""Render wrapper tables and figure data series."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .learners import ALL_KINDS, get_learner
from .selection import ProtocolReport, RankedFeatures, SweepRow

TABLE_ROWS = ("Accuracy", "Precision", "Recall", "F1 Score", "FAR", "AUC", "Feature Size", "Feature Subset")
_METRIC_OF_ROW = {"Accuracy": "accuracy", "Precision": "precision", "Recall": "recall", "F1 Score": "f1",
                  "FAR": "far", "AUC": "auc"}
DISPLAY_NAMES = {"GBT": "XGBoost"}
COLUMN_KINDS = tuple(k.value for k in ALL_KINDS)


class ReportError(ValueError):
    pass


def fmt3(x) -> str:
    """Three decimals, rounding half away from zero on the decimal value as written."""
    if x is None:
        return "NA"
    return str(Decimal(repr(float(x))).quantize(Decimal("0.001"), rounding=ROUND_HALF_UP))


def display_name(kind: str) -> str:
    return DISPLAY_NAMES.get(kind, kind)


@dataclass(frozen=True)
class ReportTable:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...]  # cells[row][column]

    def cell(self, row: str, column: str) -> str:
        return self.cells[self.rows.index(row)][self.columns.index(column)]

    def to_markdown(self) -> str:
        header = ("",) + self.columns
        body = [(r,) + c for r, c in zip(self.rows, self.cells)]
        widths = [max(len(line[j]) for line in [header] + body) for j in range(len(header))]

        def line(vals):
            return "| " + " | ".join(v.ljust(w) for v, w in zip(vals, widths)) + " |"

        sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
        return "\n".join([line(header), sep] + [line(b) for b in body]) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([""] + list(self.columns))
        for r, c in zip(self.rows, self.cells):
            w.writerow([r] + list(c))
        return buf.getvalue()


def emit_wrapper_table(reports: Sequence[ProtocolReport], kinds: Sequence[str] = COLUMN_KINDS) -> ReportTable:
    """One column per learner kind in fixed order, rows as in the published tables."""
    by_kind: dict[str, ProtocolReport] = {}
    for r in reports:
        k = get_learner(r.kind).name
        if k in by_kind:
            raise ReportError(f"duplicate report for {display_name(k)}")
        by_kind[k] = r
    missing = [display_name(k) for k in kinds if k not in by_kind]
    if missing:
        raise ReportError(f"missing reports for: {', '.join(missing)}")
    extra = sorted(set(by_kind) - set(kinds))
    if extra:
        raise ReportError(f"unexpected reports for: {', '.join(extra)}")
    settings = {(r.method, r.tolerance_or_k) for r in by_kind.values()}
    if len(settings) > 1:
        raise ReportError("reports mix selection methods or settings")

    cells = []
    for row in TABLE_ROWS:
        out = []
        for k in kinds:
            r = by_kind[k]
            if row in _METRIC_OF_ROW:
                out.append(fmt3(getattr(r.test_metrics, _METRIC_OF_ROW[row])))
            elif row == "Feature Size":
                out.append(str(len(r.subset)))
            else:
                out.append(", ".join(r.subset))
        cells.append(tuple(out))
    return ReportTable(TABLE_ROWS, tuple(display_name(k) for k in kinds), tuple(cells))


def emit_ranking_series(ranked: RankedFeatures) -> str:
    """CSV of rank, feature name and signed rho (four decimals)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "feature", "rho", "abs_rho"])
    for i, (name, rho) in enumerate(ranked, start=1):
        w.writerow([i, name, f"{rho:.4f}", f"{abs(rho):.4f}"])
    return buf.getvalue()


SWEEP_SERIES = ("accuracy", "recall", "f1", "auc", "far")


def emit_sweep_series(rows: Sequence[SweepRow]) -> str:
    """CSV with one line per feature count; FAR is flagged for the right axis."""
    if not rows:
        raise ReportError("no sweep rows")
    counts = [r.feature_count for r in rows]
    for prev, cur in zip(counts, counts[1:]):
        if cur != prev + 1:
            raise ReportError(f"sweep rows are not consecutive: gap at {prev + 1}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature_count", "added_feature", "accuracy", "recall", "f1", "auc", "far", "far_right_axis"])
    prev_feats: set = set()
    for r in rows:
        added = sorted(set(r.features) - prev_feats)
        prev_feats = set(r.features)
        a = r.averages
        w.writerow([r.feature_count, ";".join(added)] + [repr(float(a[m])) if a[m] is not None else "NA"
                                                         for m in SWEEP_SERIES] + ["1"])
    return buf.getvalue()
