"""Per-segment confusion matrices, F1, FP/FN rate grids and representative errors."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from seglens.attribution import AttributionRecord, Prediction
from seglens.errors import ConfigError, DataError, UndefinedMetric
from seglens.segmentation import SegmentAssignment

FP, FN = "FP", "FN"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


def _pred_of(p) -> int:
    return p.pred if isinstance(p, Prediction) else int(p)


def confusion_matrix(
    labels: Mapping[str, int],
    predictions: Mapping[str, Prediction | int],
    ids: Iterable[str] | None = None,
) -> ConfusionMatrix:
    """Class 1 is the positive class. ``ids`` limits the scope (default: all labels)."""
    tp = fp = tn = fn = 0
    for mid in labels if ids is None else ids:
        if mid not in predictions:
            raise DataError(f"missing prediction for id {mid!r}")
        y, p = labels[mid], _pred_of(predictions[mid])
        if y == 1:
            tp += p == 1
            fn += p == 0
        else:
            fp += p == 1
            tn += p == 0
    return ConfusionMatrix(tp, fp, tn, fn)


def f1_score(cm: ConfusionMatrix) -> float:
    if cm.tp + cm.fp == 0 or cm.tp + cm.fn == 0:
        raise UndefinedMetric("undefined F1: no predicted or no actual positives")
    return 2 * cm.tp / (2 * cm.tp + cm.fp + cm.fn)


def f1_or_none(cm: ConfusionMatrix) -> float | None:
    try:
        return f1_score(cm)
    except UndefinedMetric:
        return None


def confusion_by_segment(
    labels: Mapping[str, int],
    predictions: Mapping[str, Prediction | int],
    assignment: SegmentAssignment,
) -> dict[str, ConfusionMatrix]:
    """``full_data`` plus one matrix per segment, in segment order."""
    out = {"full_data": confusion_matrix(labels, predictions, assignment.labels)}
    for seg, ids in assignment.groups().items():
        out[seg] = confusion_matrix(labels, predictions, ids)
    return out


@dataclass(frozen=True)
class ErrorCell:
    error_kind: str
    row_segment: str
    col_segment: str
    count: int
    denominator: int
    rate: float | None  # None when the denominator is zero
    mark: str = ""  # "min" / "max" within its row, for report colouring


@dataclass(frozen=True)
class ErrorTable:
    row_order: tuple[str, ...]
    col_order: tuple[str, ...]
    cells: tuple[ErrorCell, ...]
    row_totals: Mapping[tuple[str, str], int]  # (kind, row) -> N of errors
    denominator: str = "class"

    def cell(self, kind: str, row: str, col: str) -> ErrorCell:
        for c in self.cells:
            if (c.error_kind, c.row_segment, c.col_segment) == (kind, row, col):
                return c
        raise KeyError((kind, row, col))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["error_kind", "row_segment", "col_segment", "count", "denominator", "rate", "mark"])
        for c in self.cells:
            w.writerow([c.error_kind, c.row_segment, c.col_segment, c.count, c.denominator,
                        "n/a" if c.rate is None else f"{c.rate:.6f}", c.mark])
        return buf.getvalue()


def error_rate_table(
    labels: Mapping[str, int],
    predictions: Mapping[str, Prediction | int],
    row_scheme: SegmentAssignment,
    col_scheme: SegmentAssignment,
    denominator: str = "class",
) -> ErrorTable:
    """FP/FN counts and rates for every (row segment, column segment) cell.

    With ``denominator="class"`` the FP rate divides by actual negatives in
    the cell and the FN rate by actual positives; ``"cell"`` divides both by
    the cell size.
    """
    if denominator not in ("class", "cell"):
        raise ConfigError(f"denominator must be 'class' or 'cell', got {denominator!r}")
    if set(row_scheme.labels) != set(col_scheme.labels):
        raise DataError("row and column schemes cover different messages")
    # (row, col) -> [fp, fn, negatives, positives]
    acc: dict[tuple[str, str], list[int]] = {
        (r, c): [0, 0, 0, 0] for r in row_scheme.segment_order for c in col_scheme.segment_order
    }
    for mid, row in row_scheme.labels.items():
        if mid not in predictions:
            raise DataError(f"missing prediction for id {mid!r}")
        a = acc[(row, col_scheme.labels[mid])]
        y, p = labels[mid], _pred_of(predictions[mid])
        if y == 1:
            a[3] += 1
            a[1] += p == 0
        else:
            a[2] += 1
            a[0] += p == 1
    cells: list[ErrorCell] = []
    totals: dict[tuple[str, str], int] = {}
    for kind, ci, di in ((FP, 0, 2), (FN, 1, 3)):
        for r in row_scheme.segment_order:
            row_cells = []
            for c in col_scheme.segment_order:
                a = acc[(r, c)]
                den = a[di] if denominator == "class" else a[2] + a[3]
                row_cells.append([kind, r, c, a[ci], den, a[ci] / den if den else None])
            totals[(kind, r)] = sum(x[3] for x in row_cells)
            rated = [x for x in row_cells if x[5] is not None]
            marks = {}
            if len(rated) > 1:
                lo = min(rated, key=lambda x: x[5])
                hi = max(rated, key=lambda x: x[5])
                if lo[5] != hi[5]:
                    marks = {id(lo): "min", id(hi): "max"}
            cells.extend(ErrorCell(*x, mark=marks.get(id(x), "")) for x in row_cells)
    return ErrorTable(tuple(row_scheme.segment_order), tuple(col_scheme.segment_order),
                      tuple(cells), totals, denominator)


@dataclass(frozen=True)
class RepresentativeExample:
    id: str
    actual: int
    predicted: int
    prob: float
    tokens: tuple[str, ...]
    scores: tuple[float, ...]
    segment: str

    def __post_init__(self):
        if self.actual == self.predicted:
            raise ValueError(f"{self.id}: not a misclassification")

    def to_dict(self) -> dict:
        return {"id": self.id, "actual": self.actual, "predicted": self.predicted,
                "prob": self.prob, "segment": self.segment,
                "tokens": list(self.tokens), "scores": list(self.scores)}


def select_representative_errors(
    labels: Mapping[str, int],
    predictions: Mapping[str, Prediction],
    attributions: Mapping[str, AttributionRecord],
    assignment: SegmentAssignment,
    n: int,
    kind: str,
) -> dict[str, list[RepresentativeExample]]:
    """Most confidently wrong errors of ``kind`` first (``|prob - 0.5|``), ties by id."""
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if kind not in (FP, FN):
        raise ConfigError(f"kind must be FP or FN, got {kind!r}")
    want_actual = 0 if kind == FP else 1
    out: dict[str, list[RepresentativeExample]] = {}
    for seg, ids in assignment.groups().items():
        errs = [mid for mid in ids
                if labels[mid] == want_actual and predictions[mid].pred != want_actual]
        errs.sort(key=lambda mid: (-abs(predictions[mid].prob - 0.5), mid))
        picked = []
        for mid in errs[:n]:
            rec = attributions.get(mid)
            toks, scs = (rec.tokens, rec.scores) if rec is not None else ((), ())
            picked.append(RepresentativeExample(mid, labels[mid], predictions[mid].pred,
                                                predictions[mid].prob, toks, scs, seg))
        out[seg] = picked
    return out


def cm_to_csv(matrices: Mapping[str, ConfusionMatrix]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["segment", "tp", "fp", "tn", "fn", "f1"])
    for seg, cm in matrices.items():
        f1 = f1_or_none(cm)
        w.writerow([seg, cm.tp, cm.fp, cm.tn, cm.fn, "n/a" if f1 is None else f"{f1:.4f}"])
    return buf.getvalue()
