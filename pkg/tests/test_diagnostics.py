import csv
import io

import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import expand_cells
from reference import CONFUSION_CELLS

from seglens.attribution import AttributionRecord, Prediction
from seglens.diagnostics import (
    FN,
    FP,
    ConfusionMatrix,
    RepresentativeExample,
    cm_to_csv,
    confusion_by_segment,
    confusion_matrix,
    error_rate_table,
    f1_or_none,
    f1_score,
    select_representative_errors,
)
from seglens.errors import ConfigError, DataError, UndefinedMetric
from seglens.segmentation import SegmentAssignment


def _assign(name, labels):
    return SegmentAssignment(name, labels, tuple(dict.fromkeys(labels.values())))


def test_all_data_cells():
    labels, preds, _, _ = expand_cells({"all": CONFUSION_CELLS["all"]})
    cm = confusion_matrix(labels, preds)
    assert (cm.tp, cm.fp, cm.fn, cm.tn) == (3343, 195, 177, 3285)


def test_confusion_simple_cases():
    assert confusion_matrix({"a": 1, "b": 0}, {"a": 1, "b": 0}) == ConfusionMatrix(1, 0, 1, 0)
    assert confusion_matrix({"a": 1}, {"a": 1}, ids=[]) == ConfusionMatrix()
    with pytest.raises(DataError, match="b"):
        confusion_matrix({"a": 1, "b": 0}, {"a": 1})


def test_prediction_records_accepted():
    cm = confusion_matrix({"a": 1}, {"a": Prediction("a", 0.3, 1)})
    assert cm.tp == 1  # the record's own pred wins over its prob


def test_f1_examples():
    # 2*3343 / (2*3343 + 195 + 177); the printed table rounds this to 0.95
    assert f1_score(ConfusionMatrix(3343, 195, 3285, 177)) == pytest.approx(0.9473, abs=5e-5)
    assert f1_score(ConfusionMatrix(10, 0, 10, 0)) == 1.0
    assert f1_score(ConfusionMatrix(0, 3, 5, 2)) == 0.0


@pytest.mark.parametrize("cm", [ConfusionMatrix(0, 0, 5, 3), ConfusionMatrix(0, 2, 5, 0), ConfusionMatrix()])
def test_f1_undefined(cm):
    with pytest.raises(UndefinedMetric, match="undefined F1"):
        f1_score(cm)
    assert f1_or_none(cm) is None


@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_f1_bounded_and_tp_monotone(tp, fp, tn, fn):
    cm = ConfusionMatrix(tp, fp, tn, fn)
    f = f1_or_none(cm)
    if f is not None:
        assert 0.0 <= f <= 1.0
        assert f1_score(ConfusionMatrix(tp + 1, fp, tn, fn)) >= f


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.sampled_from("ABC")), max_size=60))
def test_segments_sum_to_full_data(rows):
    labels = {f"m{i}": y for i, (y, _, _) in enumerate(rows)}
    preds = {f"m{i}": p for i, (_, p, _) in enumerate(rows)}
    seg = _assign("s", {f"m{i}": s for i, (_, _, s) in enumerate(rows)})
    by = confusion_by_segment(labels, preds, seg)
    total = sum((cm for name, cm in by.items() if name != "full_data"), ConfusionMatrix())
    assert total == by["full_data"]
    assert by["full_data"].total == len(rows)


def test_cm_csv():
    text = cm_to_csv({"full_data": ConfusionMatrix(1, 0, 1, 0), "x": ConfusionMatrix(0, 0, 1, 0)})
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["segment", "tp", "fp", "tn", "fn", "f1"]
    assert rows[1][-1] == "1.0000" and rows[2][-1] == "n/a"


# -------------------------------------------------------------- error grid

def _grid_inputs():
    labels = {"a": 0, "b": 0, "c": 1, "d": 1, "e": 1, "f": 0}
    preds = {"a": 1, "b": 0, "c": 0, "d": 1, "e": 1, "f": 0}
    rows = _assign("topic", {"a": "T1", "b": "T1", "c": "T1", "d": "T1", "e": "T2", "f": "T2"})
    cols = SegmentAssignment("length", {"a": "short", "b": "long", "c": "short", "d": "long",
                                        "e": "short", "f": "long"}, ("short", "long"))
    return labels, preds, rows, cols


def test_error_rates_class_denominators():
    labels, preds, rows, cols = _grid_inputs()
    g = error_rate_table(labels, preds, rows, cols)
    c = g.cell(FP, "T1", "short")
    assert (c.count, c.denominator, c.rate) == (1, 1, 1.0)
    c = g.cell(FN, "T1", "short")
    assert (c.count, c.denominator, c.rate) == (1, 1, 1.0)
    assert g.cell(FP, "T2", "short").rate is None  # no actual negatives there
    assert g.row_totals[(FP, "T1")] == 1 and g.row_totals[(FN, "T1")] == 1
    assert g.row_totals[(FN, "T2")] == 0


def test_error_rates_cell_denominators():
    labels, preds, rows, cols = _grid_inputs()
    g = error_rate_table(labels, preds, rows, cols, denominator="cell")
    c = g.cell(FP, "T1", "short")
    assert (c.count, c.denominator, c.rate) == (1, 2, 0.5)
    with pytest.raises(ConfigError):
        error_rate_table(labels, preds, rows, cols, denominator="other")


def test_single_cell_grid_is_overall_rate():
    labels = {"a": 0, "b": 0, "c": 0, "d": 1}
    preds = {"a": 1, "b": 0, "c": 0, "d": 1}
    one = _assign("s", {m: "all" for m in labels})
    g = error_rate_table(labels, preds, one, one)
    assert g.cell(FP, "all", "all").rate == pytest.approx(1 / 3)
    assert g.cell(FN, "all", "all").rate == 0.0


def test_min_max_marks_and_csv():
    labels, preds, rows, cols = _grid_inputs()
    g = error_rate_table(labels, preds, rows, cols)
    assert g.cell(FP, "T1", "short").mark == "max" and g.cell(FP, "T1", "long").mark == "min"
    text = g.to_csv()
    assert text.splitlines()[0] == "error_kind,row_segment,col_segment,count,denominator,rate,mark"
    assert "FP,T2,short,0,0,n/a," in text


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1), st.sampled_from("AB"), st.sampled_from("xyz")),
                min_size=1, max_size=60))
def test_cross_tab_rows_sum_to_totals(rows):
    labels = {f"m{i}": r[0] for i, r in enumerate(rows)}
    preds = {f"m{i}": r[1] for i, r in enumerate(rows)}
    rs = _assign("r", {f"m{i}": r[2] for i, r in enumerate(rows)})
    cs = _assign("c", {f"m{i}": r[3] for i, r in enumerate(rows)})
    g = error_rate_table(labels, preds, rs, cs)
    by = confusion_by_segment(labels, preds, rs)
    for row in rs.segment_order:
        fp = sum(g.cell(FP, row, col).count for col in cs.segment_order)
        fn = sum(g.cell(FN, row, col).count for col in cs.segment_order)
        assert fp == g.row_totals[(FP, row)] == by[row].fp
        assert fn == g.row_totals[(FN, row)] == by[row].fn
        for c in g.cells:
            assert c.count <= c.denominator


# ------------------------------------------------------ representative errors

def _err_inputs():
    labels = {"a": 0, "b": 0, "c": 0, "d": 1, "e": 0}
    probs = {"a": 0.52, "b": 0.93, "c": 0.2, "d": 0.1, "e": 0.93}
    preds = {m: Prediction(m, p, int(p >= 0.5)) for m, p in probs.items()}
    attrs = {m: AttributionRecord(m, ("tok",), (p - 0.5,), p) for m, p in probs.items()}
    seg = _assign("s", {"a": "S", "b": "S", "c": "S", "d": "S", "e": "S"})
    return labels, preds, attrs, seg


def test_representative_order_and_n():
    labels, preds, attrs, seg = _err_inputs()
    fps = select_representative_errors(labels, preds, attrs, seg, 5, FP)["S"]
    assert [e.id for e in fps] == ["b", "e", "a"]  # 0.93 (tie broken by id), then 0.52
    one = select_representative_errors(labels, preds, attrs, seg, 1, FP)["S"]
    assert [e.id for e in one] == ["b"]
    fns = select_representative_errors(labels, preds, attrs, seg, 3, FN)["S"]
    assert [e.id for e in fns] == ["d"] and fns[0].tokens == ("tok",)


def test_representative_empty_and_validation():
    labels, preds, attrs, seg = _err_inputs()
    labels = {m: preds[m].pred for m in labels}
    assert select_representative_errors(labels, preds, attrs, seg, 2, FP) == {"S": []}
    with pytest.raises(ConfigError):
        select_representative_errors(labels, preds, attrs, seg, 0, FP)
    with pytest.raises(ValueError):
        RepresentativeExample("x", 1, 1, 0.9, (), (), "S")
