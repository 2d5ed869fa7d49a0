import csv
import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_force_rows, small_corpora, threshold_of

from seglens.aggregation import (
    CLASS0,
    CLASS1,
    CSV_COLUMNS,
    FULL_DATA,
    aggregate_token_importance,
    frequency_threshold,
    tables_to_csv,
    top_k,
    unique_top_tokens,
)
from seglens.attribution import AttributionRecord
from seglens.errors import ConfigError, DataError
from seglens.segmentation import SegmentAssignment


def _rec(mid, pairs):
    return AttributionRecord(mid, tuple(t for t, _ in pairs), tuple(s for _, s in pairs), 0.5)


def _one_segment(records):
    return SegmentAssignment("all", {m: "S" for m in records}, ("S",))


def _toy():
    recs = {"m1": _rec("m1", [("bad", 2.0)]), "m2": _rec("m2", [("bad", 1.0), ("good", -3.0)])}
    return recs, aggregate_token_importance(recs, _one_segment(recs), min_freq_fraction=0.0)


def test_toy_example():
    _, res = _toy()
    assert list(res) == [FULL_DATA, "S"]
    c1, c0 = res["S"]
    assert (c1.direction, c0.direction) == (CLASS1, CLASS0)
    assert [(r.token, r.total_relevance, r.mean_relevance, r.doc_frequency) for r in c1.rows] == [
        ("bad", 3.0, 1.5, 2)]
    assert [(r.token, r.total_relevance) for r in c0.rows] == [("good", -3.0)]
    assert top_k(c1, 1) == ["bad"]


def test_zero_total_in_neither_table():
    recs = {"m": _rec("m", [("meh", 1.0), ("meh", -1.0), ("x", 0.5)])}
    c1, c0 = aggregate_token_importance(recs, _one_segment(recs), 0.0)["S"]
    assert "meh" not in c1.tokens() + c0.tokens()


@pytest.mark.parametrize("n,expected", [(0, 1), (1, 1), (5000, 1), (10000, 1), (10001, 2),
                                        (25000, 3), (30000, 3), (30001, 4)])
def test_frequency_threshold(n, expected):
    assert frequency_threshold(0.0001, n) == expected


def test_frequency_threshold_range():
    with pytest.raises(ConfigError):
        frequency_threshold(1.0, 10)
    with pytest.raises(ConfigError):
        frequency_threshold(-0.1, 10)


def test_threshold_is_per_segment():
    # 20 messages in A, 2 in B; fraction 0.1 -> thresholds 2 and 1
    recs = {f"a{i}": _rec(f"a{i}", [("x", 1.0)] + ([("rare", 1.0)] if i == 0 else [])) for i in range(20)}
    recs.update({f"b{i}": _rec(f"b{i}", [("rare", 1.0)]) for i in range(2)})
    seg = SegmentAssignment("s", {m: m[0].upper() for m in recs}, ("A", "B"))
    res = aggregate_token_importance(recs, seg, 0.1)
    assert res["A"][0].threshold == 2 and "rare" not in res["A"][0].tokens()
    assert res["B"][0].threshold == 1 and "rare" in res["B"][0].tokens()
    assert res[FULL_DATA][0].threshold == 3 and "rare" in res[FULL_DATA][0].tokens()


def test_top_k_bounds():
    _, res = _toy()
    assert top_k(res["S"][0], 50) == ["bad"]
    with pytest.raises(ConfigError):
        top_k(res["S"][0], 0)


def _table(tokens):
    recs = {f"m{i}": _rec(f"m{i}", [(t, 10.0 - i)]) for i, t in enumerate(tokens)}
    return aggregate_token_importance(recs, _one_segment(recs), 0.0)["S"][0]


def test_unique_examples():
    u = unique_top_tokens({"A": _table(["x", "y"]), "B": _table(["y", "z"])}, 2)
    assert u == {"A": [(0, "x")], "B": [(1, "z")]}
    same = unique_top_tokens({"A": _table(["x", "y"]), "B": _table(["x", "y"])}, 2)
    assert same == {"A": [], "B": []}
    three = unique_top_tokens({"A": _table(["p", "q", "r"]), "B": _table(["q", "p", "s"]),
                               "C": _table(["s", "r", "t"])}, 3)
    assert three == {"A": [], "B": [], "C": [(2, "t")]}
    with pytest.raises(ConfigError):
        unique_top_tokens({"A": _table(["x"])}, 2)


def test_missing_attribution_is_an_error():
    recs = {"m1": _rec("m1", [("x", 1.0)])}
    seg = SegmentAssignment("s", {"m1": "A", "m2": "A"}, ("A",))
    with pytest.raises(DataError, match="m2"):
        aggregate_token_importance(recs, seg, 0.0)


def test_id_filter():
    recs, _ = _toy()
    res = aggregate_token_importance(recs, _one_segment(recs), 0.0, ids=["m2"])
    assert res["S"][0].rows[0].total_relevance == 1.0


def test_rank_by_total():
    recs = {"m1": _rec("m1", [("freq", 1.0)]), "m2": _rec("m2", [("freq", 1.0)]),
            "m3": _rec("m3", [("freq", 1.0), ("once", 1.5)])}
    by_mean = aggregate_token_importance(recs, _one_segment(recs), 0.0, "mean")["S"][0]
    by_total = aggregate_token_importance(recs, _one_segment(recs), 0.0, "total")["S"][0]
    assert by_mean.tokens() == ["once", "freq"]
    assert by_total.tokens() == ["freq", "once"]


def test_ties_broken_by_token():
    recs = {"m": _rec("m", [("zeta", 1.0), ("alpha", 1.0), ("mid", 1.0)])}
    assert _one_table(recs).tokens() == ["alpha", "mid", "zeta"]


def _one_table(recs):
    return aggregate_token_importance(recs, _one_segment(recs), 0.0)["S"][0]


def test_csv_columns():
    _, res = _toy()
    text = tables_to_csv(t for pair in res.values() for t in pair)
    rows = list(csv.reader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[1] == ["full_data", "class1", "0", "bad", "3.000000", "1.500000", "2"]


# -------------------------------------------------------------- properties

@settings(max_examples=200)
@given(small_corpora(), st.sampled_from([0.0, 0.1, 0.25, 0.5]), st.sampled_from(["mean", "total"]))
def test_matches_brute_force(corpus, fraction, rank_by):
    records, seg = corpus
    res = aggregate_token_importance(records, seg, fraction, rank_by)
    groups = {FULL_DATA: list(seg.labels), **seg.groups()}
    assert list(res) == [FULL_DATA, *seg.segment_order]
    for name, ids in groups.items():
        pos, neg = brute_force_rows(records, ids, threshold_of(fraction, len(ids)), rank_by)
        got1, got0 = res[name]
        assert [(r.token, r.total_relevance, r.mean_relevance, r.doc_frequency) for r in got1.rows] == pos
        assert [(r.token, r.total_relevance, r.mean_relevance, r.doc_frequency) for r in got0.rows] == neg


@given(small_corpora())
def test_additivity_over_segments(corpus):
    records, seg = corpus
    res = aggregate_token_importance(records, seg, 0.0)

    def totals(pair):
        return {r.token: r.total_relevance for t in pair for r in t.rows}

    full = totals(res[FULL_DATA])
    summed: dict[str, float] = {}
    for s in seg.segment_order:
        for tok, v in totals(res[s]).items():
            summed[tok] = summed.get(tok, 0.0) + v
    # tokens summing to exactly zero drop out of both sides
    assert {t: v for t, v in summed.items() if v != 0} == full


@given(small_corpora(), st.floats(0, 0.9), st.floats(0, 0.9))
def test_raising_threshold_never_adds_rows(corpus, f1, f2):
    records, seg = corpus
    lo, hi = sorted((f1, f2))
    a = aggregate_token_importance(records, seg, lo)
    b = aggregate_token_importance(records, seg, hi)
    for name in a:
        for ta, tb in zip(a[name], b[name]):
            assert set(tb.tokens()) <= set(ta.tokens())


@given(small_corpora(), st.sampled_from([0.0, 0.2]), st.sampled_from(["mean", "total"]))
def test_table_invariants(corpus, fraction, rank_by):
    records, seg = corpus
    for c1, c0 in aggregate_token_importance(records, seg, fraction, rank_by).values():
        for t, sign in ((c1, 1), (c0, -1)):
            assert [r.rank for r in t.rows] == list(range(len(t.rows)))
            stat = [abs(r.mean_relevance if rank_by == "mean" else r.total_relevance) for r in t.rows]
            assert stat == sorted(stat, reverse=True)
            for r in t.rows:
                assert r.doc_frequency >= t.threshold
                assert r.total_relevance * sign > 0
