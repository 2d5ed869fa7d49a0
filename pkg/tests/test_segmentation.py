import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seglens.corpus import Message, TokenizedMessage
from seglens.errors import ConfigError, DataError
from seglens.segmentation import (
    LdaModel,
    SegmentAssignment,
    interval_labels,
    lda_fit,
    lda_hard_assign,
    oov_fraction,
    purity,
    segment_by_length,
    segment_by_metadata,
    segment_by_oov,
)
from seglens.synthetic import disjoint_topic_corpus


def _msgs(topics):
    return [Message(str(i), "", 0, {} if t is None else {"topic": t}) for i, t in enumerate(topics)]


def _tok(lengths):
    return [TokenizedMessage(f"m{i}", tuple(["w"] * n)) for i, n in enumerate(lengths)]


def test_metadata_segments_in_first_appearance_order():
    a = segment_by_metadata(_msgs(["Restaurant", "Hotel", "Restaurant", "Beauty"]), "topic")
    assert a.segment_order == ("Restaurant", "Hotel", "Beauty")
    assert a.sizes() == {"Restaurant": 2, "Hotel": 1, "Beauty": 1}


def test_metadata_single_value_and_missing_field():
    assert segment_by_metadata(_msgs(["x", "x"]), "topic").segment_order == ("x",)
    a = segment_by_metadata(_msgs(["x", None]), "topic")
    assert a.labels["1"] == "unknown"


def test_length_examples():
    a = segment_by_length(_tok([19, 20, 0, 50, 79, 80, 500]))
    assert a.segment_order == ("len<20", "20<=len<50", "50<=len<80", "80<=len")
    assert [a.labels[f"m{i}"] for i in range(7)] == [
        "len<20", "20<=len<50", "len<20", "50<=len<80", "50<=len<80", "80<=len", "80<=len"]


@pytest.mark.parametrize("bounds", [[50, 20], [20, 20], [3, 2, 5]])
def test_length_boundaries_must_ascend(bounds):
    with pytest.raises(ConfigError):
        segment_by_length(_tok([1]), bounds)


def test_oov_fraction_examples():
    assert oov_fraction(["a", "zzz"], {"a"}) == 0.5
    assert oov_fraction([], {"a"}) == 0.0
    assert oov_fraction(["a", "a"], {"a"}) == 0.0


def test_oov_segments():
    docs = [TokenizedMessage("p6", ("x", "x", "x", "a", "a")),  # 0.6
            TokenizedMessage("p0", ("a",)),
            TokenizedMessage("p5", ("a", "x"))]
    a = segment_by_oov(docs, {"a"})
    assert a.segment_order == ("Non OOV", "OOV")
    assert a.labels == {"p6": "OOV", "p0": "Non OOV", "p5": "OOV"}


@pytest.mark.parametrize("bounds", [[0.0], [1.0], [0.6, 0.3]])
def test_oov_boundaries_checked(bounds):
    with pytest.raises(ConfigError):
        segment_by_oov(_tok([1]), {"w"}, bounds)


def test_assignment_invariants_and_csv_roundtrip():
    with pytest.raises(ValueError):
        SegmentAssignment("s", {"a": "x"}, ("y",))
    a = segment_by_length(_tok([1, 30, 90]))
    b = SegmentAssignment.from_csv(a.to_csv(), "length")
    assert b.labels == a.labels
    assert a.to_csv().splitlines()[0] == "id,segment"


# -------------------------------------------------------------- properties

@given(st.lists(st.integers(0, 200), min_size=1, max_size=4, unique=True).map(sorted),
       st.lists(st.integers(0, 300), max_size=30))
def test_length_intervals_exhaustive_and_disjoint(bounds, lengths):
    labels = interval_labels(bounds, "len")
    a = segment_by_length(_tok(lengths), bounds)
    for i, n in enumerate(lengths):
        hits = [k for k in range(len(labels))
                if (k == 0 or bounds[k - 1] <= n) and (k == len(bounds) or n < bounds[k])]
        assert len(hits) == 1
        assert a.labels[f"m{i}"] == labels[hits[0]]
    assert sum(a.sizes().values()) == len(lengths)


@given(st.lists(st.sampled_from("abcxyz"), max_size=20), st.sets(st.sampled_from("abcxyz")))
def test_oov_fraction_in_unit_interval(tokens, vocab):
    assert 0.0 <= oov_fraction(tokens, vocab) <= 1.0


@given(st.lists(st.tuples(st.sampled_from(["A", "B", "C", None]), st.integers(0, 120)), max_size=40))
def test_every_scheme_partitions_the_corpus(rows):
    msgs = [Message(f"m{i}", "", 0, {} if t is None else {"topic": t}) for i, (t, _) in enumerate(rows)]
    toks = [TokenizedMessage(f"m{i}", tuple(["a", "q"] * (n // 2))) for i, (_, n) in enumerate(rows)]
    for a in (segment_by_metadata(msgs, "topic"), segment_by_length(toks), segment_by_oov(toks, {"a"})):
        assert sum(a.sizes().values()) == len(rows)
        assert set(a.labels) == {f"m{i}" for i in range(len(rows))}


# -------------------------------------------------------------------- LDA

def test_lda_argument_errors():
    with pytest.raises(ConfigError):
        lda_fit(_tok([3]), K=1)
    with pytest.raises(DataError):
        lda_fit([], K=2)


def test_lda_counts_conserved_after_every_sweep():
    docs, _ = disjoint_topic_corpus(n_docs=40, seed=3)
    lengths = [d.length for d in docs]
    seen = []

    def check(it, model):
        model.check_invariants(lengths)
        seen.append(it)

    lda_fit(docs, K=3, iterations=25, seed=1, on_sweep=check)
    assert seen == list(range(25))


def test_lda_repeated_message_invariants():
    docs = [TokenizedMessage("a", ("x", "y", "x"))]
    m = lda_fit(docs, K=2, iterations=10, seed=0, on_sweep=lambda it, mm: mm.check_invariants([3]))
    assert m.doc_topic_counts.sum() == 3


def test_lda_with_empty_documents():
    docs = [TokenizedMessage("a", ()), TokenizedMessage("b", ("x", "y")), TokenizedMessage("c", ())]
    m = lda_fit(docs, K=2, iterations=5, seed=0)
    m.check_invariants([0, 2, 0])
    assert lda_hard_assign(m, docs).labels["a"] == "topic_0"


def test_lda_is_deterministic_per_seed():
    docs, _ = disjoint_topic_corpus(n_docs=30, seed=2)
    a = lda_fit(docs, K=3, iterations=20, seed=5)
    b = lda_fit(docs, K=3, iterations=20, seed=5)
    assert all(np.array_equal(x, y) for x, y in zip(a.token_assignments, b.token_assignments))
    c = lda_fit(docs, K=3, iterations=20, seed=6)
    assert not all(np.array_equal(x, y) for x, y in zip(a.token_assignments, c.token_assignments))


def test_jit_and_python_kernels_agree():
    docs, _ = disjoint_topic_corpus(n_docs=20, length_range=(5, 15), seed=4)
    a = lda_fit(docs, K=3, iterations=5, seed=9, jit=True)
    b = lda_fit(docs, K=3, iterations=5, seed=9, jit=False)
    assert np.array_equal(a.doc_topic_counts, b.doc_topic_counts)
    assert np.array_equal(a.topic_word_counts, b.topic_word_counts)


def _manual_model(doc_counts):
    dk = np.array(doc_counts, dtype=np.int64)
    K = dk.shape[1]
    return LdaModel(K, 1.0, 0.01, {"w": 0}, [f"d{i}" for i in range(len(dk))],
                    dk.sum(axis=0).reshape(K, 1), dk, [np.zeros(0, dtype=np.int64)] * len(dk))


def test_hard_assign_examples():
    a = lda_hard_assign(_manual_model([[5, 0, 0], [3, 3, 0], [0, 0, 0], [0, 1, 4]]))
    assert [a.labels[f"d{i}"] for i in range(4)] == ["topic_0", "topic_0", "topic_0", "topic_2"]
    assert a.segment_order == ("topic_0", "topic_1", "topic_2")


def test_hard_assign_rejects_foreign_corpus():
    m = _manual_model([[1, 0]])
    with pytest.raises(DataError):
        lda_hard_assign(m, [TokenizedMessage("other", ("w",))])


def test_lda_model_roundtrip(tmp_path):
    docs, _ = disjoint_topic_corpus(n_docs=12, seed=1)
    m = lda_fit(docs, K=2, iterations=3, seed=0)
    m2 = LdaModel.from_dict(m.to_dict())
    assert np.array_equal(m.topic_word_counts, m2.topic_word_counts)
    assert np.array_equal(m.doc_topic_counts, m2.doc_topic_counts)
    m2.check_invariants([d.length for d in docs])


def test_lda_recovers_disjoint_topics():
    docs, truth = disjoint_topic_corpus(n_docs=300, seed=0)
    m = lda_fit(docs, K=3, iterations=200, seed=0)
    assert purity(lda_hard_assign(m, docs), truth) >= 0.9
    tops = m.top_words(5)
    # each recovered topic draws its top words from a single true topic
    assert all(len({w.split("w")[0] for w in ws}) == 1 for ws in tops)
