"""Annotate ranked tokens by meaning, sentiment and part of speech, and scan for gender bias."""

from __future__ import annotations

import csv
import io
import logging
from bisect import bisect_left
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from seglens.embeddings import AnchorSet, EmbeddingTable, anchor_similarity
from seglens.errors import ConfigError, OutOfVocabulary

logger = logging.getLogger(__name__)

POSITIVE, NEGATIVE, UNMATCHED = "positive", "negative", "unmatched"
NO_EMBEDDING = "no-embedding"

DEFAULT_POS_GROUPS: dict[str, str] = {
    "Adjective": "adjective_family",
    "Comparative adjective": "adjective_family",
    "Superlative adjective": "adjective_family",
    "Adverb": "adverb",
    "Determiner": "verb_family",
    "Interjection": "verb_family",
    "Past participle": "verb_family",
    "Past tense verb": "verb_family",
    "Present tense verb": "verb_family",
    "Verb": "verb_family",
    "Verb gerund": "verb_family",
    "Plural noun": "plural_noun",
    "Noun": "noun",
}
POS_GROUP_ORDER = ("adjective_family", "adverb", "verb_family", "plural_noun", "noun")

DEFAULT_BUCKET_EDGES = (0.05, 0.10, 0.20)


def _bundled(name: str) -> Path:
    return Path(str(resources.files("seglens.data").joinpath(name)))


def load_word_list(path: str | Path) -> frozenset[str]:
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            w = line.strip().lower()
            if w and not w.startswith("#"):
                words.add(w)
    return frozenset(words)


@dataclass(frozen=True)
class SentimentLexicon:
    positive: frozenset[str]
    negative: frozenset[str]

    def __post_init__(self):
        overlap = self.positive & self.negative
        if overlap:
            raise ConfigError(f"words in both positive and negative lists: {', '.join(sorted(overlap))}")


def load_sentiment_lexicon(pos_path: str | Path | None = None,
                           neg_path: str | Path | None = None) -> SentimentLexicon:
    """Binary opinion lexicon; ``None`` paths fall back to the bundled lists."""
    pos = load_word_list(pos_path or _bundled("sentiment_positive.txt"))
    neg = load_word_list(neg_path or _bundled("sentiment_negative.txt"))
    return SentimentLexicon(pos, neg)


def sentiment_tag(token: str, lexicon: SentimentLexicon) -> str:
    if token in lexicon.negative:
        return NEGATIVE
    if token in lexicon.positive:
        return POSITIVE
    return UNMATCHED


@dataclass(frozen=True)
class PosLexicon:
    tag_of: Mapping[str, str]
    group_of: Mapping[str, str]

    def __post_init__(self):
        orphans = sorted(set(self.tag_of.values()) - set(self.group_of))
        if orphans:
            raise ConfigError(f"POS tags with no group mapping: {', '.join(orphans)}")

    def tag(self, token: str) -> str:
        return self.tag_of.get(token, UNMATCHED)

    def group(self, token: str) -> str:
        tag = self.tag_of.get(token)
        return UNMATCHED if tag is None else self.group_of[tag]


def load_pos_lexicon(path: str | Path | None = None,
                     group_of: Mapping[str, str] | None = None) -> PosLexicon:
    """TSV ``token<TAB>tag`` lines; ``None`` loads the bundled map."""
    path = path or _bundled("pos_lexicon.tsv")
    tags: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            token, sep, tag = line.partition("\t")
            if not sep or not tag.strip():
                raise ConfigError(f"{path}:{lineno}: expected 'token<TAB>tag'", path)
            tags[token.strip().lower()] = tag.strip()
    return PosLexicon(tags, dict(DEFAULT_POS_GROUPS if group_of is None else group_of))


@dataclass(frozen=True)
class MeaningAnnotation:
    token: str
    difference: float | None
    bucket: int | None
    direction: int  # sign of difference, 0 when unknown
    note: str = ""


def meaning_bucket(difference: float, edges: Sequence[float] = DEFAULT_BUCKET_EDGES) -> int:
    """1 + number of edges strictly below ``|difference|``."""
    return 1 + bisect_left(list(edges), abs(difference))


def meaning_annotate(
    tokens: Iterable[str],
    pos_anchors: AnchorSet,
    neg_anchors: AnchorSet,
    table: EmbeddingTable,
    bucket_edges: Sequence[float] = DEFAULT_BUCKET_EDGES,
) -> list[MeaningAnnotation]:
    edges = list(bucket_edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ConfigError(f"bucket edges must be ascending: {edges}")
    pos_anchors = pos_anchors.resolve(table)
    neg_anchors = neg_anchors.resolve(table)
    out = []
    for tok in tokens:
        try:
            d = anchor_similarity(tok, pos_anchors, table) - anchor_similarity(tok, neg_anchors, table)
        except OutOfVocabulary:
            out.append(MeaningAnnotation(tok, None, None, 0, NO_EMBEDDING))
            continue
        out.append(MeaningAnnotation(tok, d, meaning_bucket(d, edges), (d > 0) - (d < 0)))
    return out


@dataclass(frozen=True)
class BiasRow:
    token: str
    rank: int
    sim_a: float
    sim_b: float
    difference: float
    flag: str  # none | significant | strong
    direction: str  # toward_a | toward_b | none


def bias_flag(difference: float, significant: float = 0.1, strong: float = 0.2) -> str:
    mag = abs(difference)
    if mag > strong:
        return "strong"
    if mag > significant:
        return "significant"
    return "none"


def gender_bias_scan(
    tokens: Iterable[str | tuple[int, str]],
    table: EmbeddingTable,
    male: AnchorSet,
    female: AnchorSet,
    significant: float = 0.1,
    strong: float = 0.2,
) -> list[BiasRow]:
    """One row per in-vocabulary token, sorted by (rank, token).

    Plain strings take their list position as rank; ``(rank, token)`` pairs
    keep the given rank, which makes the result independent of input order.
    ``difference > 0`` means closer to the first anchor set (``male``).
    """
    if not 0 < significant < strong:
        raise ConfigError("bias thresholds must satisfy 0 < significant < strong")
    male, female = male.resolve(table), female.resolve(table)
    rows = []
    for pos, item in enumerate(tokens):
        rank, tok = item if isinstance(item, tuple) else (pos, item)
        if tok not in table:
            continue
        a = anchor_similarity(tok, male, table)
        b = anchor_similarity(tok, female, table)
        d = a - b
        direction = "toward_a" if d > 0 else "toward_b" if d < 0 else "none"
        rows.append(BiasRow(tok, rank, a, b, d, bias_flag(d, significant, strong), direction))
    rows.sort(key=lambda r: (r.rank, r.token))
    return rows


def flagged(rows: Iterable[BiasRow]) -> list[BiasRow]:
    return [r for r in rows if r.flag != "none"]


def bias_rows_to_csv(rows: Iterable[BiasRow], segment: str = "", direction: str = "") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["segment", "direction", "token", "rank", "sim_male", "sim_female", "difference", "flag"])
    for r in rows:
        w.writerow([segment, direction, r.token, r.rank, f"{r.sim_a:.6f}", f"{r.sim_b:.6f}",
                    f"{r.difference:.6f}", r.flag])
    return buf.getvalue()
