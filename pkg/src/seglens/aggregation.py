"""Aggregate per-token attributions into per-segment importance tables."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from seglens.attribution import AttributionRecord
from seglens.errors import ConfigError, DataError
from seglens.segmentation import SegmentAssignment

FULL_DATA = "full_data"
CLASS1 = "class1"
CLASS0 = "class0"
CSV_COLUMNS = ("segment", "direction", "rank", "token", "total_relevance", "mean_relevance", "doc_frequency")


@dataclass(frozen=True)
class TokenRow:
    token: str
    total_relevance: float
    mean_relevance: float
    doc_frequency: int
    rank: int


@dataclass(frozen=True)
class TokenImportanceTable:
    segment: str
    direction: str
    rows: tuple[TokenRow, ...]
    threshold: int = 1
    rank_by: str = "mean"

    def tokens(self) -> list[str]:
        return [r.token for r in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def frequency_threshold(min_freq_fraction: float, n_messages: int) -> int:
    """``max(1, ceil(fraction * n))``, computed on the decimal value of the fraction.

    Going through the decimal string avoids float artifacts such as
    ``0.0001 * 30000 == 3.0000000000000004``.
    """
    if not 0.0 <= min_freq_fraction < 1.0:
        raise ConfigError(f"min_freq_fraction must be in [0, 1), got {min_freq_fraction}")
    return max(1, math.ceil(Fraction(repr(float(min_freq_fraction))) * n_messages))


def _rank_key(rank_by: str):
    if rank_by == "mean":
        return lambda r: (-abs(r[2]), r[0])
    if rank_by == "total":
        return lambda r: (-abs(r[1]), r[0])
    raise ConfigError(f"rank_by must be 'mean' or 'total', got {rank_by!r}")


def _segment_tables(
    segment: str,
    records: Sequence[AttributionRecord],
    min_freq_fraction: float,
    rank_by: str,
) -> tuple[TokenImportanceTable, TokenImportanceTable]:
    scores: dict[str, list[float]] = defaultdict(list)
    df: dict[str, int] = defaultdict(int)
    for rec in records:
        for tok, s in zip(rec.tokens, rec.scores):
            scores[tok].append(s)
        for tok in set(rec.tokens):
            df[tok] += 1
    threshold = frequency_threshold(min_freq_fraction, len(records))
    pos, neg = [], []
    for tok, vals in scores.items():
        if df[tok] < threshold:
            continue
        total = math.fsum(vals)
        row = (tok, total, total / df[tok], df[tok])
        if total > 0:
            pos.append(row)
        elif total < 0:
            neg.append(row)
    key = _rank_key(rank_by)
    out = []
    for direction, rows in ((CLASS1, pos), (CLASS0, neg)):
        rows.sort(key=key)
        out.append(
            TokenImportanceTable(
                segment,
                direction,
                tuple(TokenRow(t, tot, mean, d, i) for i, (t, tot, mean, d) in enumerate(rows)),
                threshold,
                rank_by,
            )
        )
    return out[0], out[1]


def aggregate_token_importance(
    attributions: Mapping[str, AttributionRecord],
    assignment: SegmentAssignment,
    min_freq_fraction: float = 0.0001,
    rank_by: str = "mean",
    ids: Iterable[str] | None = None,
) -> dict[str, tuple[TokenImportanceTable, TokenImportanceTable]]:
    """Build ``segment -> (class1 table, class0 table)``, ``full_data`` first.

    ``ids`` restricts aggregation to a subset of messages (for example only
    label-1 messages); by default every message in ``assignment`` is used.
    The frequency threshold is computed separately for each segment from
    its own message count.
    """
    wanted = list(assignment.labels) if ids is None else [i for i in ids]
    wanted_set = set(wanted)
    missing = [mid for mid in wanted if mid not in attributions]
    if missing:
        raise DataError(f"{len(missing)} message(s) have no attribution, e.g. {missing[0]!r}")
    by_segment: dict[str, list[AttributionRecord]] = {lab: [] for lab in assignment.segment_order}
    for mid, lab in assignment.labels.items():
        if mid in wanted_set:
            by_segment[lab].append(attributions[mid])
    result = {FULL_DATA: _segment_tables(FULL_DATA, [attributions[m] for m in assignment.labels
                                                     if m in wanted_set], min_freq_fraction, rank_by)}
    for lab in assignment.segment_order:
        result[lab] = _segment_tables(lab, by_segment[lab], min_freq_fraction, rank_by)
    return result


def top_k(table: TokenImportanceTable, k: int) -> list[str]:
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    return [r.token for r in table.rows[:k]]


def unique_top_tokens(
    tables: Mapping[str, TokenImportanceTable], k: int
) -> dict[str, list[tuple[int, str]]]:
    """Per segment, top-k tokens that appear in no other segment's top-k."""
    if len(tables) < 2:
        raise ConfigError("unique tokens need at least two segments")
    tops = {seg: top_k(t, k) for seg, t in tables.items()}
    out = {}
    for seg, toks in tops.items():
        others = set().union(*(set(v) for s, v in tops.items() if s != seg))
        out[seg] = [(rank, tok) for rank, tok in enumerate(toks) if tok not in others]
    return out


def fmt_value(x: float) -> str:
    return f"{x:.6f}"


def tables_to_csv(tables: Iterable[TokenImportanceTable]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for t in tables:
        for r in t.rows:
            w.writerow([t.segment, t.direction, r.rank, r.token, fmt_value(r.total_relevance),
                        fmt_value(r.mean_relevance), r.doc_frequency])
    return buf.getvalue()
