"""Partition messages into named segments.

Four schemes: a metadata field, token-length buckets, out-of-vocabulary
fraction buckets, and hard LDA topic assignment from a collapsed Gibbs
sampler.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from seglens.corpus import Message, TokenizedMessage
from seglens.errors import ConfigError, DataError

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

logger = logging.getLogger(__name__)

UNKNOWN = "unknown"


@dataclass(frozen=True)
class SegmentAssignment:
    scheme_name: str
    labels: Mapping[str, str]
    segment_order: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "segment_order", tuple(self.segment_order))
        if len(set(self.segment_order)) != len(self.segment_order):
            raise ValueError(f"{self.scheme_name}: duplicate segment labels in order")
        missing = set(self.labels.values()) - set(self.segment_order)
        if missing:
            raise ValueError(f"{self.scheme_name}: labels not in segment_order: {sorted(missing)}")

    def members(self, label: str) -> list[str]:
        return [mid for mid, lab in self.labels.items() if lab == label]

    def groups(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {lab: [] for lab in self.segment_order}
        for mid, lab in self.labels.items():
            out[lab].append(mid)
        return out

    def sizes(self) -> dict[str, int]:
        return {lab: len(ids) for lab, ids in self.groups().items()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "segment"])
        for mid, lab in self.labels.items():
            w.writerow([mid, lab])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, scheme_name: str) -> "SegmentAssignment":
        rows = list(csv.DictReader(io.StringIO(text)))
        labels = {r["id"]: r["segment"] for r in rows}
        order = list(dict.fromkeys(labels.values()))
        return cls(scheme_name, labels, tuple(order))


def segment_by_metadata(messages: Iterable[Message], field: str) -> SegmentAssignment:
    labels = {m.id: m.metadata.get(field, UNKNOWN) for m in messages}
    return SegmentAssignment(f"metadata:{field}", labels, tuple(dict.fromkeys(labels.values())))


def _check_ascending(boundaries: Sequence[float], what: str) -> None:
    if any(b2 <= b1 for b1, b2 in zip(boundaries, boundaries[1:])):
        raise ConfigError(f"{what} boundaries must be strictly ascending: {list(boundaries)}")


def _fmt_bound(b) -> str:
    return str(int(b)) if float(b).is_integer() else repr(float(b))


def interval_labels(boundaries: Sequence[float], var: str) -> list[str]:
    """Half-open, lower-inclusive interval names, e.g. ``20<=len<50``."""
    if not boundaries:
        return [f"all {var}"]
    b = [_fmt_bound(x) for x in boundaries]
    labels = [f"{var}<{b[0]}"]
    labels += [f"{lo}<={var}<{hi}" for lo, hi in zip(b, b[1:])]
    labels.append(f"{b[-1]}<={var}")
    return labels


def bucket_index(value: float, boundaries: Sequence[float]) -> int:
    # Lower bound inclusive: value == boundary goes to the upper bucket.
    return bisect_right(boundaries, value)


def segment_by_length(
    tokenized: Iterable[TokenizedMessage], boundaries: Sequence[int] = (20, 50, 80)
) -> SegmentAssignment:
    boundaries = list(boundaries)
    _check_ascending(boundaries, "length")
    names = interval_labels(boundaries, "len")
    labels = {m.id: names[bucket_index(m.length, boundaries)] for m in tokenized}
    return SegmentAssignment("length", labels, tuple(names))


def oov_fraction(tokens: Sequence[str], vocab) -> float:
    if not tokens:
        return 0.0
    return sum(1 for t in tokens if t not in vocab) / len(tokens)


def segment_by_oov(
    tokenized: Iterable[TokenizedMessage], vocab, boundaries: Sequence[float] = (0.5,)
) -> SegmentAssignment:
    boundaries = list(boundaries)
    _check_ascending(boundaries, "OOV")
    if any(not 0.0 < b < 1.0 for b in boundaries):
        raise ConfigError(f"OOV boundaries must lie in (0, 1): {boundaries}")
    names = ["Non OOV", "OOV"] if len(boundaries) == 1 else interval_labels(boundaries, "oov")
    labels = {m.id: names[bucket_index(oov_fraction(m.tokens, vocab), boundaries)] for m in tokenized}
    return SegmentAssignment("oov", labels, tuple(names))


# --------------------------------------------------------------------------
# LDA
# --------------------------------------------------------------------------


@dataclass(eq=False)
class LdaModel:
    K: int
    alpha: float
    beta: float
    vocab: dict[str, int]
    doc_ids: list[str]
    topic_word_counts: np.ndarray  # (K, V)
    doc_topic_counts: np.ndarray  # (D, K)
    token_assignments: list[np.ndarray]  # per document, per position
    seed: int = 0
    iterations: int = 0
    topic_totals: np.ndarray = field(default=None, repr=False)  # (K,)

    def __post_init__(self):
        if self.topic_totals is None:
            self.topic_totals = self.topic_word_counts.sum(axis=1)

    def check_invariants(self, doc_lengths: Sequence[int]) -> None:
        if not np.array_equal(self.doc_topic_counts.sum(axis=1), np.asarray(doc_lengths)):
            raise AssertionError("doc-topic row sums differ from document lengths")
        if int(self.topic_word_counts.sum()) != int(sum(doc_lengths)):
            raise AssertionError("topic-word total differs from corpus token total")
        if not np.array_equal(self.topic_word_counts.sum(axis=1), self.topic_totals):
            raise AssertionError("cached topic totals are stale")
        for z in self.token_assignments:
            if z.size and (z.min() < 0 or z.max() >= self.K):
                raise AssertionError("topic assignment out of range")

    def top_words(self, n: int = 10) -> list[list[str]]:
        words = sorted(self.vocab, key=self.vocab.__getitem__)
        out = []
        for k in range(self.K):
            order = sorted(range(len(words)), key=lambda v: (-self.topic_word_counts[k, v], words[v]))
            out.append([words[v] for v in order[:n]])
        return out

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "alpha": self.alpha,
            "beta": self.beta,
            "seed": self.seed,
            "iterations": self.iterations,
            "vocab": sorted(self.vocab, key=self.vocab.__getitem__),
            "doc_ids": list(self.doc_ids),
            "topic_word_counts": self.topic_word_counts.tolist(),
            "doc_topic_counts": self.doc_topic_counts.tolist(),
            "token_assignments": [z.tolist() for z in self.token_assignments],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LdaModel":
        return cls(
            K=doc["K"],
            alpha=doc["alpha"],
            beta=doc["beta"],
            vocab={w: i for i, w in enumerate(doc["vocab"])},
            doc_ids=list(doc["doc_ids"]),
            topic_word_counts=np.array(doc["topic_word_counts"], dtype=np.int64).reshape(doc["K"], -1),
            doc_topic_counts=np.array(doc["doc_topic_counts"], dtype=np.int64).reshape(-1, doc["K"]),
            token_assignments=[np.array(z, dtype=np.int64) for z in doc["token_assignments"]],
            seed=doc.get("seed", 0),
            iterations=doc.get("iterations", 0),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")


def _gibbs_sweep(words, docs, z, ndk, nkw, nk, alpha, beta, vbeta, uniforms):
    """One full sweep over all token positions (flattened corpus order)."""
    K = ndk.shape[1]
    p = np.empty(K)
    for i in range(words.shape[0]):
        w = words[i]
        d = docs[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for j in range(K):
            total += (ndk[d, j] + alpha) * (nkw[j, w] + beta) / (nk[j] + vbeta)
            p[j] = total
        u = uniforms[i] * total
        k = K - 1
        for j in range(K):
            if u < p[j]:
                k = j
                break
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


_gibbs_sweep_py = _gibbs_sweep
if numba is not None:
    _gibbs_sweep = numba.njit(cache=False)(_gibbs_sweep_py)


def lda_fit(
    tokenized: Sequence[TokenizedMessage],
    K: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iterations: int = 500,
    seed: int = 0,
    on_sweep: Callable[[int, LdaModel], None] | None = None,
    jit: bool = True,
) -> LdaModel:
    """Collapsed Gibbs sampling, one seeded chain.

    ``alpha`` defaults to ``50 / K``. Each sweep visits token positions in
    corpus order and draws from
    ``(n_dk + alpha) * (n_kw + beta) / (n_k + V * beta)`` with the current
    token removed from the counts. ``on_sweep`` is called after every sweep
    with the live model (used for invariant checks). ``jit=False`` runs the
    pure-Python kernel, which yields identical draws.
    """
    if K < 2:
        raise ConfigError(f"LDA needs K >= 2, got {K}")
    if not tokenized:
        raise DataError("LDA on an empty corpus")
    alpha = 50.0 / K if alpha is None else float(alpha)
    if alpha <= 0 or beta <= 0:
        raise ConfigError("LDA priors must be positive")
    vocab = {t: i for i, t in enumerate(sorted({t for m in tokenized for t in m.tokens}))}
    V, D = max(len(vocab), 1), len(tokenized)
    lengths = [m.length for m in tokenized]
    words = np.array([vocab[t] for m in tokenized for t in m.tokens], dtype=np.int64)
    docs = np.repeat(np.arange(D, dtype=np.int64), lengths)
    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=words.shape[0], dtype=np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (docs, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    model = LdaModel(K, alpha, beta, vocab, [m.id for m in tokenized], nkw, ndk,
                     [z[offsets[d]:offsets[d + 1]] for d in range(D)], seed, 0, nk)
    sweep = _gibbs_sweep if jit else _gibbs_sweep_py
    vbeta = V * beta
    for it in range(iterations):
        uniforms = rng.random(words.shape[0])
        sweep(words, docs, z, ndk, nkw, nk, alpha, beta, vbeta, uniforms)
        model.iterations = it + 1
        if on_sweep is not None:
            on_sweep(it, model)
    logger.info("LDA: K=%d, %d docs, %d tokens, %d sweeps", K, D, words.shape[0], iterations)
    return model


def lda_hard_assign(model: LdaModel, tokenized: Sequence[TokenizedMessage] | None = None) -> SegmentAssignment:
    """Label each document ``topic_k`` for its argmax topic count (lowest k on ties)."""
    ids = model.doc_ids if tokenized is None else [m.id for m in tokenized]
    if list(ids) != list(model.doc_ids):
        raise DataError("LDA model was fitted on a different corpus")
    names = tuple(f"topic_{k}" for k in range(model.K))
    best = np.argmax(model.doc_topic_counts, axis=1)
    return SegmentAssignment("lda", {mid: names[int(k)] for mid, k in zip(ids, best)}, names)


def purity(assignment: SegmentAssignment, truth: Mapping[str, str]) -> float:
    """Share of messages whose cluster's majority true label matches their own."""
    if not assignment.labels:
        return 0.0
    hits = 0
    for ids in assignment.groups().values():
        counts: dict[str, int] = {}
        for mid in ids:
            counts[truth[mid]] = counts.get(truth[mid], 0) + 1
        hits += max(counts.values(), default=0)
    return hits / len(assignment.labels)
