"""Seeded toy corpora with known structure, for recovery checks."""

from __future__ import annotations

import numpy as np

from seglens.corpus import TokenizedMessage


def disjoint_topic_corpus(
    n_docs: int = 300,
    n_topics: int = 3,
    words_per_topic: int = 30,
    length_range: tuple[int, int] = (20, 60),
    seed: int = 0,
) -> tuple[list[TokenizedMessage], dict[str, str]]:
    """Documents drawn from one topic each; topics share no vocabulary.

    Word frequencies within a topic follow a Zipf-like 1/rank law. Returns
    the corpus and the true topic of every document id.
    """
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.arange(1, words_per_topic + 1)
    weights /= weights.sum()
    vocab = [[f"t{k}w{j}" for j in range(words_per_topic)] for k in range(n_topics)]
    docs, truth = [], {}
    lo, hi = length_range
    for d in range(n_docs):
        k = d % n_topics
        n = int(rng.integers(lo, hi + 1))
        toks = tuple(vocab[k][j] for j in rng.choice(words_per_topic, size=n, p=weights))
        mid = f"d{d:04d}"
        docs.append(TokenizedMessage(mid, toks))
        truth[mid] = f"true_{k}"
    return docs, truth
