"""Word-embedding table, cosine similarity and anchor-set similarity."""

from __future__ import annotations

import gzip
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from seglens.errors import ConfigError, DataError, OutOfVocabulary, UndefinedSimilarity

logger = logging.getLogger(__name__)

MALE_WORDS = ("man", "men", "he", "his", "sir", "gentleman")
FEMALE_WORDS = ("woman", "women", "she", "her", "madam", "lady")


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Immutable token -> vector map backed by one float64 matrix."""

    words: tuple[str, ...]
    matrix: np.ndarray
    index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        if self.matrix.ndim != 2 or self.matrix.shape[0] != len(self.words):
            raise ValueError("matrix must be (vocab_size, dim)")
        if not self.index:
            object.__setattr__(self, "index", {w: i for i, w in enumerate(self.words)})
        if len(self.index) != len(self.words):
            raise ValueError("duplicate tokens in embedding table")
        self.matrix.setflags(write=False)

    @classmethod
    def from_dict(cls, vectors: dict[str, Sequence[float]]) -> "EmbeddingTable":
        words = tuple(vectors)
        if not words:
            raise ValueError("empty embedding table")
        mat = np.array([np.asarray(vectors[w], dtype=np.float64) for w in words])
        return cls(words, mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    @property
    def vocab_size(self) -> int:
        return len(self.words)

    def vocab(self) -> frozenset[str]:
        return frozenset(self.words)

    def __contains__(self, token) -> bool:
        return token in self.index

    def __len__(self) -> int:
        return len(self.words)

    def __getitem__(self, token: str) -> np.ndarray:
        try:
            return self.matrix[self.index[token]]
        except KeyError:
            raise OutOfVocabulary(token) from None


def _open_text(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def _is_header(parts: list[str]) -> bool:
    if len(parts) != 2:
        return False
    try:
        int(parts[0]), int(parts[1])
    except ValueError:
        return False
    return True


def load_embeddings(path: str | Path, keep: Iterable[str] | None = None) -> EmbeddingTable:
    """Read word2vec text format, with or without the ``count dim`` header.

    ``keep`` restricts loading to the given tokens, which is much faster for
    large files when only a handful of words are needed. Dimensionality is
    still checked on every row.
    """
    path = Path(path)
    wanted = None if keep is None else set(keep)
    rows: dict[str, np.ndarray] = {}
    dim = None
    declared = None
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if lineno == 1 and _is_header(parts):
                declared, dim = int(parts[0]), int(parts[1])
                if dim <= 0:
                    raise DataError(f"non-positive dimension {dim}", path, lineno)
                continue
            if not parts or parts == [""]:
                continue
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
                if dim == 0:
                    raise DataError("row has no vector values", path, lineno)
            if len(values) != dim:
                raise DataError(
                    f"dimensionality mismatch: expected {dim} values, got {len(values)}",
                    path,
                    lineno,
                )
            if wanted is not None and token not in wanted:
                continue
            try:
                vec = np.array(values, dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"unparsable value: {exc}", path, lineno) from exc
            if not np.all(np.isfinite(vec)):
                raise DataError("non-finite value", path, lineno)
            if token in rows:
                logger.warning("%s:%d: duplicate token %r, keeping the later row", path, lineno, token)
                del rows[token]
            rows[token] = vec
    if not rows:
        raise DataError("no embedding rows loaded", path)
    if declared is not None and wanted is None and declared != len(rows):
        logger.warning("%s: header declares %d rows, read %d", path, declared, len(rows))
    words = tuple(rows)
    return EmbeddingTable(words, np.vstack([rows[w] for w in words]))


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise UndefinedSimilarity("undefined similarity: zero-norm vector")
    sim = float(np.dot(u, v)) / (nu * nv)
    return min(1.0, max(-1.0, sim))


@dataclass(frozen=True)
class AnchorSet:
    name: str
    words: tuple[str, ...]
    resolved: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        if not self.words:
            raise ConfigError(f"anchor set {self.name!r} is empty")

    def resolve(self, table: EmbeddingTable) -> "AnchorSet":
        """Keep the anchor words that have vectors; drop the rest with a warning."""
        present = tuple(w for w in self.words if w in table)
        missing = [w for w in self.words if w not in table]
        if missing:
            logger.warning("anchor set %r: no embedding for %s", self.name, ", ".join(missing))
        if not present:
            raise ConfigError(f"anchor set {self.name!r}: no anchor word has an embedding")
        return replace(self, resolved=present)


def _resolved(anchors: AnchorSet, table: EmbeddingTable) -> tuple[str, ...]:
    if anchors.resolved is None:
        return anchors.resolve(table).resolved  # type: ignore[return-value]
    return anchors.resolved


def anchor_similarity(token: str, anchors: AnchorSet, table: EmbeddingTable) -> float:
    """Mean cosine similarity between ``token`` and each resolved anchor word."""
    vec = table[token]
    words = _resolved(anchors, table)
    return math.fsum(cosine_similarity(vec, table[w]) for w in words) / len(words)


def similarity_difference(
    token: str, set_a: AnchorSet, set_b: AnchorSet, table: EmbeddingTable
) -> float:
    return anchor_similarity(token, set_a, table) - anchor_similarity(token, set_b, table)


def default_gender_anchors() -> tuple[AnchorSet, AnchorSet]:
    return AnchorSet("male", MALE_WORDS), AnchorSet("female", FEMALE_WORDS)
