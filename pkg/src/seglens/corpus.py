"""Corpus loading and text normalization.

A corpus file is JSON-lines, one ``{"id", "text", "label", "metadata"?}``
object per line. Normalization runs five steps in a fixed order: pattern
tagging on the raw text, lowercasing, punctuation-to-space (underscore
kept), whitespace split, stopword removal.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from seglens.errors import ConfigError, DataError

logger = logging.getLogger(__name__)

_TAG_TOKEN = re.compile(r"^[a-z_]+$")
# Anything that is neither a word character nor whitespace. ``\w`` covers "_".
_PUNCT = re.compile(r"[^\w\s]")


@dataclass(frozen=True)
class Message:
    id: str
    raw_text: str
    label: int
    metadata: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class TokenizedMessage:
    id: str
    tokens: tuple[str, ...]

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class PatternRule:
    """Regex whose matches are replaced by a single tag token.

    The regex is compiled case-insensitively at construction so a bad
    pattern fails when the rule set is loaded, not on the first message.
    """

    name: str
    pattern: str
    replacement: str = ""

    def __post_init__(self):
        if not self.replacement:
            object.__setattr__(self, "replacement", f"tag_{self.name}")
        if not _TAG_TOKEN.match(self.replacement):
            raise ConfigError(
                f"rule {self.name!r}: replacement {self.replacement!r} must be "
                "lowercase letters and underscores only"
            )
        try:
            compiled = re.compile(self.pattern, re.IGNORECASE)
        except re.error as exc:
            raise ConfigError(f"rule {self.name!r}: invalid regex: {exc}") from exc
        object.__setattr__(self, "_regex", compiled)

    @property
    def regex(self) -> re.Pattern:
        return self._regex  # type: ignore[attr-defined]


# Specific before general: a URL can contain digits, a date is made of numbers.
DEFAULT_RULES: tuple[PatternRule, ...] = (
    PatternRule("url", r"(?:https?://|www\.)\S+"),
    PatternRule("html", r"<[^<>]+>"),
    PatternRule("email", r"[\w.+-]+@[\w-]+(?:\.[\w-]+)+"),
    PatternRule("ssn", r"\b\d{3}-\d{2}-\d{4}\b"),
    PatternRule("phone", r"(?:\(\d{3}\)\s?|\b\d{3}[-.])\d{3}[-.]\d{4}\b"),
    PatternRule("date", r"\b\d{1,4}[/-]\d{1,2}[/-]\d{1,4}\b"),
    PatternRule("time", r"\b\d{1,2}(?::\d{2})?\s?(?:am|pm)\b|\b\d{1,2}:\d{2}\b"),
    PatternRule("money", r"[$€£]\s?\d+(?:[.,]\d+)*|\b\d+(?:[.,]\d+)*\s?(?:dollars?|usd|bucks)\b"),
    PatternRule("number", r"\b\d+(?:[.,]\d+)*\b"),
)


def load_pattern_rules(path: str | Path) -> tuple[PatternRule, ...]:
    """Read ``name<TAB>regex`` lines; file order is priority order."""
    rules = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            name, sep, pattern = line.partition("\t")
            if not sep or not pattern:
                raise ConfigError(f"{path}:{lineno}: expected 'name<TAB>regex'", path)
            try:
                rules.append(PatternRule(name.strip(), pattern))
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}", path) from exc
    return tuple(rules)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """One stopword per line; ``None`` loads the bundled English list."""
    if path is None:
        text = resources.files("seglens.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = (w.strip().lower() for w in text.splitlines())
    return frozenset(w for w in words if w and not w.startswith("#"))


def _apply_rules(text: str, rules: Sequence[PatternRule]) -> str:
    # Pieces are (is_tag, text). Later rules only see untagged text, so an
    # earlier rule always wins an overlap and tags are never rewritten.
    pieces: list[tuple[bool, str]] = [(False, text)]
    for rule in rules:
        out: list[tuple[bool, str]] = []
        for is_tag, chunk in pieces:
            if is_tag:
                out.append((True, chunk))
                continue
            pos = 0
            for m in rule.regex.finditer(chunk):
                if m.end() == m.start():
                    continue
                out.append((False, chunk[pos : m.start()]))
                out.append((True, rule.replacement))
                pos = m.end()
            out.append((False, chunk[pos:]))
        pieces = out
    return " ".join(chunk for _, chunk in pieces)


def normalize_text(
    raw_text: str,
    rules: Sequence[PatternRule] = DEFAULT_RULES,
    stopwords: Iterable[str] = frozenset(),
) -> list[str]:
    # Rules match case-insensitively, so lowering first only matters for
    # characters like "İ" whose lowercase form adds a non-word mark; doing
    # it up front keeps normalization idempotent.
    text = _apply_rules(raw_text.lower(), rules)
    text = text.lower()
    text = _PUNCT.sub(" ", text)
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [tok for tok in text.split() if tok not in stop]


def load_corpus(path: str | Path) -> list[Message]:
    messages: list[Message] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON: {exc.msg}", path, lineno) from exc
            if not isinstance(rec, dict):
                raise DataError("record is not a JSON object", path, lineno)
            for key in ("id", "text", "label"):
                if key not in rec:
                    raise DataError(f"missing field {key!r}", path, lineno)
            mid, text, label = rec["id"], rec["text"], rec["label"]
            if not isinstance(mid, str) or not isinstance(text, str):
                raise DataError("'id' and 'text' must be strings", path, lineno)
            if isinstance(label, bool) or label not in (0, 1):
                raise DataError(f"label must be 0 or 1, got {label!r}", path, lineno)
            meta = rec.get("metadata") or {}
            if not isinstance(meta, dict):
                raise DataError("'metadata' must be an object", path, lineno)
            if mid in seen:
                raise DataError(f"duplicate id: {mid}", path, lineno)
            seen.add(mid)
            messages.append(
                Message(mid, text, int(label), {str(k): str(v) for k, v in meta.items()})
            )
    logger.info("loaded %d messages from %s", len(messages), path)
    return messages


def tokenize_corpus(
    messages: Iterable[Message],
    rules: Sequence[PatternRule] = DEFAULT_RULES,
    stopwords: Iterable[str] = frozenset(),
) -> list[TokenizedMessage]:
    stop = frozenset(stopwords)
    return [TokenizedMessage(m.id, tuple(normalize_text(m.raw_text, rules, stop))) for m in messages]


def document_frequency(tokenized: Iterable[TokenizedMessage | Sequence[str]]) -> Counter:
    """Number of messages containing each token at least once."""
    df: Counter = Counter()
    for msg in tokenized:
        tokens = msg.tokens if isinstance(msg, TokenizedMessage) else msg
        df.update(set(tokens))
    return df
