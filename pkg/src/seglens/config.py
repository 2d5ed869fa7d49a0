"""Run configuration: one JSON document, overridable with ``--set key=value``."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

from seglens.embeddings import FEMALE_WORDS, MALE_WORDS
from seglens.errors import ConfigError


@dataclass
class Paths:
    corpus: str = ""
    out_dir: str = "seglens-out"
    predictions: str | None = None
    attributions: str | None = None
    embeddings: str | None = None
    sentiment_positive: str | None = None
    sentiment_negative: str | None = None
    pos_lexicon: str | None = None
    stopwords: str | None = None
    pattern_rules: str | None = None
    oov_vocab: str | None = None


@dataclass
class Segmentation:
    metadata_field: str | None = "topic"
    length_boundaries: list = field(default_factory=lambda: [20, 50, 80])
    oov_boundaries: list = field(default_factory=lambda: [0.5])
    lda_k: int = 3  # 0 disables LDA
    lda_alpha: float | None = None
    lda_beta: float = 0.01
    lda_iterations: int = 500


@dataclass
class Aggregation:
    min_freq_fraction: float = 0.0001
    k: int = 100
    rank_by: str = "mean"
    message_filter: str = "all"  # all | label1 | label0
    schemes: list = field(default_factory=lambda: ["metadata", "lda"])
    unique_k: int = 40
    display_k: int = 20
    anchor_k: int = 10
    meaning_anchor_scope: str = "full_data"  # full_data | segment


@dataclass
class Model:
    learning_rate: float = 0.5
    epochs: int = 300
    l2: float = 0.001
    threshold: float = 0.5


@dataclass
class Bias:
    anchor_a: list = field(default_factory=lambda: list(MALE_WORDS))
    anchor_b: list = field(default_factory=lambda: list(FEMALE_WORDS))
    significant: float = 0.1
    strong: float = 0.2
    meaning_bucket_edges: list = field(default_factory=lambda: [0.05, 0.10, 0.20])


@dataclass
class Report:
    n_examples: int = 3
    max_alpha: float = 0.8
    denominator: str = "class"
    error_rows: str = "metadata"
    error_cols: str = "length"
    title: str = "Segment diagnostics"


@dataclass
class RunConfig:
    paths: Paths = field(default_factory=Paths)
    segmentation: Segmentation = field(default_factory=Segmentation)
    aggregation: Aggregation = field(default_factory=Aggregation)
    model: Model = field(default_factory=Model)
    bias: Bias = field(default_factory=Bias)
    report: Report = field(default_factory=Report)
    seed: int = 0
    threads: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict, base_dir: str | Path | None = None) -> "RunConfig":
        cfg = _build(cls, doc, "")
        if base_dir is not None:
            base = Path(base_dir)
            for f in fields(Paths):
                val = getattr(cfg.paths, f.name)
                if val and not Path(val).is_absolute():
                    setattr(cfg.paths, f.name, str(base / val))
        cfg.check()
        return cfg

    def check(self) -> None:
        """Range checks that need no file access."""
        if not self.paths.corpus:
            raise ConfigError("paths.corpus is required")
        a, s, b, r = self.aggregation, self.segmentation, self.bias, self.report
        if not 0.0 <= a.min_freq_fraction < 1.0:
            raise ConfigError("aggregation.min_freq_fraction must be in [0, 1)")
        for name in ("k", "unique_k", "display_k", "anchor_k"):
            if getattr(a, name) < 1:
                raise ConfigError(f"aggregation.{name} must be >= 1")
        if a.rank_by not in ("mean", "total"):
            raise ConfigError("aggregation.rank_by must be 'mean' or 'total'")
        if a.message_filter not in ("all", "label1", "label0"):
            raise ConfigError("aggregation.message_filter must be all, label1 or label0")
        if a.meaning_anchor_scope not in ("full_data", "segment"):
            raise ConfigError("aggregation.meaning_anchor_scope must be full_data or segment")
        unknown = set(a.schemes) - {"metadata", "length", "oov", "lda"}
        if unknown:
            raise ConfigError(f"aggregation.schemes: unknown scheme(s) {sorted(unknown)}")
        if s.lda_k == 1 or s.lda_k < 0:
            raise ConfigError("segmentation.lda_k must be 0 (off) or >= 2")
        if s.lda_iterations < 1 or s.lda_beta <= 0 or (s.lda_alpha is not None and s.lda_alpha <= 0):
            raise ConfigError("segmentation: LDA iterations and priors must be positive")
        if not 0 < b.significant < b.strong:
            raise ConfigError("bias: need 0 < significant < strong")
        if r.n_examples < 1 or not 0 < r.max_alpha <= 1:
            raise ConfigError("report: n_examples >= 1 and max_alpha in (0, 1] required")
        if r.denominator not in ("class", "cell"):
            raise ConfigError("report.denominator must be 'class' or 'cell'")
        if not 0 < self.model.threshold < 1 or self.model.epochs < 1 or self.model.learning_rate <= 0:
            raise ConfigError("model: threshold in (0, 1), epochs >= 1, learning_rate > 0 required")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def check_files(self) -> None:
        """Every configured input path must exist."""
        for f in fields(Paths):
            if f.name == "out_dir":
                continue
            val = getattr(self.paths, f.name)
            if val and not Path(val).is_file():
                raise ConfigError(f"paths.{f.name}: file not found: {val}", val)


def _build(cls, doc: Any, prefix: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    known = {f.name: f for f in fields(cls)}
    extra = set(doc) - set(known)
    if extra:
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + k for k in sorted(extra))}")
    kwargs = {}
    defaults = cls()
    for name, f in known.items():
        if name not in doc:
            continue
        sub = getattr(defaults, name)
        kwargs[name] = _build(type(sub), doc[name], f"{prefix}{name}.") if is_dataclass(sub) else doc[name]
    return cls(**kwargs)


def apply_override(doc: dict, assignment: str) -> None:
    """Apply ``a.b.c=value`` in place; ``value`` is parsed as JSON when possible."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = doc
    parts = key.split(".")
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"--set {key}: {p} is not a section")
    node[parts[-1]] = value


def load_config(path: str | Path, overrides: list[str] = ()) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", path) from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc.msg} (line {exc.lineno})", path) from exc
    for ov in overrides:
        apply_override(doc, ov)
    return RunConfig.from_dict(doc, base_dir=path.parent)
