"""Stage runner behind the CLI.

Each stage writes its artifacts to ``<out_dir>/stages/<stage>/`` together
with a ``key`` file: the SHA-256 of the stage's config slice, the content
hashes of the input files it reads, and the keys of the stages it depends
on. A stage whose stored key matches is loaded from disk instead of being
recomputed, so ``report`` only redoes dirty stages.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Any, Callable

from seglens import aggregation as agg
from seglens.attribution import (
    AttributionRecord,
    LinearModel,
    Prediction,
    linear_attribution,
    load_attributions,
    load_predictions,
    save_attributions,
    save_predictions,
    train_reference_classifier,
)
from seglens.config import RunConfig
from seglens.corpus import DEFAULT_RULES, load_corpus, load_pattern_rules, load_stopwords, tokenize_corpus
from seglens.diagnostics import (
    FN,
    FP,
    ConfusionMatrix,
    ErrorCell,
    ErrorTable,
    RepresentativeExample,
    confusion_by_segment,
    error_rate_table,
    select_representative_errors,
)
from seglens.embeddings import AnchorSet, EmbeddingTable, load_embeddings
from seglens.errors import ConfigError, DataError
from seglens.grouping import (
    NO_EMBEDDING,
    BiasRow,
    gender_bias_scan,
    load_pos_lexicon,
    load_sentiment_lexicon,
    load_word_list,
    meaning_annotate,
    sentiment_tag,
)
from seglens.report import Palette, ReportInputs, emit_report
from seglens.segmentation import (
    SegmentAssignment,
    lda_fit,
    lda_hard_assign,
    segment_by_length,
    segment_by_metadata,
    segment_by_oov,
)

logger = logging.getLogger(__name__)

STAGES = ("train-ref", "attribute", "segment", "aggregate", "annotate", "bias", "errors", "report")
_DEPS = {
    "train-ref": (),
    "attribute": ("train-ref",),
    "segment": (),
    "aggregate": ("attribute", "segment"),
    "annotate": ("aggregate",),
    "bias": ("aggregate",),
    "errors": ("attribute", "segment"),
    "report": ("aggregate", "annotate", "bias", "errors"),
}


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, ensure_ascii=False) + "\n"


def _bundled_bytes(name: str) -> bytes:
    return resources.files("seglens.data").joinpath(name).read_bytes()


class Pipeline:
    def __init__(self, cfg: RunConfig, stamp: bool = False):
        self.cfg = cfg
        self.out = Path(cfg.paths.out_dir)
        self.stamp = stamp
        self._results: dict[str, Any] = {}
        self._keys: dict[str, str] = {}
        self.recomputed: list[str] = []

    # ---------------------------------------------------------------- inputs

    def _file_hash(self, attr: str, bundled: str | None = None) -> str | None:
        path = getattr(self.cfg.paths, attr)
        if path:
            return _sha(Path(path).read_bytes())
        return _sha(_bundled_bytes(bundled)) if bundled else None

    @cached_property
    def messages(self):
        return load_corpus(self.cfg.paths.corpus)

    @cached_property
    def labels(self) -> dict[str, int]:
        return {m.id: m.label for m in self.messages}

    @cached_property
    def rules(self):
        return load_pattern_rules(self.cfg.paths.pattern_rules) if self.cfg.paths.pattern_rules else DEFAULT_RULES

    @cached_property
    def stopwords(self):
        return load_stopwords(self.cfg.paths.stopwords)

    @cached_property
    def tokenized(self):
        return tokenize_corpus(self.messages, self.rules, self.stopwords)

    @cached_property
    def embeddings(self) -> EmbeddingTable | None:
        return load_embeddings(self.cfg.paths.embeddings) if self.cfg.paths.embeddings else None

    @cached_property
    def sentiment(self):
        return load_sentiment_lexicon(self.cfg.paths.sentiment_positive, self.cfg.paths.sentiment_negative)

    @cached_property
    def pos_lexicon(self):
        return load_pos_lexicon(self.cfg.paths.pos_lexicon)

    def external_predictions(self) -> dict[str, Prediction] | None:
        if not self.cfg.paths.predictions:
            return None
        preds = load_predictions(self.cfg.paths.predictions, self.cfg.model.threshold)
        missing = [m.id for m in self.messages if m.id not in preds]
        if missing:
            raise DataError(f"{len(missing)} message(s) lack a prediction, e.g. {missing[0]!r}",
                            self.cfg.paths.predictions)
        return preds

    def validate(self) -> dict:
        """Load and cross-check every input without writing anything."""
        self.cfg.check_files()
        summary: dict[str, Any] = {"messages": len(self.messages)}
        self.tokenized
        if self.embeddings is not None:
            summary["embedding_vocab"] = self.embeddings.vocab_size
            for name, words in (("anchor_a", self.cfg.bias.anchor_a), ("anchor_b", self.cfg.bias.anchor_b)):
                AnchorSet(name, tuple(words)).resolve(self.embeddings)
        self.sentiment
        self.pos_lexicon
        if self.cfg.paths.attributions:
            summary["attributions"] = len(load_attributions(self.cfg.paths.attributions, self.tokenized))
        if self.cfg.paths.predictions:
            summary["predictions"] = len(self.external_predictions())
        if self.cfg.paths.oov_vocab:
            load_word_list(self.cfg.paths.oov_vocab)
        if len(set(self.labels.values())) < 2 and not self.cfg.paths.attributions:
            raise DataError("corpus has a single class; the reference model cannot be trained")
        return summary

    # ---------------------------------------------------------------- caching

    def _key_material(self, stage: str) -> dict:
        c = self.cfg
        corpus_inputs = {
            "corpus": self._file_hash("corpus"),
            "rules": self._file_hash("pattern_rules") or "default",
            "stopwords": self._file_hash("stopwords", "stopwords.txt"),
        }
        mat: dict[str, Any] = {"stage": stage, "upstream": [self.key(d) for d in _DEPS[stage]]}
        if stage == "train-ref":
            mat.update(corpus_inputs, model=asdict(c.model), seed=c.seed,
                       external=bool(c.paths.attributions))
        elif stage == "attribute":
            mat.update(corpus_inputs, attributions=self._file_hash("attributions"),
                       predictions=self._file_hash("predictions"), threshold=c.model.threshold)
        elif stage == "segment":
            mat.update(corpus_inputs, seg=asdict(c.segmentation), seed=c.seed,
                       embeddings=self._file_hash("embeddings"), oov_vocab=self._file_hash("oov_vocab"))
        elif stage == "aggregate":
            mat.update(agg=asdict(c.aggregation))
        elif stage == "annotate":
            mat.update(embeddings=self._file_hash("embeddings"),
                       pos=self._file_hash("sentiment_positive", "sentiment_positive.txt"),
                       neg=self._file_hash("sentiment_negative", "sentiment_negative.txt"),
                       pos_lexicon=self._file_hash("pos_lexicon", "pos_lexicon.tsv"),
                       edges=c.bias.meaning_bucket_edges)
        elif stage == "bias":
            mat.update(embeddings=self._file_hash("embeddings"), bias=asdict(c.bias))
        elif stage == "errors":
            mat.update(report=asdict(c.report))
        elif stage == "report":
            mat.update(report=asdict(c.report), display_k=c.aggregation.display_k)
        return mat

    def key(self, stage: str) -> str:
        if stage not in self._keys:
            self._keys[stage] = _sha(json.dumps(self._key_material(stage), sort_keys=True).encode())
        return self._keys[stage]

    def stage_dir(self, stage: str) -> Path:
        return self.out / "stages" / stage

    def run(self, stage: str):
        if stage in self._results:
            return self._results[stage]
        for dep in _DEPS[stage]:
            self.run(dep)
        d = self.stage_dir(stage)
        key = self.key(stage)
        loader, computer = _STAGE_IO[stage]
        key_file = d / "key"
        if stage != "report" and key_file.is_file() and key_file.read_text().strip() == key:
            logger.info("stage %s: up to date", stage)
            result = loader(self, d)
        else:
            logger.info("stage %s: computing", stage)
            if d.exists():
                shutil.rmtree(d)
            d.mkdir(parents=True)
            result = computer(self, d)
            key_file.write_text(key + "\n")
            self.recomputed.append(stage)
        self._results[stage] = result
        return result


# -------------------------------------------------------------------- stages


def _train(p: Pipeline, d: Path):
    if p.cfg.paths.attributions:
        (d / "model.json").write_text("null\n")
        return None
    m = p.cfg.model
    model = train_reference_classifier(p.tokenized, p.labels, m.learning_rate, m.epochs, m.l2,
                                       p.cfg.seed, m.threshold)
    model.save(d / "model.json")
    return model


def _load_train(p: Pipeline, d: Path):
    doc = json.loads((d / "model.json").read_text())
    return None if doc is None else LinearModel.from_dict(doc)


def _attribute(p: Pipeline, d: Path):
    model = p.run("train-ref")
    if p.cfg.paths.attributions:
        attrs = load_attributions(p.cfg.paths.attributions, p.tokenized)
        missing = [m.id for m in p.tokenized if m.id not in attrs]
        if missing:
            raise DataError(f"{len(missing)} message(s) have no attribution, e.g. {missing[0]!r}",
                            p.cfg.paths.attributions)
    else:
        work = lambda m: linear_attribution(model, m.tokens, m.id)  # noqa: E731
        if p.cfg.threads > 1:
            with ThreadPoolExecutor(p.cfg.threads) as ex:
                recs = list(ex.map(work, p.tokenized))
        else:
            recs = [work(m) for m in p.tokenized]
        attrs = {r.id: r for r in recs}
    preds = p.external_predictions()
    if preds is None:
        thr = p.cfg.model.threshold
        preds = {mid: Prediction(mid, r.prob, int(r.prob >= thr)) for mid, r in attrs.items()}
    save_attributions(attrs, d / "attributions.jsonl")
    save_predictions(preds, d / "predictions.jsonl")
    return attrs, preds


def _load_attribute(p: Pipeline, d: Path):
    return (load_attributions(d / "attributions.jsonl", p.tokenized),
            load_predictions(d / "predictions.jsonl", p.cfg.model.threshold))


def _segment(p: Pipeline, d: Path):
    s = p.cfg.segmentation
    out: dict[str, SegmentAssignment] = {}
    if s.metadata_field:
        out["metadata"] = segment_by_metadata(p.messages, s.metadata_field)
    out["length"] = segment_by_length(p.tokenized, s.length_boundaries)
    vocab = None
    if p.cfg.paths.oov_vocab:
        vocab = load_word_list(p.cfg.paths.oov_vocab)
    elif p.embeddings is not None:
        vocab = p.embeddings.vocab()
    if vocab is not None:
        out["oov"] = segment_by_oov(p.tokenized, vocab, s.oov_boundaries)
    if s.lda_k >= 2:
        model = lda_fit(p.tokenized, s.lda_k, s.lda_alpha, s.lda_beta, s.lda_iterations, p.cfg.seed)
        model.save(d / "lda_model.json")
        (d / "lda_top_words.json").write_text(_dump(model.top_words(15)))
        out["lda"] = lda_hard_assign(model, p.tokenized)
    for name, a in out.items():
        (d / f"{name}.csv").write_text(a.to_csv())
    (d / "segments.json").write_text(_dump(
        {name: {"scheme": a.scheme_name, "order": list(a.segment_order), "labels": dict(a.labels)}
         for name, a in out.items()}))
    return out


def _load_segment(p: Pipeline, d: Path):
    doc = json.loads((d / "segments.json").read_text())
    return {name: SegmentAssignment(v["scheme"], v["labels"], tuple(v["order"])) for name, v in doc.items()}


def _filter_ids(p: Pipeline):
    f = p.cfg.aggregation.message_filter
    if f == "all":
        return None
    want = 1 if f == "label1" else 0
    return [mid for mid, y in p.labels.items() if y == want]


def _table_doc(t: agg.TokenImportanceTable) -> dict:
    return {"segment": t.segment, "direction": t.direction, "threshold": t.threshold,
            "rank_by": t.rank_by, "rows": [asdict(r) for r in t.rows]}


def _table_from(doc: dict) -> agg.TokenImportanceTable:
    return agg.TokenImportanceTable(doc["segment"], doc["direction"],
                                    tuple(agg.TokenRow(**r) for r in doc["rows"]),
                                    doc["threshold"], doc["rank_by"])


def _aggregate(p: Pipeline, d: Path):
    attrs, _ = p.run("attribute")
    segments = p.run("segment")
    a = p.cfg.aggregation
    ids = _filter_ids(p)
    tables, unique = {}, {}
    for scheme in a.schemes:
        if scheme not in segments:
            logger.warning("aggregation scheme %r not available, skipped", scheme)
            continue
        res = agg.aggregate_token_importance(attrs, segments[scheme], a.min_freq_fraction, a.rank_by, ids)
        tables[scheme] = res
        segs = [s for s in res if s != agg.FULL_DATA]
        if len(segs) >= 2:
            unique[scheme] = {
                direction: agg.unique_top_tokens({s: res[s][i] for s in segs}, a.unique_k)
                for i, direction in enumerate((agg.CLASS1, agg.CLASS0))
            }
        (d / f"importance_{scheme}.csv").write_text(
            agg.tables_to_csv(t for pair in res.values() for t in pair))
    doc = {"tables": {s: {seg: [_table_doc(t) for t in pair] for seg, pair in res.items()}
                      for s, res in tables.items()},
           "unique": {s: {dr: {seg: [list(x) for x in v] for seg, v in per.items()}
                          for dr, per in u.items()} for s, u in unique.items()}}
    (d / "aggregate.json").write_text(_dump(doc))
    return tables, unique


def _load_aggregate(p: Pipeline, d: Path):
    doc = json.loads((d / "aggregate.json").read_text())
    tables = {s: {seg: tuple(_table_from(t) for t in pair) for seg, pair in res.items()}
              for s, res in doc["tables"].items()}
    unique = {s: {dr: {seg: [tuple(x) for x in v] for seg, v in per.items()} for dr, per in u.items()}
              for s, u in doc["unique"].items()}
    return tables, unique


def _primary_scheme(p: Pipeline, tables: dict) -> str | None:
    for s in p.cfg.aggregation.schemes:
        if s in tables:
            return s
    return None


def _annotate(p: Pipeline, d: Path):
    tables, _ = p.run("aggregate")
    a = p.cfg.aggregation
    tokens = sorted({t for res in tables.values() for pair in res.values() for tab in pair
                     for t in agg.top_k(tab, a.k)} if tables else set())
    meaning: dict[str, dict[str, str]] = {}
    emb = p.embeddings
    scheme = _primary_scheme(p, tables)
    if emb is not None and scheme is not None:
        res = tables[scheme]
        scopes = [agg.FULL_DATA] if a.meaning_anchor_scope == "full_data" else list(res)
        for scope in scopes:
            c1, c0 = res[scope]
            pos_words = [t for t in agg.top_k(c1, a.anchor_k) if t in emb] if c1.rows else []
            neg_words = [t for t in agg.top_k(c0, a.anchor_k) if t in emb] if c0.rows else []
            if not pos_words or not neg_words:
                logger.warning("meaning annotation for %s skipped: no embedded anchor tokens", scope)
                continue
            anns = meaning_annotate(tokens, AnchorSet(f"{scope}:class1", tuple(pos_words)),
                                    AnchorSet(f"{scope}:class0", tuple(neg_words)), emb,
                                    p.cfg.bias.meaning_bucket_edges)
            meaning[scope] = {x.token: (NO_EMBEDDING if x.bucket is None else str(x.bucket)) for x in anns}
    doc = {
        "meaning": meaning,
        "sentiment": {t: sentiment_tag(t, p.sentiment) for t in tokens},
        "pos": {t: p.pos_lexicon.group(t) for t in tokens},
    }
    (d / "annotations.json").write_text(_dump(doc))
    return doc


def _load_json(name: str) -> Callable:
    return lambda p, d: json.loads((d / name).read_text())


def _bias(p: Pipeline, d: Path):
    tables, _ = p.run("aggregate")
    emb = p.embeddings
    out: dict[str, dict[str, list[BiasRow]]] = {}
    scheme = _primary_scheme(p, tables)
    if emb is not None and scheme is not None:
        b = p.cfg.bias
        male = AnchorSet("male", tuple(b.anchor_a)).resolve(emb)
        female = AnchorSet("female", tuple(b.anchor_b)).resolve(emb)
        for i, direction in enumerate((agg.CLASS1, agg.CLASS0)):
            out[direction] = {
                seg: gender_bias_scan(list(enumerate(agg.top_k(pair[i], p.cfg.aggregation.k))),
                                      emb, male, female, b.significant, b.strong)
                for seg, pair in tables[scheme].items()
            }
    (d / "bias.json").write_text(_dump({dr: {s: [asdict(r) for r in rows] for s, rows in per.items()}
                                        for dr, per in out.items()}))
    return out


def _load_bias(p: Pipeline, d: Path):
    doc = json.loads((d / "bias.json").read_text())
    return {dr: {s: [BiasRow(**r) for r in rows] for s, rows in per.items()} for dr, per in doc.items()}


def _errors(p: Pipeline, d: Path):
    attrs, preds = p.run("attribute")
    segments = p.run("segment")
    r = p.cfg.report
    confusion = {name: confusion_by_segment(p.labels, preds, a) for name, a in segments.items()}
    grids = {}
    if r.error_rows in segments and r.error_cols in segments:
        grids[f"{r.error_rows} x {r.error_cols}"] = error_rate_table(
            p.labels, preds, segments[r.error_rows], segments[r.error_cols], r.denominator)
    ex_scheme = segments.get(r.error_rows) or next(iter(segments.values()))
    examples = {kind: select_representative_errors(p.labels, preds, attrs, ex_scheme, r.n_examples, kind)
                for kind in (FP, FN)}
    doc = {
        "confusion": {n: {s: asdict(cm) for s, cm in m.items()} for n, m in confusion.items()},
        "grids": {n: {"rows": list(g.row_order), "cols": list(g.col_order), "denominator": g.denominator,
                      "cells": [asdict(c) for c in g.cells],
                      "totals": [[k, row, v] for (k, row), v in g.row_totals.items()]}
                  for n, g in grids.items()},
        "examples": {k: {s: [e.to_dict() for e in v] for s, v in per.items()} for k, per in examples.items()},
    }
    (d / "errors.json").write_text(_dump(doc))
    for n, g in grids.items():
        (d / f"grid_{n.replace(' ', '')}.csv").write_text(g.to_csv())
    return confusion, grids, examples


def _load_errors(p: Pipeline, d: Path):
    doc = json.loads((d / "errors.json").read_text())
    confusion = {n: {s: ConfusionMatrix(**cm) for s, cm in m.items()} for n, m in doc["confusion"].items()}
    grids = {n: ErrorTable(tuple(g["rows"]), tuple(g["cols"]), tuple(ErrorCell(**c) for c in g["cells"]),
                           {(k, row): v for k, row, v in g["totals"]}, g["denominator"])
             for n, g in doc["grids"].items()}
    examples = {k: {s: [RepresentativeExample(e["id"], e["actual"], e["predicted"], e["prob"],
                                              tuple(e["tokens"]), tuple(e["scores"]), e["segment"])
                        for e in v] for s, v in per.items()} for k, per in doc["examples"].items()}
    return confusion, grids, examples


NOTES = (
    "Attribution sign: positive scores push toward class 1; class-1 tokens are shaded blue, class-0 tokens red.",
    "F1 is the exact harmonic mean 2TP / (2TP + FP + FN), shown to 4 decimals.",
    "Token importance is ranked by mean relevance per message containing the token unless configured otherwise; "
    "rare tokens are dropped with a per-segment frequency threshold of max(1, ceil(fraction x segment size)).",
)


def _report(p: Pipeline, d: Path):
    tables, unique = p.run("aggregate")
    ann = p.run("annotate")
    bias = p.run("bias")
    confusion, grids, examples = p.run("errors")
    scheme = _primary_scheme(p, tables)
    meaning = ann["meaning"]
    meaning_map = meaning.get(agg.FULL_DATA) if p.cfg.aggregation.meaning_anchor_scope == "full_data" else meaning
    notes = list(NOTES)
    notes.append(f"Error-rate denominator: {p.cfg.report.denominator}.")
    if p.embeddings is None:
        notes.append("No embedding table configured: meaning colours and the gender scan are omitted.")
    inputs = ReportInputs(
        title=p.cfg.report.title,
        confusion=confusion,
        importance=tables.get(scheme, {}) if scheme else {},
        meaning=meaning_map or {},
        sentiment=ann["sentiment"],
        pos=ann["pos"],
        unique=unique.get(scheme, {}) if scheme else {},
        bias=bias,
        error_tables=grids,
        examples=examples,
        notes=notes,
        k=p.cfg.aggregation.display_k,
    )
    target = p.out / "report"
    if target.exists():
        shutil.rmtree(target)
    return emit_report(inputs, target, Palette(max_alpha=p.cfg.report.max_alpha), stamp=p.stamp)


_STAGE_IO: dict[str, tuple[Callable, Callable]] = {
    "train-ref": (_load_train, _train),
    "attribute": (_load_attribute, _attribute),
    "segment": (_load_segment, _segment),
    "aggregate": (_load_aggregate, _aggregate),
    "annotate": (_load_json("annotations.json"), _annotate),
    "bias": (_load_bias, _bias),
    "errors": (_load_errors, _errors),
    "report": (None, _report),
}
