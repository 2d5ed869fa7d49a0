"""Per-token attributions: ingestion, a reference linear model, and occlusion.

Sign convention everywhere: a positive score pushes the prediction toward
class 1.

The reference model is logistic regression on binary bag-of-words presence
features. With presence features, removing every occurrence of a token
changes the logit by exactly that token's weight, so occlusion and weight
attribution agree and each can check the other.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from seglens.corpus import TokenizedMessage
from seglens.errors import AlignmentError, DataError, SeglensError


def sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def logit(p: float, eps: float = 1e-15) -> float:
    p = min(1.0 - eps, max(eps, p))
    return math.log(p) - math.log1p(-p)


@dataclass(frozen=True)
class Prediction:
    id: str
    prob: float
    pred: int
    logit: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise DataError(f"{self.id}: probability {self.prob} outside [0, 1]")
        if self.pred not in (0, 1):
            raise DataError(f"{self.id}: prediction must be 0 or 1")


@dataclass(frozen=True)
class AttributionRecord:
    id: str
    tokens: tuple[str, ...]
    scores: tuple[float, ...]
    prob: float

    def __post_init__(self):
        if len(self.tokens) != len(self.scores):
            raise AlignmentError(
                f"{self.id}: {len(self.scores)} scores for {len(self.tokens)} tokens"
            )
        if not all(math.isfinite(s) for s in self.scores):
            raise DataError(f"{self.id}: non-finite score")

    @property
    def token_scores(self) -> list[tuple[str, float]]:
        return list(zip(self.tokens, self.scores))


AttributionSet = dict  # id -> AttributionRecord


class Predictor(Protocol):
    def predict(self, tokens: Sequence[str], id: str = "") -> Prediction: ...


@dataclass(frozen=True, eq=False)
class LinearModel:
    vocab: Mapping[str, int]
    weights: np.ndarray
    bias: float
    threshold: float = 0.5

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(self.vocab),):
            raise ValueError(f"{w.shape[0]} weights for vocab of {len(self.vocab)}")
        if not np.all(np.isfinite(w)) or not math.isfinite(self.bias):
            raise ValueError("non-finite model parameters")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def weight(self, token: str) -> float:
        idx = self.vocab.get(token)
        return 0.0 if idx is None else float(self.weights[idx])

    def logit(self, tokens: Sequence[str]) -> float:
        known = sorted({t for t in tokens if t in self.vocab})
        return self.bias + math.fsum(float(self.weights[self.vocab[t]]) for t in known)

    def predict(self, tokens: Sequence[str], id: str = "") -> Prediction:
        z = self.logit(tokens)
        p = sigmoid(z)
        return Prediction(id, p, int(p >= self.threshold), z)

    def to_dict(self) -> dict:
        words = sorted(self.vocab, key=self.vocab.__getitem__)
        return {
            "vocab": words,
            "weights": [float(x) for x in self.weights],
            "bias": float(self.bias),
            "threshold": float(self.threshold),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearModel":
        vocab = {w: i for i, w in enumerate(doc["vocab"])}
        return cls(vocab, np.array(doc["weights"], dtype=np.float64), float(doc["bias"]),
                   float(doc.get("threshold", 0.5)))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "LinearModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


predict = LinearModel.predict


def _presence_matrix(docs: Sequence[Sequence[str]], vocab: Mapping[str, int]) -> sp.csr_matrix:
    indptr, indices = [0], []
    for toks in docs:
        cols = sorted({vocab[t] for t in toks if t in vocab})
        indices.extend(cols)
        indptr.append(len(indices))
    data = np.ones(len(indices), dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(docs), len(vocab)))


def train_reference_classifier(
    tokenized: Sequence[TokenizedMessage],
    labels: Mapping[str, int],
    learning_rate: float = 0.5,
    epochs: int = 300,
    l2: float = 1e-3,
    seed: int = 0,
    threshold: float = 0.5,
) -> LinearModel:
    """Full-batch gradient descent on mean log-loss plus ``l2/2 * |w|^2``.

    Weights start at small seeded Gaussian noise; the bias is not penalized.
    Single-threaded and order-fixed, so the result is bit-reproducible.
    """
    y = np.array([labels[m.id] for m in tokenized], dtype=np.float64)
    if len(set(y.tolist())) < 2:
        raise SeglensError("training corpus must contain both classes")
    vocab = {t: i for i, t in enumerate(sorted({t for m in tokenized for t in m.tokens}))}
    X = _presence_matrix([m.tokens for m in tokenized], vocab)
    Xt = X.T.tocsr()
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    w = rng.normal(0.0, 0.01, size=len(vocab))
    b = 0.0
    for _ in range(epochs):
        z = X @ w + b
        r = expit(z) - y
        w = w - learning_rate * (Xt @ r / n + l2 * w)
        b = b - learning_rate * float(r.sum() / n)
    return LinearModel(vocab, w, b, threshold)


def linear_attribution(model: LinearModel, tokens: Sequence[str], id: str = "") -> AttributionRecord:
    """Each occurrence of a known token gets ``w_t / count_t``; unknown tokens get 0.

    The scores plus the bias sum to the model logit.
    """
    counts = Counter(tokens)
    scores = tuple(model.weight(t) / counts[t] for t in tokens)
    return AttributionRecord(id, tuple(tokens), scores, model.predict(tokens).prob)


def _logit_of(predictor, tokens: Sequence[str]) -> float:
    direct = getattr(predictor, "logit", None)
    if callable(direct):
        return float(direct(tokens))
    pred = predictor.predict(tokens)
    if pred.logit is not None:
        return pred.logit
    return logit(pred.prob)


def occlusion_attribution(predictor: Predictor, tokens: Sequence[str], id: str = "") -> AttributionRecord:
    """Logit drop from deleting all occurrences of a token, split across them."""
    tokens = tuple(tokens)
    if not tokens:
        return AttributionRecord(id, (), (), predictor.predict(tokens).prob)
    full = _logit_of(predictor, tokens)
    counts = Counter(tokens)
    per_type = {}
    for t in counts:
        without = [x for x in tokens if x != t]
        per_type[t] = (full - _logit_of(predictor, without)) / counts[t]
    return AttributionRecord(id, tokens, tuple(per_type[t] for t in tokens),
                             predictor.predict(tokens).prob)


def attribute_corpus(model: LinearModel, tokenized: Iterable[TokenizedMessage]) -> dict:
    return {m.id: linear_attribution(model, m.tokens, m.id) for m in tokenized}


def predict_corpus(model: LinearModel, tokenized: Iterable[TokenizedMessage]) -> dict:
    return {m.id: model.predict(m.tokens, m.id) for m in tokenized}


def load_attributions(path: str | Path, tokenized: Iterable[TokenizedMessage]) -> dict:
    """Read ``{"id", "tokens", "scores", "prob"}`` lines and check token alignment."""
    by_id = {m.id: m.tokens for m in tokenized}
    out: dict[str, AttributionRecord] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed JSON: {exc.msg}", path, lineno) from exc
            for key in ("id", "tokens", "scores", "prob"):
                if key not in rec:
                    raise DataError(f"missing field {key!r}", path, lineno)
            mid = rec["id"]
            if mid not in by_id:
                raise DataError(f"unknown id: {mid}", path, lineno)
            if mid in out:
                raise DataError(f"duplicate id: {mid}", path, lineno)
            tokens, scores = list(rec["tokens"]), list(rec["scores"])
            expected = by_id[mid]
            if len(scores) != len(tokens):
                raise AlignmentError(
                    f"{mid}: {len(scores)} scores for {len(tokens)} tokens", path, lineno
                )
            for k, (got, want) in enumerate(zip(tokens, expected)):
                if got != want:
                    raise AlignmentError(
                        f"{mid}: token mismatch at position {k}: {got!r} != {want!r}", path, lineno
                    )
            if len(tokens) != len(expected):
                raise AlignmentError(
                    f"{mid}: {len(tokens)} tokens, corpus has {len(expected)} "
                    f"(first difference at position {min(len(tokens), len(expected))})",
                    path,
                    lineno,
                )
            if any(s is None or isinstance(s, bool) or not isinstance(s, (int, float)) for s in scores):
                raise DataError(f"{mid}: missing or non-numeric score", path, lineno)
            out[mid] = AttributionRecord(mid, tuple(tokens), tuple(float(s) for s in scores), float(rec["prob"]))
    return out


def save_attributions(records: Mapping[str, AttributionRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mid in sorted(records):
            r = records[mid]
            fh.write(json.dumps({"id": r.id, "tokens": list(r.tokens), "scores": list(r.scores),
                                 "prob": r.prob}) + "\n")


def load_predictions(path: str | Path, threshold: float = 0.5) -> dict:
    """``{"id", "prob", "pred"?}`` lines; an explicit ``pred`` wins over ``prob >= threshold``."""
    out: dict[str, Prediction] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                prob = float(rec["prob"])
                pred = int(rec["pred"]) if "pred" in rec else int(prob >= threshold)
                out[rec["id"]] = Prediction(rec["id"], prob, pred)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"bad prediction record: {exc}", path, lineno) from exc
    return out


def save_predictions(preds: Mapping[str, Prediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mid in sorted(preds):
            p = preds[mid]
            fh.write(json.dumps({"id": p.id, "prob": p.prob, "pred": p.pred}) + "\n")
