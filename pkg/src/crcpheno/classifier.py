"""Bag-of-words cancer status classifier with multiple-instance aggregation.

Segments are featurized as L2-normalized tf-idf unigram vectors and scored by
a one-vs-rest linear hinge-loss model. Segment margins become probabilities
through a softmax; a patient's probabilities are the class-wise maximum over
their segments, passed through a softmax again.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, NamedTuple, Protocol, Sequence

import numpy as np

from .errors import DegenerateLabels, EmptyBag, EmptyGrid, EmptyVocabulary, SchemaError
from .preprocess import DOCSEP, Segment
from .rules import CancerStatus

SCHEMA_VERSION = 1
N_CLASSES = len(CancerStatus)
CLASS_NAMES = tuple(c.name for c in CancerStatus)


class ClassProbs(NamedTuple):
    p_neg: float
    p_naa: float
    p_aa: float
    p_crc: float

    @classmethod
    def from_array(cls, arr) -> "ClassProbs":
        return cls(*(float(v) for v in arr))

    def argmax(self) -> CancerStatus:
        return CancerStatus(int(np.argmax(self)))


class SegmentClassifier(Protocol):
    """What the pipeline needs from a classifier backend."""

    def segment_probs(self, tokens: Sequence[str]) -> ClassProbs: ...

    def patient_probs(self, segments: Sequence[Segment]) -> ClassProbs: ...


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max())
    return e / e.sum()


def _tokens_of(seg) -> Sequence[str]:
    return seg.tokens if isinstance(seg, Segment) else seg


# ---------------------------------------------------------------------------
# tf-idf


@dataclass
class Vocabulary:
    terms: dict[str, int]
    document_frequency: list[int]
    n_documents: int

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def idf(self) -> np.ndarray:
        df = np.asarray(self.document_frequency, dtype=float)
        return np.log((1.0 + self.n_documents) / (1.0 + df)) + 1.0

    def index_to_term(self) -> list[str]:
        out = [""] * len(self.terms)
        for term, i in self.terms.items():
            out[i] = term
        return out


@dataclass(frozen=True)
class TfIdfVector:
    indices: np.ndarray
    values: np.ndarray

    def dense(self, size: int) -> np.ndarray:
        out = np.zeros(size)
        out[self.indices] = self.values
        return out


def build_vocabulary(segments: Sequence, min_df: int = 10) -> Vocabulary:
    """Unigram vocabulary over segments (each segment counts as one document)."""
    if not segments:
        raise EmptyVocabulary("cannot build a vocabulary from an empty corpus")
    df: dict[str, int] = {}
    for seg in segments:
        for term in set(_tokens_of(seg)):
            df[term] = df.get(term, 0) + 1
    df.pop(DOCSEP, None)
    kept = sorted(t for t, n in df.items() if n >= min_df)
    if not kept:
        raise EmptyVocabulary(f"no term reaches min_df={min_df}")
    return Vocabulary(
        terms={t: i for i, t in enumerate(kept)},
        document_frequency=[df[t] for t in kept],
        n_documents=len(segments),
    )


def tfidf_transform(tokens: Sequence[str], vocab: Vocabulary, idf: np.ndarray | None = None) -> TfIdfVector:
    if idf is None:
        idf = vocab.idf
    counts: dict[int, int] = {}
    for tok in tokens:
        i = vocab.terms.get(tok)
        if i is not None:
            counts[i] = counts.get(i, 0) + 1
    if not counts:
        return TfIdfVector(np.zeros(0, dtype=np.int64), np.zeros(0))
    idx = np.array(sorted(counts), dtype=np.int64)
    vals = np.array([counts[i] for i in idx], dtype=float) * idf[idx]
    return TfIdfVector(idx, vals / np.linalg.norm(vals))


def tfidf_matrix(segments: Sequence, vocab: Vocabulary) -> np.ndarray:
    idf = vocab.idf
    X = np.zeros((len(segments), len(vocab)))
    for r, seg in enumerate(segments):
        v = tfidf_transform(_tokens_of(seg), vocab, idf)
        X[r, v.indices] = v.values
    return X


# ---------------------------------------------------------------------------
# Linear model


@dataclass(frozen=True)
class LinearHyper:
    C: float = 1.0
    epochs: int = 80
    batch_size: int = 16
    eta0: float = 2.0


@dataclass
class LinearModel:
    weights: np.ndarray  # (n_classes, V), rows in CancerStatus order
    biases: np.ndarray
    hyper: LinearHyper = field(default_factory=LinearHyper)
    seed: int = 0
    vocab: Vocabulary | None = None

    def margins(self, X) -> np.ndarray:
        return np.asarray(X) @ self.weights.T + self.biases

    def vectorize(self, tokens: Sequence[str]) -> np.ndarray:
        return tfidf_transform(tokens, self.vocab).dense(self.weights.shape[1])

    def segment_probs(self, tokens: Sequence[str]) -> ClassProbs:
        return predict_segment(self, self.vectorize(tokens))

    def patient_probs(self, segments: Sequence) -> ClassProbs:
        return aggregate_patient([self.segment_probs(_tokens_of(s)) for s in segments])


def _as_matrix(X) -> np.ndarray:
    if isinstance(X, np.ndarray):
        return X.astype(float, copy=False)
    rows = list(X)
    if rows and isinstance(rows[0], TfIdfVector):
        width = 1 + max((int(v.indices.max()) for v in rows if len(v.indices)), default=-1)
        return np.stack([v.dense(width) for v in rows])
    return np.asarray(rows, dtype=float)


def train_linear(
    X,
    y: Sequence,
    hyper: LinearHyper = LinearHyper(),
    seed: int = 0,
    n_features: int | None = None,
) -> LinearModel:
    """One-vs-rest L2-regularized hinge loss by mini-batch subgradient descent.

    Minimizes ``lam/2 |w|^2 + mean(hinge)`` per class with ``lam = 1/(C n)``
    and step size ``eta0 / (1 + eta0 lam t)``. Biases are not regularized.
    Each epoch visits samples in an order drawn from ``seed``.
    """
    X = _as_matrix(X)
    if n_features is not None and X.shape[1] < n_features:
        X = np.pad(X, ((0, 0), (0, n_features - X.shape[1])))
    labels = np.array([int(CancerStatus(v) if not isinstance(v, str) else CancerStatus[v]) for v in y])
    n, d = X.shape
    if n == 0 or n != len(labels):
        raise ValueError(f"need matching non-empty X and y, got {n} rows and {len(labels)} labels")
    if len(np.unique(labels)) < 2:
        raise DegenerateLabels("training labels contain a single class")

    Y = np.where(labels[:, None] == np.arange(N_CLASSES)[None, :], 1.0, -1.0)
    lam = 1.0 / (hyper.C * n)
    W = np.zeros((N_CLASSES, d))
    b = np.zeros(N_CLASSES)
    rng = np.random.default_rng(seed)
    t = 0
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch_size):
            batch = order[start : start + hyper.batch_size]
            eta = hyper.eta0 / (1.0 + hyper.eta0 * lam * t)
            Xb, Yb = X[batch], Y[batch]
            active = (Yb * (Xb @ W.T + b)) < 1.0  # (batch, classes)
            coef = np.where(active, Yb, 0.0)
            grad_w = lam * W - coef.T @ Xb / len(batch)
            grad_b = -coef.mean(axis=0)
            W -= eta * grad_w
            b -= eta * grad_b
            t += 1
    return LinearModel(weights=W, biases=b, hyper=hyper, seed=seed)


def predict_segment(model: LinearModel, v) -> ClassProbs:
    if isinstance(v, TfIdfVector):
        v = v.dense(model.weights.shape[1])
    return ClassProbs.from_array(softmax(model.margins(v)))


def aggregate_patient(segment_probs: Sequence) -> ClassProbs:
    """Class-wise max over segments, renormalized with a softmax."""
    if len(segment_probs) == 0:
        raise EmptyBag("a patient needs at least one segment")
    pooled = np.max(np.asarray(segment_probs, dtype=float), axis=0)
    return ClassProbs.from_array(softmax(pooled))


def predict_patient(model: LinearModel, segments: Sequence) -> ClassProbs:
    if not segments:
        segments = [[]]
    return model.patient_probs(segments)


# ---------------------------------------------------------------------------
# Attribution


def integrated_gradients(
    grad_fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    baseline: np.ndarray | None = None,
    steps: int = 256,
) -> np.ndarray:
    """Midpoint Riemann approximation of the integrated-gradients path integral."""
    x = np.asarray(x, dtype=float)
    baseline = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=float)
    alphas = (np.arange(steps) + 0.5) / steps
    total = np.zeros_like(x)
    for a in alphas:
        total += grad_fn(baseline + a * (x - baseline))
    return (x - baseline) * total / steps


def attribute(model: LinearModel, v, target: int | CancerStatus, steps: int = 256) -> np.ndarray:
    """Per-feature attribution of the target-class margin against a zero baseline."""
    if isinstance(v, TfIdfVector):
        v = v.dense(model.weights.shape[1])
    w = model.weights[int(target)]
    return integrated_gradients(lambda _: w, v, steps=steps)


def attribute_closed_form(model: LinearModel, v, target: int | CancerStatus) -> np.ndarray:
    if isinstance(v, TfIdfVector):
        v = v.dense(model.weights.shape[1])
    return model.weights[int(target)] * np.asarray(v, dtype=float)


def rank_terms(
    model: LinearModel,
    vectors: Sequence[np.ndarray],
    top_k: int = 10,
    steps: int | None = None,
) -> dict[str, dict[str, list[tuple[str, float]]]]:
    """Top positive and negative vocabulary terms per class.

    Attributions are averaged over ``vectors`` (one tf-idf row per
    segment). Terms with zero mean attribution are never ranked. With
    ``steps`` set the path integral is used instead of the closed form.
    """
    if model.vocab is None:
        raise ValueError("model has no vocabulary attached")
    terms = model.vocab.index_to_term()
    out = {}
    for k, name in enumerate(CLASS_NAMES):
        if vectors:
            rows = [attribute(model, v, k, steps) if steps else attribute_closed_form(model, v, k)
                    for v in vectors]
            mean = np.mean(rows, axis=0)
        else:
            mean = np.zeros(len(terms))
        order = np.argsort(-mean, kind="stable")
        pos = [(terms[i], float(mean[i])) for i in order[:top_k] if mean[i] > 0]
        order = np.argsort(mean, kind="stable")
        neg = [(terms[i], float(mean[i])) for i in order[:top_k] if mean[i] < 0]
        out[name] = {"positive": pos, "negative": neg}
    return out


# ---------------------------------------------------------------------------
# Model selection


def bag_predictions(model: LinearModel, bags: Sequence[np.ndarray]) -> list[CancerStatus]:
    preds = []
    for bag in bags:
        probs = [softmax(m) for m in model.margins(np.atleast_2d(bag))]
        preds.append(aggregate_patient(probs).argmax())
    return preds


def grid_search(
    train: tuple,
    val: tuple,
    grid: Iterable[LinearHyper],
    seed: int = 0,
) -> tuple[LinearHyper, list[tuple[LinearHyper, float]]]:
    """Exhaustive search scored by patient-level validation macro-F1.

    ``train`` is ``(X, y)`` over segments, ``val`` is ``(bags, labels)`` where
    each bag is the tf-idf matrix of one patient's segments. Ties go to the
    smaller ``C``.
    """
    from .evaluation import classification_report, confusion_matrix

    grid = list(grid)
    if not grid:
        raise EmptyGrid("hyperparameter grid is empty")
    X, y = train
    bags, labels = val
    scored = []
    for hyper in grid:
        model = train_linear(X, y, hyper, seed=seed)
        preds = bag_predictions(model, bags)
        f1 = classification_report(confusion_matrix(labels, preds)).macro_f1
        scored.append((hyper, f1))
    best = min(scored, key=lambda hs: (-hs[1], hs[0].C))[0]
    return best, scored


# ---------------------------------------------------------------------------
# Persistence


def model_to_json(model: LinearModel) -> dict:
    if model.vocab is None:
        raise ValueError("model has no vocabulary attached")
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "linear_ovr_hinge",
        "classes": list(CLASS_NAMES),
        "vocabulary": model.vocab.index_to_term(),
        "document_frequency": list(model.vocab.document_frequency),
        "n_documents": model.vocab.n_documents,
        "idf": model.vocab.idf.tolist(),
        "weights": model.weights.tolist(),
        "biases": model.biases.tolist(),
        "hyperparameters": vars(model.hyper).copy(),
        "seed": model.seed,
    }


def model_from_json(obj: dict) -> LinearModel:
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported classifier schema_version {obj.get('schema_version')!r}")
    terms = obj["vocabulary"]
    vocab = Vocabulary(
        terms={t: i for i, t in enumerate(terms)},
        document_frequency=list(obj["document_frequency"]),
        n_documents=int(obj["n_documents"]),
    )
    return LinearModel(
        weights=np.asarray(obj["weights"], dtype=float).reshape(N_CLASSES, len(terms)),
        biases=np.asarray(obj["biases"], dtype=float),
        hyper=LinearHyper(**obj["hyperparameters"]),
        seed=int(obj["seed"]),
        vocab=vocab,
    )


def save_model(model: LinearModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_json(model), sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> LinearModel:
    return model_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_classifier(
    segments: Sequence,
    labels: Sequence,
    hyper: LinearHyper = LinearHyper(),
    min_df: int = 10,
    seed: int = 0,
) -> LinearModel:
    """Build the vocabulary on ``segments`` and train on their tf-idf vectors."""
    vocab = build_vocabulary(segments, min_df=min_df)
    model = train_linear(tfidf_matrix(segments, vocab), labels, hyper, seed=seed)
    model.vocab = vocab
    return model


def margin_gap(model: LinearModel, v: np.ndarray, target: int) -> float:
    """margin(v) - margin(0) for one class."""
    return float(model.weights[target] @ v)

