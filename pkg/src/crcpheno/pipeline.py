"""End-to-end training and inference over a corpus directory.

A corpus directory holds ``manifest.jsonl`` (one patient per line),
the OCR documents it references, and optionally ``ner_annotations.jsonl``
with token-level lesion size labels per document.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import classifier as clf
from . import ensemble as ens
from . import lesion_ner as ner
from .errors import InvalidConfig
from .evaluation import classification_report, confusion_matrix, split_by_site, stratified_split
from .preprocess import (
    DEFAULT_MAX_SEGMENT_LEN,
    DEFAULT_OVERLAP,
    SECTION_KEYWORDS,
    OcrDocument,
    Patient,
    Segment,
    concatenate_patient_text,
    document_tokens,
    load_patient_documents,
    read_manifest,
    segment_tokens,
)
from .rules import CancerStatus

log = logging.getLogger(__name__)

CLASSIFIER_FILE = "classifier.json"
TAGGER_FILE = "tagger.json"
FOREST_FILE = "forest.json"

# Offsets from the root seed for each consumer of randomness.
SEED_OFFSETS = {"site_split": 0, "val_split": 1, "classifier": 2, "tagger": 3, "forest": 4, "ner_sample": 5}


@dataclass
class RunConfig:
    corpus: str = "corpus"
    models: str = "models"
    reports: str = "reports"
    max_segment_len: int = DEFAULT_MAX_SEGMENT_LEN
    overlap: int = DEFAULT_OVERLAP
    min_df: int = 10
    keywords: list[str] = field(default_factory=lambda: list(SECTION_KEYWORDS))
    c_grid: list[float] = field(default_factory=lambda: [0.01, 1.0, 100.0])
    epochs: int = 80
    batch_size: int = 16
    eta0: float = 2.0
    ner_epochs: int = 5
    ner_max_docs: int = 500
    test_fraction: float = 0.2
    val_fraction: float = 0.1
    seed: int = 0
    ensemble: bool = True
    ensemble_fit: str = "train"
    n_trees: int = 10
    max_depth: int = 10

    def validate(self) -> None:
        if self.overlap < 0 or self.max_segment_len <= self.overlap:
            raise InvalidConfig("overlap must be non-negative and smaller than max_segment_len")
        if self.min_df < 1:
            raise InvalidConfig("min_df must be at least 1")
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise InvalidConfig("c_grid must be a non-empty list of positive numbers")
        if not 0.0 < self.test_fraction < 1.0:
            raise InvalidConfig("test_fraction must lie in (0, 1)")
        if not 0.0 < self.val_fraction < 1.0:
            raise InvalidConfig("val_fraction must lie in (0, 1)")
        if self.ensemble_fit not in ("train", "heldout"):
            raise InvalidConfig("ensemble_fit must be 'train' or 'heldout'")
        if self.epochs < 1 or self.ner_epochs < 1 or self.batch_size < 1:
            raise InvalidConfig("epochs and batch_size must be positive")

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        if not isinstance(obj, dict):
            raise InvalidConfig("config must be a JSON object")
        flat = dict(obj)
        paths = flat.pop("paths", {}) or {}
        flat.update(paths)
        unknown = set(flat) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidConfig(f"unknown config field(s): {', '.join(sorted(unknown))}")
        try:
            cfg = cls(**flat)
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from exc
        cfg.validate()
        return cfg

    def seed_for(self, consumer: str) -> int:
        return self.seed + SEED_OFFSETS[consumer]

    def hyper_grid(self) -> list[clf.LinearHyper]:
        return [clf.LinearHyper(C=float(c), epochs=self.epochs, batch_size=self.batch_size, eta0=self.eta0)
                for c in self.c_grid]


class RunLog:
    """JSON Lines event log; every event carries a wall-clock timestamp."""

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path else None
        self.events: list[dict] = []
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def event(self, name: str, **fields) -> None:
        record = {"ts": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "event": name, **fields}
        self.events.append(record)
        log.info("%s %s", name, fields)
        if self.path:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")


@dataclass
class CorpusData:
    """Patients with their documents loaded, plus any gold NER annotations."""

    patients: list[Patient]
    documents: dict[str, list[OcrDocument]]
    annotations: dict[str, ner.TokenLabels] = field(default_factory=dict)

    def subset(self, patients: Sequence[Patient]) -> "CorpusData":
        return CorpusData(list(patients), self.documents, self.annotations)


def load_corpus(corpus_dir: str | Path, manifest: str | Path | None = None) -> CorpusData:
    corpus_dir = Path(corpus_dir)
    patients = read_manifest(manifest or corpus_dir / "manifest.jsonl")
    documents = {p.patient_id: load_patient_documents(p, corpus_dir) for p in patients}
    annotations = {}
    ann_path = corpus_dir / "ner_annotations.jsonl"
    if ann_path.exists():
        annotations = {a.doc_id: a for a in ner.read_annotations(ann_path)}
    return CorpusData(patients, documents, annotations)


def patient_segments(docs: Sequence[OcrDocument], patient_id: str, cfg: RunConfig) -> list[Segment]:
    tokens = concatenate_patient_text(docs, keywords=tuple(cfg.keywords))
    segs = segment_tokens(tokens, cfg.max_segment_len, cfg.overlap, patient_id)
    return segs or [Segment(patient_id, [], 0)]


@dataclass
class TrainedModels:
    classifier: clf.LinearModel
    tagger: ner.TaggerModel
    forest: ens.ForestModel | None = None


@dataclass
class PatientPrediction:
    patient_id: str
    probs: clf.ClassProbs
    base_pred: CancerStatus
    ner_size_mm: float
    size_flag: int
    final_pred: CancerStatus

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "probs": dict(zip(clf.CLASS_NAMES, self.probs)),
            "base_pred": self.base_pred.name,
            "ner_size_mm": self.ner_size_mm,
            "size_flag": self.size_flag,
            "final_pred": self.final_pred.name,
        }


def _require_labels(patients: Sequence[Patient]) -> list[CancerStatus]:
    missing = [p.patient_id for p in patients if p.label is None]
    if missing:
        raise InvalidConfig(f"training patients without a label: {missing[:5]}")
    return [CancerStatus[p.label] for p in patients]


def split_train_test(data: CorpusData, cfg: RunConfig) -> tuple[list[Patient], list[Patient]]:
    return split_by_site(data.patients, cfg.test_fraction, cfg.seed_for("site_split"))


def train_models(data: CorpusData, cfg: RunConfig, runlog: RunLog | None = None) -> TrainedModels:
    """Train classifier, tagger and (optionally) the forest on ``data.patients``."""
    runlog = runlog or RunLog()
    patients = data.patients
    labels = _require_labels(patients)
    seg_by_patient = {p.patient_id: patient_segments(data.documents[p.patient_id], p.patient_id, cfg)
                      for p in patients}

    fit_idx, val_idx = stratified_split(patients, labels, cfg.val_fraction, cfg.seed_for("val_split"))
    fit_patients = [patients[i] for i in fit_idx]
    val_patients = [patients[i] for i in val_idx]
    runlog.event("split_train_validation", n_train=len(fit_patients), n_validation=len(val_patients))

    fit_segments = [s for p in fit_patients for s in seg_by_patient[p.patient_id]]
    fit_labels = [CancerStatus[p.label] for p in fit_patients for _ in seg_by_patient[p.patient_id]]
    vocab = clf.build_vocabulary(fit_segments, min_df=cfg.min_df)
    X = clf.tfidf_matrix(fit_segments, vocab)
    bags = [clf.tfidf_matrix(seg_by_patient[p.patient_id], vocab) for p in val_patients]
    val_labels = [CancerStatus[p.label] for p in val_patients]
    best, scored = clf.grid_search((X, fit_labels), (bags, val_labels), cfg.hyper_grid(),
                                   seed=cfg.seed_for("classifier"))
    runlog.event("grid_search", vocabulary_size=len(vocab),
                 scores=[{"C": h.C, "val_macro_f1": f} for h, f in scored], selected_C=best.C)
    model = clf.train_linear(X, fit_labels, best, seed=cfg.seed_for("classifier"))
    model.vocab = vocab
    val_preds = [model.patient_probs(seg_by_patient[p.patient_id]).argmax() for p in val_patients]
    val_f1 = classification_report(confusion_matrix(val_labels, val_preds)).macro_f1 if val_patients else None
    runlog.event("classifier_trained", C=best.C, validation_macro_f1=val_f1)

    tagger = train_tagger_for(data, fit_patients, cfg)
    runlog.event("tagger_trained", n_features=len(tagger.weights))

    forest = None
    if cfg.ensemble:
        forest_patients = fit_patients if cfg.ensemble_fit == "train" else val_patients
        feats, ys = [], []
        for p in forest_patients:
            probs = model.patient_probs(seg_by_patient[p.patient_id])
            flag = ner.binarize_size(p.index_lesion_size_mm or 0.0)
            feats.append(ens.build_features(probs, flag))
            ys.append(CancerStatus[p.label])
        forest = ens.train_forest(feats, ys, n_trees=cfg.n_trees, max_depth=cfg.max_depth,
                                  seed=cfg.seed_for("forest"))
        if val_patients:
            preds = [predict_patient(TrainedModels(model, tagger, forest), data.documents[p.patient_id],
                                     p.patient_id, cfg).final_pred for p in val_patients]
            ens_f1 = classification_report(confusion_matrix(val_labels, preds)).macro_f1
        else:
            ens_f1 = None
        runlog.event("forest_trained", fit_on=cfg.ensemble_fit, n_rows=len(feats),
                     validation_macro_f1=ens_f1)
    return TrainedModels(model, tagger, forest)


def train_tagger_for(data: CorpusData, patients: Sequence[Patient], cfg: RunConfig) -> ner.TaggerModel:
    docs = [a for p in patients for d in data.documents[p.patient_id]
            if (a := data.annotations.get(d.doc_id)) is not None]
    if len(docs) > cfg.ner_max_docs:
        rng = np.random.default_rng(cfg.seed_for("ner_sample"))
        keep = sorted(rng.choice(len(docs), cfg.ner_max_docs, replace=False))
        docs = [docs[i] for i in keep]
    return ner.train_tagger(docs, epochs=cfg.ner_epochs, seed=cfg.seed_for("tagger"))


def tag_documents(tagger: ner.TaggerModel, docs: Sequence[OcrDocument]) -> list[ner.TokenLabels]:
    out = []
    for d in docs:
        tokens = document_tokens(d)
        out.append(ner.TokenLabels(d.doc_id, tokens, ner.tag(tagger, tokens)))
    return out


def predict_patient(
    models: TrainedModels,
    docs: Sequence[OcrDocument],
    patient_id: str,
    cfg: RunConfig,
    tagged: Sequence[ner.TokenLabels] | None = None,
) -> PatientPrediction:
    probs = models.classifier.patient_probs(patient_segments(docs, patient_id, cfg))
    base = probs.argmax()
    if tagged is None:
        tagged = tag_documents(models.tagger, docs)
    spans = [s for t in tagged for s in ner.reconstruct_entities(t.tokens, t.labels)]
    size = ner.patient_lesion_size(spans)
    flag = ner.binarize_size(size)
    final = base
    if models.forest is not None:
        final, _ = ens.predict_forest(models.forest, ens.build_features(probs, flag))
    return PatientPrediction(patient_id, probs, base, size, flag, final)


def predict_corpus(
    models: TrainedModels, data: CorpusData, cfg: RunConfig
) -> tuple[list[PatientPrediction], list[ner.TokenLabels]]:
    preds, tagged_all = [], []
    for p in data.patients:
        docs = data.documents[p.patient_id]
        tagged = tag_documents(models.tagger, docs)
        tagged_all.extend(tagged)
        preds.append(predict_patient(models, docs, p.patient_id, cfg, tagged))
    return preds, tagged_all


def save_models(models: TrainedModels, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / CLASSIFIER_FILE, out / TAGGER_FILE]
    clf.save_model(models.classifier, written[0])
    ner.save_tagger(models.tagger, written[1])
    forest_path = out / FOREST_FILE
    if models.forest is not None:
        ens.save_forest(models.forest, forest_path)
        written.append(forest_path)
    elif forest_path.exists():
        forest_path.unlink()
    return written


def load_models(model_dir: str | Path, with_forest: bool = True) -> TrainedModels:
    """Raises FileNotFoundError naming the first missing artifact."""
    model_dir = Path(model_dir)
    needed = [CLASSIFIER_FILE, TAGGER_FILE] + ([FOREST_FILE] if with_forest else [])
    for name in needed:
        if not (model_dir / name).exists():
            raise FileNotFoundError(str(model_dir / name))
    return TrainedModels(
        clf.load_model(model_dir / CLASSIFIER_FILE),
        ner.load_tagger(model_dir / TAGGER_FILE),
        ens.load_forest(model_dir / FOREST_FILE) if with_forest else None,
    )


def config_to_json(cfg: RunConfig) -> dict:
    return asdict(cfg)


def corpus_from_synthetic(patients) -> CorpusData:
    """In-memory :class:`CorpusData` from generated patients (no files written)."""
    return CorpusData(
        patients=[sp.patient for sp in patients],
        documents={sp.patient.patient_id: sp.documents for sp in patients},
        annotations={a.doc_id: a for sp in patients for a in sp.annotations},
    )
