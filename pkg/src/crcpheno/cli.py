"""Command-line entry point: generate, train, predict, evaluate, attribute.

Exit codes: 0 success, 1 I/O failure, 2 configuration or validation error,
3 degenerate data, 4 missing model artifact.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import classifier as clf
from . import lesion_ner as ner
from . import synth
from .errors import (
    DegenerateLabels,
    EmptyBag,
    EmptyVocabulary,
    InvalidConfig,
    InvalidSpec,
    LengthMismatch,
    NoPositiveExamples,
    SchemaError,
    TooFewSites,
)
from .evaluation import classification_report, confusion_matrix, ner_report, render_table
from .pipeline import (
    CorpusData,
    RunConfig,
    RunLog,
    config_to_json,
    load_corpus,
    load_models,
    patient_segments,
    predict_corpus,
    save_models,
    split_train_test,
    train_models,
)
from .preprocess import read_manifest, write_manifest

log = logging.getLogger("crcpheno")

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_DATA, EXIT_MISSING = 0, 1, 2, 3, 4

TRAIN_MANIFEST = "train_manifest.jsonl"
TEST_MANIFEST = "test_manifest.jsonl"
RUN_LOG = "run_log.jsonl"
PREDICTIONS = "predictions.jsonl"
NER_PREDICTIONS = "ner_predictions.jsonl"
EVAL_REPORT = "eval_report.json"
EVAL_TABLE = "eval_table.txt"
ATTRIBUTIONS = "attributions.json"


class MissingArtifact(Exception):
    pass


def _read_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{path}: not valid JSON ({exc})") from exc


def _write_jsonl(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_config(args) -> RunConfig:
    obj = _read_json(args.config) if getattr(args, "config", None) else {}
    cfg = RunConfig.from_json(obj)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "no_ensemble", False):
        cfg.ensemble = False
    cfg.validate()
    return cfg


def _reports_dir(args, cfg: RunConfig) -> Path:
    return Path(args.out) if getattr(args, "out", None) else Path(cfg.reports)


def _default_manifest(cfg: RunConfig) -> Path:
    test = Path(cfg.models) / TEST_MANIFEST
    return test if test.exists() else Path(cfg.corpus) / "manifest.jsonl"


# ---------------------------------------------------------------------------
# Commands


def cmd_generate(args) -> int:
    obj = _read_json(args.config) if args.config else {}
    if not isinstance(obj, dict):
        raise InvalidSpec("corpus spec must be a JSON object")
    if args.seed is not None:
        obj["seed"] = args.seed
    if args.noise_rate is not None:
        obj["noise_rate"] = args.noise_rate
    spec = synth.CorpusSpec.from_json(obj)
    out = Path(args.out or "corpus")
    patients = synth.generate_corpus(spec)
    summary = synth.write_corpus(patients, out, spec)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = load_config(args)
    if args.out:
        cfg.models = args.out
    models_dir = Path(cfg.models)
    data = load_corpus(cfg.corpus)
    train, test = split_train_test(data, cfg)
    models_dir.mkdir(parents=True, exist_ok=True)
    runlog = RunLog(models_dir / RUN_LOG)
    runlog.event("config", **config_to_json(cfg))
    runlog.event("split_site_disjoint", n_train=len(train), n_test=len(test),
                 test_sites=sorted({p.site_id for p in test}))
    write_manifest(models_dir / TRAIN_MANIFEST, train)
    write_manifest(models_dir / TEST_MANIFEST, test)
    models = train_models(data.subset(train), cfg, runlog)
    written = save_models(models, models_dir)
    runlog.event("artifacts_written", files=[p.name for p in written])
    print(json.dumps({"models": [str(p) for p in written], "n_train": len(train), "n_test": len(test)}))
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = load_config(args)
    try:
        models = load_models(cfg.models, with_forest=cfg.ensemble)
    except FileNotFoundError as exc:
        raise MissingArtifact(f"missing model artifact: {exc}") from exc
    manifest = Path(args.manifest) if args.manifest else _default_manifest(cfg)
    data = load_corpus(cfg.corpus, manifest)
    preds, tagged = predict_corpus(models, data, cfg)
    out = _reports_dir(args, cfg)
    _write_jsonl(out / PREDICTIONS, (p.to_json() for p in preds))
    _write_jsonl(out / NER_PREDICTIONS, (_ner_row(t) for t in tagged))
    print(json.dumps({"predictions": str(out / PREDICTIONS), "n_patients": len(preds)}))
    return EXIT_OK


def _ner_row(t: ner.TokenLabels) -> dict:
    spans = ner.reconstruct_entities(t.tokens, t.labels)
    return {
        **t.to_json(),
        "entities": [{"start": s.start, "end": s.end, "text": s.raw_text, "size_mm": s.size_mm} for s in spans],
    }


def cmd_evaluate(args) -> int:
    cfg = load_config(args)
    reports = _reports_dir(args, cfg)
    pred_path = Path(args.predictions) if args.predictions else Path(cfg.reports) / PREDICTIONS
    gold_path = Path(args.gold) if args.gold else _default_manifest(cfg)
    preds = _read_jsonl(pred_path)
    gold = read_manifest(gold_path)
    pred_ids = [p["patient_id"] for p in preds]
    gold_ids = [p.patient_id for p in gold]
    if pred_ids != gold_ids:
        raise LengthMismatch(f"patient ids in {pred_path} do not match {gold_path} in order")
    y_true = [p.label for p in gold]
    if any(y is None for y in y_true):
        raise InvalidConfig(f"{gold_path} has patients without a label")

    result = {}
    tables = []
    for key in ("base_pred", "final_pred"):
        report = classification_report(confusion_matrix(y_true, [p[key] for p in preds]))
        result[key] = report.to_json()
        tables.append(render_table(report, "base" if key == "base_pred" else "final"))

    ner_path = pred_path.parent / NER_PREDICTIONS
    ann_path = Path(cfg.corpus) / "ner_annotations.jsonl"
    if ner_path.exists() and ann_path.exists():
        gold_ann = {a.doc_id: a for a in ner.read_annotations(ann_path)}
        rows = [r for r in _read_jsonl(ner_path) if r["doc_id"] in gold_ann]
        nr = ner_report([gold_ann[r["doc_id"]].labels for r in rows], [r["labels"] for r in rows])
        result["ner"] = nr.to_json()
        tables.append(f"NER entity exact match: P={nr.precision:.3f} R={nr.recall:.3f} F1={nr.f1:.3f}")

    reports.mkdir(parents=True, exist_ok=True)
    (reports / EVAL_REPORT).write_text(json.dumps(result, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    text = "\n\n".join(tables) + "\n"
    (reports / EVAL_TABLE).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def cmd_attribute(args) -> int:
    cfg = load_config(args)
    path = Path(cfg.models) / "classifier.json"
    if not path.exists():
        raise MissingArtifact(f"missing model artifact: {path}")
    model = clf.load_model(path)
    manifest = Path(args.manifest) if args.manifest else _default_manifest(cfg)
    data = load_corpus(cfg.corpus, manifest)
    if args.patients:
        wanted = args.patients.split(",")
        known = {p.patient_id for p in data.patients}
        unknown = [w for w in wanted if w not in known]
        if unknown:
            raise InvalidConfig(f"unknown patient id(s): {', '.join(unknown)}")
        data = data.subset([p for p in data.patients if p.patient_id in set(wanted)])
    result = attribute_patients(model, data, cfg, top_k=args.top_k)
    out = _reports_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps(result, sort_keys=True, indent=1) + "\n"
    (out / ATTRIBUTIONS).write_text(text, encoding="utf-8")
    print(text, end="")
    return EXIT_OK


def attribute_patients(model: clf.LinearModel, data: CorpusData, cfg: RunConfig, top_k: int = 10) -> dict:
    vectors = [model.vectorize(seg.tokens)
               for p in data.patients
               for seg in patient_segments(data.documents[p.patient_id], p.patient_id, cfg)]
    ranked = clf.rank_terms(model, vectors, top_k=top_k)
    return {
        "n_patients": len(data.patients),
        "n_segments": len(vectors),
        "classes": {
            name: {side: [{"term": t, "score": s} for t, s in pairs] for side, pairs in sides.items()}
            for name, sides in ranked.items()
        },
    }


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crcpheno", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the root seed")
        p.add_argument("--out", help=out_help)
        return p

    g = common(sub.add_parser("generate", help="write a synthetic corpus"), "corpus directory (default: corpus)")
    g.add_argument("--noise-rate", type=float, help="per-character OCR substitution rate")
    g.set_defaults(func=cmd_generate)

    t = common(sub.add_parser("train", help="split, train and persist models"), "model directory")
    t.add_argument("--no-ensemble", action="store_true", help="skip the random-forest ensemble")
    t.set_defaults(func=cmd_train)

    p = common(sub.add_parser("predict", help="predict patients in a manifest"), "report directory")
    p.add_argument("--manifest", help="patients to predict (default: held-out test split)")
    p.add_argument("--no-ensemble", action="store_true", help="report the base classifier decision")
    p.set_defaults(func=cmd_predict)

    e = common(sub.add_parser("evaluate", help="score predictions against gold labels"), "report directory")
    e.add_argument("--predictions", help="predictions JSON Lines file")
    e.add_argument("--gold", help="gold manifest (default: held-out test split)")
    e.set_defaults(func=cmd_evaluate)

    a = common(sub.add_parser("attribute", help="rank vocabulary terms by attribution"), "report directory")
    a.add_argument("--manifest", help="patients to attribute over (default: held-out test split)")
    a.add_argument("--patients", help="comma-separated patient ids to restrict to")
    a.add_argument("--top-k", type=int, default=10)
    a.set_defaults(func=cmd_attribute)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (DegenerateLabels, EmptyVocabulary, NoPositiveExamples, TooFewSites, EmptyBag) as exc:
        print(f"error: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvalidConfig, InvalidSpec, SchemaError, LengthMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
