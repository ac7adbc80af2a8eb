"""Acceptance checks. Each test prints one PASS/FAIL line, repeated in the terminal summary."""

import json
import re
import time
from collections import Counter

import numpy as np
import pytest

from crcpheno import classifier as clf
from crcpheno import lesion_ner as ner
from crcpheno.cli import main
from crcpheno.evaluation import classification_report, confusion_matrix, ner_report
from crcpheno.pipeline import (
    CLASSIFIER_FILE,
    FOREST_FILE,
    TAGGER_FILE,
    RunConfig,
    corpus_from_synthetic,
    predict_corpus,
    split_train_test,
    train_models,
)
from crcpheno.rules import CancerStatus, Lesion, classify_lesion, classify_patient
from crcpheno.synth import CorpusSpec, generate_corpus

NEG, NAA, AA, CRC = CancerStatus


# --- rule engine --------------------------------------------------------------------


GOLDEN = [
    ([Lesion("adenoma", 5.0, villous=True)], AA),
    ([Lesion("hp", 5.0, location="sigmoid")], NEG),
    ([Lesion("adenoma", 9.9)], NAA),
    ([Lesion("ssa_p", 12.0, cytological_dysplasia=False)], AA),
    ([Lesion("carcinoma", stage="II")], CRC),
    ([Lesion("adenoma", 10.0)], AA),
    ([Lesion("hp", 10.0)], AA),
    ([Lesion("tsa", 2.0)], AA),
    ([Lesion("adenoma", 4.0, carcinoma_in_situ=True)], AA),
    ([], NEG),
    ([Lesion("ssa_p", 9.0)], NEG),
    ([Lesion("hp", 9.0, location="rectum")], NEG),
    ([Lesion("carcinoma", 30.0, stage="IV")], CRC),
    ([Lesion("adenoma", 3.0, high_grade_dysplasia=True)], AA),
]


def test_rule_engine_golden_suite(criterion):
    start = time.perf_counter()
    wrong = []
    for lesions, expected in GOLDEN:
        got = classify_patient(lesions)
        single = classify_lesion(lesions[0]).status if lesions else NEG
        if got != expected or single != expected:
            wrong.append((lesions, got))
    elapsed = time.perf_counter() - start
    criterion("rule-engine golden suite", len(GOLDEN) == 14 and not wrong and elapsed < 1.0,
              f"{14 - len(wrong)}/14 exact, {elapsed:.3f}s")


# --- metric oracles -----------------------------------------------------------------


def oracle_class_scores(y_true, y_pred):
    scores = []
    for c in range(4):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c == p)
        pp = sum(1 for p in y_pred if p == c)
        gp = sum(1 for t in y_true if t == c)
        prec = tp / pp if pp else 0.0
        rec = tp / gp if gp else 0.0
        scores.append((prec, rec, 2 * prec * rec / (prec + rec) if prec + rec else 0.0))
    return scores


def oracle_entities(labels):
    text = "".join("1" if v else "0" for v in labels)
    return {(m.start(), m.end()) for m in re.finditer("1+", text)}


def test_metric_oracles(criterion):
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 80))
        y_true = rng.integers(0, 4, n).tolist()
        y_pred = rng.integers(0, 4, n).tolist()
        report = classification_report(confusion_matrix(y_true, y_pred))
        expected = oracle_class_scores(y_true, y_pred)
        for c, (p, r, f) in enumerate(expected):
            got = report.per_class[CancerStatus(c).name]
            worst = max(worst, abs(got.precision - p), abs(got.recall - r), abs(got.f1 - f))
        worst = max(worst, abs(report.macro_f1 - sum(e[2] for e in expected) / 4))
    for _ in range(1000):
        gold, pred = [], []
        for _ in range(int(rng.integers(1, 5))):
            n = int(rng.integers(0, 30))
            gold.append(rng.integers(0, 2, n).tolist())
            pred.append(rng.integers(0, 2, n).tolist())
        r = ner_report(gold, pred)
        tp = sum(len(oracle_entities(g) & oracle_entities(p)) for g, p in zip(gold, pred))
        tpp = sum(len(oracle_entities(p)) for p in pred)
        tgp = sum(len(oracle_entities(g)) for g in gold)
        prec = tp / tpp if tpp else 0.0
        rec = tp / tgp if tgp else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        worst = max(worst, abs(r.precision - prec), abs(r.recall - rec), abs(r.f1 - f1))
    elapsed = time.perf_counter() - start
    criterion("metric oracles", worst <= 1e-12 and elapsed < 10.0, f"max deviation {worst:.1e}, {elapsed:.2f}s")


# --- NER exact match ----------------------------------------------------------------


def test_ner_exact_match_semantics(criterion):
    start = time.perf_counter()
    r = ner_report([[0, 1, 1, 0, 1]], [[0, 1, 1, 0, 0]])
    worked = r.precision == 1.0 and r.recall == 0.5
    rng = np.random.default_rng(7)
    failures = 0
    for _ in range(1000):
        n = int(rng.integers(0, 40))
        spans, pos = [], int(rng.integers(0, 3))
        while True:
            width = int(rng.integers(1, 5))
            if pos + width > n:
                break
            spans.append((pos, pos + width))
            pos += width + int(rng.integers(1, 5))
        labels = [0] * n
        for s, e in spans:
            labels[s:e] = [1] * (e - s)
        got = [(s.start, s.end) for s in ner.reconstruct_entities([f"t{i}" for i in range(n)], labels)]
        failures += got != spans
    elapsed = time.perf_counter() - start
    criterion("NER exact-match semantics", worked and failures == 0 and elapsed < 5.0,
              f"P={r.precision} R={r.recall}, {1000 - failures}/1000 round trips, {elapsed:.2f}s")


# --- MIL aggregation ----------------------------------------------------------------


def test_mil_aggregation(criterion):
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    bad = 0
    for _ in range(1000):
        bag = rng.dirichlet(np.ones(4), size=int(rng.integers(1, 8)))
        pooled = bag.max(axis=0)
        out = clf.aggregate_patient(bag)
        bad += int(np.argmax(out) != np.argmax(pooled)) + int(abs(sum(out) - 1) > 1e-12)
        single = bag[:1]
        bad += int(clf.aggregate_patient(single).argmax() != int(np.argmax(single[0])))
    elapsed = time.perf_counter() - start
    criterion("MIL aggregation", bad == 0 and elapsed < 1.0, f"{bad} violations, {elapsed:.3f}s")


# --- integrated gradients -----------------------------------------------------------


def test_integrated_gradients_completeness(criterion):
    rng = np.random.default_rng(3)
    start = time.perf_counter()
    worst_closed = worst_path = 0.0
    for _ in range(100):
        d = int(rng.integers(1, 300))
        model = clf.LinearModel(rng.normal(size=(4, d)), rng.normal(size=4))
        x = rng.random(d) * (rng.random(d) < 0.3)
        target = int(rng.integers(0, 4))
        delta = model.margins(x)[target] - model.margins(np.zeros(d))[target]
        worst_closed = max(worst_closed, abs(clf.attribute_closed_form(model, x, target).sum() - delta))
        worst_path = max(worst_path, abs(clf.attribute(model, x, target, steps=256).sum() - delta))
    elapsed = time.perf_counter() - start
    criterion("integrated-gradients completeness",
              worst_closed <= 1e-9 and worst_path <= 1e-6 and elapsed < 5.0,
              f"closed {worst_closed:.1e}, path {worst_path:.1e}, {elapsed:.2f}s")


# --- size parsing -------------------------------------------------------------------


def test_size_parsing_vector(criterion):
    cases = {"0.4 cm": 4.0, "0:2cm": 2.0, "3-5 mm": 5.0, "1.0 cm": 10.0, "large": None}
    got = {text: ner.parse_size(text) for text in cases}
    exact = all(
        (got[t] is None and v is None) or (got[t] is not None and v is not None and got[t] == v
                                           and np.float64(got[t]).tobytes() == np.float64(v).tobytes())
        for t, v in cases.items()
    )
    criterion("size parsing vector", exact, json.dumps(got))


# --- end to end on the clean corpus ------------------------------------------------


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture(scope="module")
def clean_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("clean")
    start = time.perf_counter()
    spec = write_json(root / "spec.json", {"n_patients": 2500, "seed": 0, "noise_rate": 0.0})
    cfg = write_json(root / "run.json", {
        "paths": {"corpus": str(root / "corpus"), "models": str(root / "models"), "reports": str(root / "reports")},
        "seed": 0,
        "test_fraction": 0.2,
    })
    codes = [
        main(["generate", "--config", spec, "--out", str(root / "corpus")]),
        main(["train", "--config", cfg]),
        main(["predict", "--config", cfg]),
        main(["evaluate", "--config", cfg]),
    ]
    elapsed = time.perf_counter() - start
    return root, cfg, codes, elapsed


def test_end_to_end_clean(clean_run, criterion):
    root, _, codes, elapsed = clean_run
    report = json.loads((root / "reports" / "eval_report.json").read_text())
    base = report["base_pred"]["macro_f1"]
    ner_f1 = report["ner"]["f1"]
    train = [json.loads(line) for line in (root / "models" / "train_manifest.jsonl").read_text().splitlines()]
    test = [json.loads(line) for line in (root / "models" / "test_manifest.jsonl").read_text().splitlines()]
    disjoint = not {p["site_id"] for p in train} & {p["site_id"] for p in test}
    ok = (codes == [0, 0, 0, 0] and disjoint and len(train) + len(test) == 2500
          and base >= 0.95 and ner_f1 >= 0.90 and elapsed < 300)
    criterion("end-to-end clean synthetic", ok,
              f"train {len(train)} / test {len(test)}, base macro-F1 {base:.3f}, NER F1 {ner_f1:.3f}, "
              f"{elapsed:.1f}s")


def test_determinism(clean_run, tmp_path, criterion):
    root, cfg, _, _ = clean_run
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    names = (CLASSIFIER_FILE, TAGGER_FILE, FOREST_FILE, "train_manifest.jsonl", "test_manifest.jsonl")
    for out in (out_a, out_b):
        assert main(["train", "--config", cfg, "--seed", "0", "--out", str(out / "models")]) == 0
        run_cfg = json.loads(open(cfg).read())
        run_cfg["paths"]["models"] = str(out / "models")
        cfg_path = write_json(out / "run.json", run_cfg)
        assert main(["predict", "--config", cfg_path, "--out", str(out / "reports")]) == 0
    same = [
        (out_a / "models" / n).read_bytes() == (out_b / "models" / n).read_bytes() == (root / "models" / n).read_bytes()
        for n in names
    ]
    for n in ("predictions.jsonl", "ner_predictions.jsonl"):
        same.append((out_a / "reports" / n).read_bytes() == (out_b / "reports" / n).read_bytes()
                    == (root / "reports" / n).read_bytes())
    criterion("determinism", all(same), f"{sum(same)}/{len(same)} artifacts byte-identical across 3 runs")


# --- noisy corpus: ensemble ordering and confusion structure -----------------------


NOISY_SEEDS = (0, 1, 2)


@pytest.fixture(scope="module")
def noisy_runs():
    runs = []
    for seed in NOISY_SEEDS:
        patients = generate_corpus(CorpusSpec(n_patients=2500, seed=seed, noise_rate=0.02, confounders=True))
        data = corpus_from_synthetic(patients)
        cfg = RunConfig(seed=seed)
        train, test = split_train_test(data, cfg)
        models = train_models(data.subset(train), cfg)
        preds, _ = predict_corpus(models, data.subset(test), cfg)
        y = [p.label for p in test]
        base = classification_report(confusion_matrix(y, [p.base_pred for p in preds]))
        final = classification_report(confusion_matrix(y, [p.final_pred for p in preds]))
        runs.append((seed, base, final))
    return runs


def test_ensemble_ordering(noisy_runs, criterion):
    details, ok = [], True
    for seed, base, final in noisy_runs:
        seed_ok = (final.macro_f1 >= base.macro_f1
                   and final.per_class["AA"].f1 >= base.per_class["AA"].f1
                   and final.per_class["NAA"].f1 >= base.per_class["NAA"].f1)
        ok &= seed_ok
        details.append(f"seed {seed}: {base.macro_f1:.3f}->{final.macro_f1:.3f} "
                       f"NAA {base.per_class['NAA'].f1:.3f}->{final.per_class['NAA'].f1:.3f} "
                       f"AA {base.per_class['AA'].f1:.3f}->{final.per_class['AA'].f1:.3f}")
    criterion("ensemble ordering", ok and len(noisy_runs) >= 3, "; ".join(details))


def most_frequent_error(counts, true_class):
    row = {CancerStatus(p).name: int(n) for p, n in enumerate(counts[true_class]) if p != true_class and n}
    if not row:
        return None
    top = max(row.values())
    return sorted(k for k, v in row.items() if v == top)


def test_confusion_structure(noisy_runs, criterion):
    ok, details = True, []
    for seed, _, final in noisy_runs:
        counts = final.confusion.counts
        naa, aa = most_frequent_error(counts, NAA), most_frequent_error(counts, AA)
        ok &= naa == ["AA"] and aa == ["NAA"]
        details.append(f"seed {seed}: NAA->{naa} AA->{aa}")
    criterion("confusion-structure echo", ok, "; ".join(details))
