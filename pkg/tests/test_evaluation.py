import re
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crcpheno.errors import LengthMismatch, TooFewSites
from crcpheno.evaluation import (
    classification_report,
    confusion_matrix,
    ner_report,
    render_table,
    split_by_site,
    stratified_split,
)
from crcpheno.preprocess import Patient
from crcpheno.rules import CancerStatus
from crcpheno.synth import CorpusSpec, generate_corpus

NEG, NAA, AA, CRC = CancerStatus

# Rows are true labels, columns predictions, in NEG/NAA/AA/CRC order.
REFERENCE_ERRORS = [
    [1195, 8, 15, 0],
    [7, 456, 17, 1],
    [5, 13, 257, 2],
    [1, 0, 0, 172],
]


def replay(matrix):
    y_true, y_pred = [], []
    for t, row in enumerate(matrix):
        for p, n in enumerate(row):
            y_true += [CancerStatus(t)] * n
            y_pred += [CancerStatus(p)] * n
    return y_true, y_pred


def brute_force_scores(y_true, y_pred):
    """Per-class P/R/F1 straight from the label lists."""
    out = {}
    for c in CancerStatus:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        pp = sum(1 for p in y_pred if p == c)
        gp = sum(1 for t in y_true if t == c)
        prec = tp / pp if pp else 0.0
        rec = tp / gp if gp else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        out[c.name] = (prec, rec, f1, gp)
    return out


def brute_force_entities(labels):
    text = "".join("1" if v else "0" for v in labels)
    return {(m.start(), m.end()) for m in re.finditer("1+", text)}


# --- confusion matrix -----------------------------------------------------------------


def test_replayed_reference_matrix():
    y_true, y_pred = replay(REFERENCE_ERRORS)
    cm = confusion_matrix(y_true, y_pred)
    assert cm.counts.tolist() == REFERENCE_ERRORS
    assert cm.cell("NAA", "AA") == 17
    assert cm.counts[NAA].sum() == 481
    assert cm.total == 2149
    naa_errors = {CancerStatus(p).name: n for p, n in enumerate(REFERENCE_ERRORS[NAA]) if p != NAA}
    aa_errors = {CancerStatus(p).name: n for p, n in enumerate(REFERENCE_ERRORS[AA]) if p != AA}
    assert max(naa_errors, key=naa_errors.get) == "AA" and sum(naa_errors.values()) == 25
    assert max(aa_errors, key=aa_errors.get) == "NAA" and sum(aa_errors.values()) == 20


def test_confusion_basics():
    labels = [NEG, NAA, AA, CRC, AA]
    cm = confusion_matrix(labels, labels)
    assert np.count_nonzero(cm.counts - np.diag(np.diag(cm.counts))) == 0
    one = confusion_matrix(["AA"], ["NAA"])
    assert one.total == 1 and one.cell(AA, NAA) == 1
    with pytest.raises(LengthMismatch):
        confusion_matrix([NEG], [])
    with pytest.raises(LengthMismatch):
        confusion_matrix([], [])


# --- classification report -----------------------------------------------------------------


def test_identity_report():
    labels = list(CancerStatus) * 3
    report = classification_report(confusion_matrix(labels, labels))
    assert report.macro_f1 == 1.0
    assert all(s.f1 == 1.0 for s in report.per_class.values())


def test_absent_class_counts_as_zero():
    report = classification_report(confusion_matrix([NEG, NAA, AA], [NEG, NAA, AA]))
    assert report.per_class["CRC"].f1 == 0.0
    assert report.macro_f1 == 0.75


def test_report_matches_brute_force_on_random_inputs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 60))
        y_true = [CancerStatus(int(v)) for v in rng.integers(0, 4, n)]
        y_pred = [CancerStatus(int(v)) for v in rng.integers(0, 4, n)]
        report = classification_report(confusion_matrix(y_true, y_pred))
        expected = brute_force_scores(y_true, y_pred)
        for name, (p, r, f, support) in expected.items():
            got = report.per_class[name]
            assert abs(got.precision - p) <= 1e-12
            assert abs(got.recall - r) <= 1e-12
            assert abs(got.f1 - f) <= 1e-12
            assert got.support == support
        assert abs(report.macro_f1 - sum(v[2] for v in expected.values()) / 4) <= 1e-12


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=40), st.permutations(range(4)))
def test_macro_f1_invariant_under_relabeling(pairs, perm):
    y_true = [t for t, _ in pairs]
    y_pred = [p for _, p in pairs]
    base = classification_report(confusion_matrix(y_true, y_pred)).macro_f1
    relabeled = classification_report(
        confusion_matrix([perm[t] for t in y_true], [perm[p] for p in y_pred])
    ).macro_f1
    assert abs(base - relabeled) <= 1e-12


def test_report_json_and_table():
    y_true, y_pred = replay(REFERENCE_ERRORS)
    report = classification_report(confusion_matrix(y_true, y_pred))
    obj = report.to_json()
    assert set(obj["per_class"]) == {"NEG", "NAA", "AA", "CRC"}
    assert obj["confusion_matrix"]["counts"] == REFERENCE_ERRORS
    table = render_table(report, "base")
    header = [line for line in table.splitlines() if line.startswith("Model")][0]
    assert [h for h in ("NEG F1", "NAA F1", "AA F1", "CRC F1", "Macro-F1") if h in header] == [
        "NEG F1", "NAA F1", "AA F1", "CRC F1", "Macro-F1"]
    assert f"{report.macro_f1:.3f}" in table


# --- NER report -------------------------------------------------------------------------


def test_ner_worked_example():
    r = ner_report([[0, 1, 1, 0, 1]], [[0, 1, 1, 0, 0]])
    assert (r.tgp, r.tpp, r.tp) == (2, 1, 1)
    assert r.precision == 1.0 and r.recall == 0.5


def test_ner_identical_and_boundary_mismatch():
    r = ner_report([[1, 1, 0, 1]], [[1, 1, 0, 1]])
    assert r.precision == r.recall == r.f1 == 1.0
    r = ner_report([[0, 1, 1, 0, 0]], [[0, 1, 1, 1, 0]])
    assert r.tp == 0


def test_ner_length_checks():
    with pytest.raises(LengthMismatch):
        ner_report([[0, 1]], [])
    with pytest.raises(LengthMismatch):
        ner_report([[0, 1]], [[0, 1, 0]])


def test_ner_matches_brute_force_on_random_inputs():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        docs = int(rng.integers(1, 5))
        gold, pred = [], []
        for _ in range(docs):
            n = int(rng.integers(0, 25))
            gold.append(rng.integers(0, 2, n).tolist())
            pred.append(rng.integers(0, 2, n).tolist())
        r = ner_report(gold, pred)
        tgp = sum(len(brute_force_entities(g)) for g in gold)
        tpp = sum(len(brute_force_entities(p)) for p in pred)
        tp = sum(len(brute_force_entities(g) & brute_force_entities(p)) for g, p in zip(gold, pred))
        prec = tp / tpp if tpp else 0.0
        rec = tp / tgp if tgp else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        assert (r.tp, r.tpp, r.tgp) == (tp, tpp, tgp)
        assert tp <= min(tpp, tgp)
        assert abs(r.precision - prec) <= 1e-12
        assert abs(r.recall - rec) <= 1e-12
        assert abs(r.f1 - f1) <= 1e-12


# --- splits ---------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def multi_site_patients():
    return [sp.patient for sp in generate_corpus(CorpusSpec(n_patients=1000, seed=3))]


def test_two_sites_half_split():
    patients = [Patient(f"P{i}", "A" if i < 5 else "B", "NEG") for i in range(10)]
    train, test = split_by_site(patients, 0.5, seed=0)
    assert {p.site_id for p in train} | {p.site_id for p in test} == {"A", "B"}
    assert len({p.site_id for p in train}) == len({p.site_id for p in test}) == 1


def test_single_site_rejected():
    with pytest.raises(TooFewSites):
        split_by_site([Patient("P", "A", "NEG")], 0.3)


def test_site_split_invariants(multi_site_patients):
    n = len(multi_site_patients)
    for seed in range(20):
        train, test = split_by_site(multi_site_patients, 0.3, seed=seed)
        assert not {p.site_id for p in train} & {p.site_id for p in test}
        assert sorted(p.patient_id for p in train + test) == sorted(p.patient_id for p in multi_site_patients)
        assert 0.25 <= len(test) / n <= 0.35
        again = split_by_site(multi_site_patients, 0.3, seed=seed)
        assert again == (train, test)


def test_site_split_keeps_class_shares_close(multi_site_patients):
    overall = Counter(p.label for p in multi_site_patients)
    n = len(multi_site_patients)
    train, test = split_by_site(multi_site_patients, 0.3, seed=0)
    test_counts = Counter(p.label for p in test)
    for label, count in overall.items():
        assert abs(test_counts[label] / len(test) - count / n) <= 0.10


def test_stratified_split():
    labels = [NEG] * 50 + [NAA] * 30 + [AA] * 20
    kept, held = stratified_split(labels, labels, 0.1, seed=0)
    assert sorted(kept + held) == list(range(100))
    assert Counter(labels[i] for i in held) == {NEG: 5, NAA: 3, AA: 2}
    assert stratified_split(labels, labels, 0.1, seed=0) == (kept, held)
