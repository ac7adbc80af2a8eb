"""Synthetic colonoscopy/pathology corpora with known ground truth.

Each patient is assigned a target status, lesions consistent with it are
sampled, and the stored label is recomputed from those lesions by the rule
engine. Lesions are rendered into templated report text; every size mention
is tracked as a character span so token-level NER labels stay exact even
after OCR-style character substitutions.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InvalidSpec
from .lesion_ner import TokenLabels
from .preprocess import (
    LABELS,
    BoundingBox,
    OcrDocument,
    Patient,
    TextBlock,
    serialize_ocr_document,
    tokenize_with_spans,
    write_manifest,
)
from .rules import CancerStatus, Lesion, classify_patient, index_lesion_size, write_lesions_jsonl

# Train+validation class counts of the reference cohort: 1221 / 482 / 273 / 173.
DEFAULT_CLASS_MIX = (1221 / 2149, 482 / 2149, 273 / 2149, 173 / 2149)
DEFAULT_DOCS_PER_PATIENT = (0.45, 0.35, 0.15, 0.05)

OCR_CONFUSIONS = {".": ":", "o": "a", "l": "1", "i": "l", "e": "c", "u": "v"}


@dataclass
class CorpusSpec:
    n_patients: int = 1000
    class_mix: tuple[float, ...] = DEFAULT_CLASS_MIX
    n_sites: int = 68
    docs_per_patient: tuple[float, ...] = DEFAULT_DOCS_PER_PATIENT
    noise_rate: float = 0.0
    seed: int = 0
    confounders: bool = False

    def validate(self) -> None:
        if isinstance(self.n_patients, bool) or not isinstance(self.n_patients, int) or self.n_patients < 1:
            raise InvalidSpec(f"n_patients must be a positive integer, got {self.n_patients!r}")
        mix = self.class_mix
        if len(mix) != len(LABELS) or any(not isinstance(p, (int, float)) or p < 0 for p in mix):
            raise InvalidSpec(f"class_mix must be {len(LABELS)} non-negative numbers, got {mix!r}")
        if abs(sum(mix) - 1.0) > 1e-6:
            raise InvalidSpec(f"class_mix must sum to 1, got {sum(mix)}")
        if isinstance(self.n_sites, bool) or not isinstance(self.n_sites, int) or self.n_sites < 1:
            raise InvalidSpec(f"n_sites must be a positive integer, got {self.n_sites!r}")
        dpp = self.docs_per_patient
        if not dpp or len(dpp) > 4 or any(p < 0 for p in dpp) or abs(sum(dpp) - 1.0) > 1e-6:
            raise InvalidSpec(
                f"docs_per_patient must give probabilities for 1..4 documents summing to 1, got {dpp!r}"
            )
        if not isinstance(self.noise_rate, (int, float)) or not 0.0 <= self.noise_rate <= 1.0:
            raise InvalidSpec(f"noise_rate must lie in [0, 1], got {self.noise_rate!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise InvalidSpec(f"seed must be an integer, got {self.seed!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "CorpusSpec":
        if not isinstance(obj, dict):
            raise InvalidSpec("corpus spec must be a JSON object")
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise InvalidSpec(f"unknown corpus spec field(s): {', '.join(sorted(unknown))}")
        kwargs = dict(obj)
        for key in ("class_mix", "docs_per_patient"):
            if key in kwargs:
                value = kwargs[key]
                if isinstance(value, dict) and key == "class_mix":
                    value = [value.get(l, 0.0) for l in LABELS]
                if not isinstance(value, (list, tuple)):
                    raise InvalidSpec(f"{key} must be a list")
                kwargs[key] = tuple(value)
        spec = cls(**kwargs)
        spec.validate()
        return spec

    def to_json(self) -> dict:
        return {
            "n_patients": self.n_patients,
            "class_mix": list(self.class_mix),
            "n_sites": self.n_sites,
            "docs_per_patient": list(self.docs_per_patient),
            "noise_rate": self.noise_rate,
            "seed": self.seed,
            "confounders": self.confounders,
        }


@dataclass
class SyntheticPatient:
    patient: Patient
    lesions: list[Lesion]
    documents: list[OcrDocument]
    annotations: list[TokenLabels] = field(default_factory=list)

    @property
    def label(self) -> CancerStatus:
        return CancerStatus[self.patient.label]


# ---------------------------------------------------------------------------
# Grammar for filler text


GRAMMAR = {
    "CLINIC": ["<PLACE> Endoscopy Center", "<PLACE> Digestive Health", "Gastroenterology Associates of <PLACE>"],
    "LAB": ["<PLACE> Pathology Laboratory", "Department of Pathology, <PLACE> Medical Center"],
    "PLACE": ["Riverside", "Lakeview", "Northgate", "Summit", "Bayshore", "Oak Valley", "Fairmont"],
    "INDICATION": [
        "Indication: screening for colon cancer",
        "Indication: surveillance, personal history of colon polyps",
        "Indication: change in bowel habits",
        "Indication: family history of colon cancer",
        "Indication: iron deficiency anemia",
    ],
    "SEDATION": [
        "Medications: monitored anesthesia care",
        "Sedation: propofol administered by anesthesia",
        "Medications: fentanyl and midazolam",
    ],
    "PREP": ["Bowel preparation was good.", "The quality of the bowel preparation was fair.",
             "Bowel preparation was excellent."],
    "RECOMMEND": [
        "Recommendations: await pathology results.",
        "Recommendations: resume previous diet.",
        "Recommendations: high fiber diet and follow up with primary care.",
        "Recommendations: repeat colonoscopy based on pathology.",
    ],
    "HISTORY": [
        "Clinical history: screening colonoscopy.",
        "Clinical history: surveillance.",
        "Clinical history: rectal bleeding.",
        "Clinical history: abdominal pain.",
    ],
    "SPECIMEN": [
        "Specimen description: received in formalin labeled with the patient name.",
        "Specimen description: multiple fragments of tan soft tissue submitted in toto.",
        "Gross description: received in formalin are fragments of tan mucosa, entirely submitted.",
    ],
    "COMMENT": [
        "Comment: clinical correlation is recommended.",
        "Comment: slides reviewed by a second pathologist.",
        "Electronically signed by the attending pathologist.",
    ],
    "NORMAL_SCOPE": [
        "The entire examined colon appeared normal.",
        "Normal mucosa throughout the colon.",
        "No polyps or masses were identified.",
    ],
    "NEG_PATH": [
        "Colonic mucosa with no diagnostic abnormality. Negative for dysplasia.",
        "Benign colonic mucosa. No evidence of dysplasia or malignancy.",
        "Unremarkable colonic mucosa, negative for dysplasia.",
    ],
    "RADIOLOGY": [
        "CT abdomen and pelvis with contrast.",
        "Technique: axial images obtained after intravenous contrast.",
    ],
    "RAD_IMPRESSION": [
        "Impression: no acute abnormality in the abdomen or pelvis.",
        "Impression: no evidence of metastatic disease.",
        "Impression: stable appearance of the liver.",
    ],
    "OTHER": [
        "Patient instructions: contact the office with questions.",
        "Consent was obtained after discussion of risks and benefits.",
        "Discharge summary: patient tolerated the procedure well.",
    ],
}

_NT_RE = re.compile(r"<([A-Z_]+)>")


def expand(symbol: str, rng: np.random.Generator) -> str:
    """Expand a nonterminal with seeded choices until only terminals remain."""
    options = GRAMMAR[symbol]
    text = options[int(rng.integers(len(options)))]
    return _NT_RE.sub(lambda m: expand(m.group(1), rng), text)


# ---------------------------------------------------------------------------
# Lesion text


LOCATION_TEXT = {
    "sigmoid": ["sigmoid colon"],
    "rectum": ["rectum"],
    "other": ["ascending colon", "transverse colon", "descending colon", "cecum", "hepatic flexure"],
    "unknown": ["colon, site not specified"],
}


class _Text:
    """String builder that records character spans of size mentions."""

    def __init__(self):
        self.parts: list[str] = []
        self.length = 0
        self.spans: list[tuple[int, int]] = []

    def add(self, s: str) -> "_Text":
        self.parts.append(s)
        self.length += len(s)
        return self

    def add_size(self, s: str) -> "_Text":
        self.spans.append((self.length, self.length + len(s)))
        return self.add(s)

    @property
    def text(self) -> str:
        return "".join(self.parts)


def _choice(rng: np.random.Generator, options: Sequence):
    return options[int(rng.integers(len(options)))]


def format_size(size_mm: float, rng: np.random.Generator) -> str:
    """One of "N mm", "0.N cm" (centimeters with one decimal) or "a-b mm"."""
    kinds = ["mm", "cm"]
    if size_mm >= 3 and float(size_mm).is_integer():
        kinds.append("range")
    kind = _choice(rng, kinds)
    if kind == "mm":
        return f"{_num(size_mm)} mm"
    if kind == "cm":
        return f"{size_mm / 10:.1f} cm"
    low = int(size_mm) - int(rng.integers(1, 3))
    return f"{low}-{_num(size_mm)} mm"


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _histology(lesion: Lesion, rng: np.random.Generator) -> str:
    t = lesion.lesion_type
    if t == "adenoma":
        if lesion.villous:
            base = _choice(rng, ["tubulovillous adenoma", "villous adenoma"])
        else:
            base = "tubular adenoma"
        if lesion.carcinoma_in_situ:
            return f"{base} with carcinoma in situ"
        if lesion.high_grade_dysplasia:
            return f"{base} with high-grade dysplasia"
        if rng.random() < 0.3:
            return f"{base} with low-grade dysplasia"
        return base
    if t == "ssa_p":
        base = _choice(rng, ["sessile serrated adenoma", "sessile serrated polyp", "sessile serrated lesion"])
        return f"{base} with cytological dysplasia" if lesion.cytological_dysplasia else base
    if t == "hp":
        return "hyperplastic polyp"
    if t == "tsa":
        return "traditional serrated adenoma"
    grade = _choice(rng, ["well", "moderately", "poorly"])
    return f"invasive adenocarcinoma, {grade} differentiated"


def _render_lesion(lesion: Lesion, rng: np.random.Generator, letter: str = "A") -> _Text:
    out = _Text()
    site = _choice(rng, LOCATION_TEXT[lesion.location])
    procedure = _choice(rng, ["polypectomy", "biopsy", "snare polypectomy"])
    if lesion.lesion_type == "carcinoma":
        procedure = _choice(rng, ["resection", "biopsy", "segmental colectomy"])
    out.add(f"{letter}. {site.capitalize()}, {procedure}: {_histology(lesion, rng).capitalize()}")
    if lesion.size_mm is not None:
        lead = _choice(rng, [", ", ", measuring ", ", size "])
        out.add(lead).add_size(format_size(lesion.size_mm, rng))
    if lesion.stage is not None:
        out.add(f", pathologic stage {lesion.stage}")
    out.add(".")
    return out


def render_lesion_sentence(lesion: Lesion, rng: np.random.Generator) -> tuple[str, list[int]]:
    """Pathology-style finding for one lesion with token-level size labels."""
    rendered = _render_lesion(lesion, rng)
    return rendered.text, _token_labels(rendered.text, rendered.spans)


def _render_scope_finding(lesion: Lesion, rng: np.random.Generator, confounders: bool) -> _Text:
    out = _Text()
    site = _choice(rng, LOCATION_TEXT[lesion.location])
    if lesion.lesion_type == "carcinoma":
        out.add("A ")
        if lesion.size_mm is not None:
            out.add_size(format_size(lesion.size_mm, rng)).add(" ")
        out.add(f"{_choice(rng, ['fungating', 'ulcerated', 'infiltrative'])} mass was found in the {site}")
    else:
        morph = _choice(rng, ["sessile", "pedunculated", "flat", "semi-pedunculated"])
        out.add("A ")
        if lesion.size_mm is not None:
            out.add_size(format_size(lesion.size_mm, rng)).add(" ")
        out.add(f"{morph} polyp was found in the {site}")
    if confounders and rng.random() < 0.6:
        out.add(f", {int(rng.integers(5, 40))} cm from the anal verge")
    out.add(". ")
    out.add(_choice(rng, ["Resected with a cold snare.", "Removed with biopsy forceps.",
                          "Resected with a hot snare.", "Biopsies were taken."]))
    return out


def _token_labels(text: str, spans: Sequence[tuple[int, int]]) -> list[int]:
    return [
        int(any(s < end and start < e for s, e in spans))
        for _, start, end in tokenize_with_spans(text)
    ]


# ---------------------------------------------------------------------------
# Lesion sampling per target status


def _size(rng, low: int, high: int) -> float:
    return float(rng.integers(low, high + 1))


def _location(rng) -> str:
    return _choice(rng, ["sigmoid", "rectum", "other", "other", "other"])


def _small_hp(rng) -> Lesion:
    return Lesion("hp", _size(rng, 2, 9), location=_location(rng))


def _small_ssa(rng) -> Lesion:
    return Lesion("ssa_p", _size(rng, 3, 9), location=_location(rng))


def _small_adenoma(rng, unknown_size_rate: float = 0.05) -> Lesion:
    size = None if rng.random() < unknown_size_rate else _size(rng, 2, 9)
    return Lesion("adenoma", size, location=_location(rng))


def sample_lesions(target: CancerStatus, rng: np.random.Generator) -> list[Lesion]:
    if target == CancerStatus.NEG:
        if rng.random() < 0.5:
            return []
        return [
            _small_hp(rng) if rng.random() < 0.7 else _small_ssa(rng)
            for _ in range(int(rng.integers(1, 3)))
        ]
    if target == CancerStatus.NAA:
        lesions = [_small_adenoma(rng) for _ in range(int(rng.integers(1, 4)))]
        if rng.random() < 0.3:
            lesions.append(_small_hp(rng))
        return lesions
    if target == CancerStatus.AA:
        kind = _choice(rng, ["large_adenoma"] * 9 + ["villous"] * 4 + ["hgd"] * 2 + ["serrated"] * 3 + ["tsa"] * 2)
        loc = _location(rng)
        if kind == "large_adenoma":
            main = Lesion("adenoma", _size(rng, 10, 30), location=loc)
        elif kind == "villous":
            main = Lesion("adenoma", _size(rng, 4, 25), villous=True, location=loc)
        elif kind == "hgd":
            cis = rng.random() < 0.3
            main = Lesion("adenoma", _size(rng, 3, 25), high_grade_dysplasia=not cis,
                          carcinoma_in_situ=cis, location=loc)
        elif kind == "serrated":
            t = _choice(rng, ["ssa_p", "ssa_p", "hp"])
            main = Lesion(t, _size(rng, 10, 25), cytological_dysplasia=(t == "ssa_p" and rng.random() < 0.3),
                          location=loc)
        else:
            main = Lesion("tsa", _size(rng, 4, 20), location=loc)
        extra = [_small_adenoma(rng) if rng.random() < 0.6 else _small_hp(rng)
                 for _ in range(int(rng.integers(0, 3)))]
        lesions = extra + [main]
        order = rng.permutation(len(lesions))
        return [lesions[i] for i in order]
    stage = _choice(rng, ["I", "II", "III", "IV"])
    size = None if rng.random() < 0.3 else _size(rng, 15, 60)
    lesions = [Lesion("carcinoma", size, location=_location(rng), stage=stage)]
    if rng.random() < 0.4:
        lesions.append(_small_adenoma(rng) if rng.random() < 0.5 else Lesion("adenoma", _size(rng, 10, 20)))
    return lesions


# ---------------------------------------------------------------------------
# Documents


class _DocBuilder:
    """Collects blocks with their size spans and lays them out on pages."""

    ROWS_PER_PAGE = 30

    def __init__(self):
        self.blocks: list[tuple[str, list[tuple[int, int]]]] = []

    def line(self, text: str | _Text) -> None:
        if isinstance(text, _Text):
            self.blocks.append((text.text, list(text.spans)))
        else:
            self.blocks.append((text, []))

    def build(self, doc_id: str, patient_id: str, doc_type: str):
        blocks = []
        spans = []
        row_h = 0.9 / self.ROWS_PER_PAGE
        for i, (text, sp) in enumerate(self.blocks):
            page, row = divmod(i, self.ROWS_PER_PAGE)
            y0 = round(0.05 + row * row_h, 6)
            box = BoundingBox(page, 0.08, y0, 0.92, round(y0 + row_h * 0.8, 6))
            blocks.append(TextBlock(i, box, text))
            spans.append(sp)
        return OcrDocument(doc_id, patient_id, doc_type, blocks), spans


def _colonoscopy(lesions, rng, confounders: bool) -> _DocBuilder:
    d = _DocBuilder()
    d.line(expand("CLINIC", rng))
    d.line("Procedure: Colonoscopy")
    d.line(expand("INDICATION", rng))
    d.line(expand("SEDATION", rng))
    d.line("Findings:")
    if confounders:
        d.line(f"The colonoscope was advanced to the cecum, insertion to {int(rng.integers(55, 90))} cm.")
    d.line(expand("PREP", rng))
    scoped = [l for l in lesions if rng.random() < 0.85]
    if not scoped:
        d.line(expand("NORMAL_SCOPE", rng))
    for l in scoped:
        d.line(_render_scope_finding(l, rng, confounders))
    d.line("Impression:")
    if scoped:
        d.line(f"{len(scoped)} lesion{'s' if len(scoped) > 1 else ''} removed or sampled, see findings.")
    else:
        d.line("Normal colonoscopy.")
    d.line(expand("RECOMMEND", rng))
    return d


def _pathology(lesions, rng, confounders: bool, surgical: bool = False) -> _DocBuilder:
    d = _DocBuilder()
    d.line(expand("LAB", rng))
    d.line("Surgical Pathology Report" if surgical else "Pathology Report")
    d.line(expand("HISTORY", rng))
    spec = expand("SPECIMEN", rng)
    if confounders:
        a, b, c = sorted((int(rng.integers(1, 9)) for _ in range(3)), reverse=True)
        spec += f" Aggregate measures 0.{a} x 0.{b} x 0.{c} cm."
    d.line(spec)
    d.line("Final Diagnosis:")
    if not lesions:
        d.line("A. Random colon biopsies: " + expand("NEG_PATH", rng))
    for k, lesion in enumerate(lesions):
        d.line(_render_lesion(lesion, rng, letter=chr(ord("A") + k % 26)))
    d.line(expand("COMMENT", rng))
    return d


def _radiology(rng) -> _DocBuilder:
    d = _DocBuilder()
    d.line(expand("CLINIC", rng).replace("Endoscopy", "Imaging"))
    d.line(expand("RADIOLOGY", rng))
    d.line(expand("RAD_IMPRESSION", rng))
    return d


def _other(rng) -> _DocBuilder:
    d = _DocBuilder()
    d.line(expand("CLINIC", rng))
    d.line(expand("OTHER", rng))
    d.line(expand("OTHER", rng))
    return d


def inject_ocr_noise(doc: OcrDocument, noise_rate: float, rng: np.random.Generator) -> OcrDocument:
    """Independently substitute confusable characters; lengths are preserved."""
    if noise_rate <= 0.0:
        return doc
    blocks = []
    for b in doc.blocks:
        chars = list(b.text)
        for i, ch in enumerate(chars):
            repl = OCR_CONFUSIONS.get(ch.lower())
            if repl is None:
                continue
            if rng.random() < noise_rate:
                chars[i] = repl.upper() if ch.isupper() else repl
        blocks.append(TextBlock(b.index, b.box, "".join(chars)))
    return OcrDocument(doc.doc_id, doc.patient_id, doc.doc_type, blocks)


def document_annotation(doc: OcrDocument, block_spans: Sequence[Sequence[tuple[int, int]]]) -> TokenLabels:
    tokens: list[str] = []
    labels: list[int] = []
    for block, spans in zip(doc.blocks, block_spans):
        for tok, start, end in tokenize_with_spans(block.text):
            tokens.append(tok)
            labels.append(int(any(s < end and start < e for s, e in spans)))
    return TokenLabels(doc.doc_id, tokens, labels)


def _doc_types(target: CancerStatus, k: int, rng) -> list[str]:
    primary = "surgical_pathology" if target == CancerStatus.CRC and rng.random() < 0.6 else "pathology"
    pool = [primary, "colonoscopy", "radiology" if target == CancerStatus.CRC else "other", "other"]
    chosen = pool[:k]
    rank = {"colonoscopy": 0, "pathology": 1, "surgical_pathology": 1, "radiology": 2, "other": 3}
    return sorted(chosen, key=lambda t: rank[t])


def _quota(n: int, mix: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of ``n`` patients to classes."""
    raw = [n * p for p in mix]
    counts = [math.floor(r) for r in raw]
    order = sorted(range(len(mix)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def generate_patient(
    index: int, target: CancerStatus, site_id: str, spec: CorpusSpec
) -> SyntheticPatient:
    rng = np.random.default_rng([spec.seed, index])
    pid = f"P{index:05d}"
    lesions = sample_lesions(target, rng)
    label = classify_patient(lesions)
    k = 1 + int(rng.choice(len(spec.docs_per_patient), p=np.asarray(spec.docs_per_patient)))
    documents, annotations = [], []
    for j, doc_type in enumerate(_doc_types(target, k, rng), 1):
        if doc_type == "colonoscopy":
            builder = _colonoscopy(lesions, rng, spec.confounders)
        elif doc_type in ("pathology", "surgical_pathology"):
            builder = _pathology(lesions, rng, spec.confounders, surgical=doc_type == "surgical_pathology")
        elif doc_type == "radiology":
            builder = _radiology(rng)
        else:
            builder = _other(rng)
        doc, spans = builder.build(f"{pid}-D{j}", pid, doc_type)
        doc = inject_ocr_noise(doc, spec.noise_rate, rng)
        documents.append(doc)
        annotations.append(document_annotation(doc, spans))
    patient = Patient(
        patient_id=pid,
        site_id=site_id,
        label=label.name,
        index_lesion_size_mm=index_lesion_size(lesions),
        doc_paths=[f"docs/{d.doc_id}.json" for d in documents],
    )
    return SyntheticPatient(patient, lesions, documents, annotations)


def generate_corpus(spec: CorpusSpec) -> list[SyntheticPatient]:
    spec.validate()
    rng = np.random.default_rng([spec.seed, 2**31 - 1])
    targets = [CancerStatus(c) for c, n in enumerate(_quota(spec.n_patients, spec.class_mix)) for _ in range(n)]
    targets = [targets[i] for i in rng.permutation(len(targets))]
    site_weights = rng.dirichlet(np.full(spec.n_sites, 4.0))
    sites = rng.choice(spec.n_sites, size=spec.n_patients, p=site_weights)
    width = max(2, len(str(spec.n_sites - 1)))
    return [
        generate_patient(i, t, f"S{int(s):0{width}d}", spec)
        for i, (t, s) in enumerate(zip(targets, sites))
    ]


def corpus_summary(patients: Sequence[SyntheticPatient]) -> dict:
    per_class = {l: 0 for l in LABELS}
    per_site: dict[str, int] = {}
    n_docs = 0
    for sp in patients:
        per_class[sp.patient.label] += 1
        per_site[sp.patient.site_id] = per_site.get(sp.patient.site_id, 0) + 1
        n_docs += len(sp.documents)
    return {
        "n_patients": len(patients),
        "n_documents": n_docs,
        "per_class": per_class,
        "per_site": dict(sorted(per_site.items())),
    }


def write_corpus(patients: Sequence[SyntheticPatient], out_dir: str | Path, spec: CorpusSpec | None = None) -> dict:
    """Write OCR documents, manifest, NER annotations and gold lesions under ``out_dir``."""
    from .lesion_ner import write_annotations

    out = Path(out_dir)
    (out / "docs").mkdir(parents=True, exist_ok=True)
    for sp in patients:
        for doc in sp.documents:
            (out / "docs" / f"{doc.doc_id}.json").write_bytes(serialize_ocr_document(doc))
    write_manifest(out / "manifest.jsonl", (sp.patient for sp in patients))
    write_annotations(out / "ner_annotations.jsonl", (a for sp in patients for a in sp.annotations))
    write_lesions_jsonl(out / "lesions.jsonl", (sp.lesions for sp in patients))
    summary = corpus_summary(patients)
    if spec is not None:
        (out / "corpus_spec.json").write_text(json.dumps(spec.to_json(), sort_keys=True, indent=1) + "\n")
    return summary
