"""OCR document parsing, diagnosis-section extraction and segmentation.

Reports arrive as OCR output: an ordered list of text blocks, each with a
page-relative bounding box. Only the blocks near a diagnosis keyword are
kept; each patient's kept text is concatenated and cut into overlapping
segments for the classifier.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InvalidConfig, SchemaError

DOC_TYPES = ("colonoscopy", "pathology", "surgical_pathology", "radiology", "other")
LABELS = ("NEG", "NAA", "AA", "CRC")

SECTION_KEYWORDS = (
    "diagnosis",
    "finding",
    "impression",
    "diagnoses",
    "findings",
    "impressions",
    "polyp",
)
MAX_SECTION_BLOCKS = 10
MAX_SECTION_WORDS = 100
DEFAULT_OVERLAP = 10
DEFAULT_MAX_SEGMENT_LEN = 512
DOCSEP = "[DOCSEP]"

# Decimal numbers and OCR-damaged "0:2" survive as one token.
_TOKEN_RE = re.compile(r"\d+(?:[.:]\d+)*|[^\W\d_]+|[^\w\s]|_")


@dataclass(frozen=True)
class BoundingBox:
    page: int
    x0: float
    y0: float
    x1: float
    y1: float

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


@dataclass(frozen=True)
class TextBlock:
    index: int
    box: BoundingBox
    text: str


@dataclass
class OcrDocument:
    doc_id: str
    patient_id: str
    doc_type: str
    blocks: list[TextBlock] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "patient_id": self.patient_id,
            "doc_type": self.doc_type,
            "blocks": [
                {"page": b.box.page, "box": b.box.as_list(), "text": b.text}
                for b in self.blocks
            ],
        }


@dataclass(frozen=True)
class ExtractedSection:
    tokens: list[str]
    source_block_indices: list[int]
    matched_keyword: str
    match_block_index: int


@dataclass(frozen=True)
class Segment:
    patient_id: str
    tokens: list[str]
    start_offset: int


@dataclass
class Patient:
    """One manifest row. ``label`` and ``index_lesion_size_mm`` are gold values, if known."""

    patient_id: str
    site_id: str
    label: str | None = None
    index_lesion_size_mm: float | None = None
    doc_paths: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "site_id": self.site_id,
            "label": self.label,
            "index_lesion_size_mm": self.index_lesion_size_mm,
            "doc_paths": list(self.doc_paths),
        }


# ---------------------------------------------------------------------------
# OCR schema


def _require(obj: dict, key: str, kind, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = obj[key]
    # bool is an int subclass; reject it for numeric fields
    if isinstance(value, bool) or not isinstance(value, kind):
        raise SchemaError(f"{where}: field {key!r} has wrong type {type(value).__name__}")
    return value


def _parse_block(i: int, raw: dict) -> TextBlock:
    where = f"block {i}"
    page = _require(raw, "page", int, where)
    if page < 0:
        raise SchemaError(f"{where}: negative page {page}")
    box = _require(raw, "box", list, where)
    if len(box) != 4 or not all(
        isinstance(c, (int, float)) and not isinstance(c, bool) for c in box
    ):
        raise SchemaError(f"{where}: box must be four numbers")
    x0, y0, x1, y1 = (float(c) for c in box)
    if not all(0.0 <= c <= 1.0 for c in (x0, y0, x1, y1)):
        raise SchemaError(f"{where}: coordinate out of [0, 1]")
    if x0 > x1 or y0 > y1:
        raise SchemaError(f"{where}: inverted box {box}")
    text = _require(raw, "text", str, where)
    return TextBlock(index=i, box=BoundingBox(page, x0, y0, x1, y1), text=text)


def parse_ocr_document(raw: bytes) -> OcrDocument:
    try:
        data = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise SchemaError(f"document is not valid UTF-8: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"document is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError("document: top level must be an object")
    doc_id = _require(data, "doc_id", str, "document")
    patient_id = _require(data, "patient_id", str, "document")
    doc_type = _require(data, "doc_type", str, "document")
    if doc_type not in DOC_TYPES:
        raise SchemaError(f"document: unknown doc_type {doc_type!r}")
    blocks = _require(data, "blocks", list, "document")
    return OcrDocument(
        doc_id=doc_id,
        patient_id=patient_id,
        doc_type=doc_type,
        blocks=[_parse_block(i, b) for i, b in enumerate(blocks)],
    )


def serialize_ocr_document(doc: OcrDocument) -> bytes:
    return json.dumps(doc.to_json(), ensure_ascii=False, indent=1).encode("utf-8")


def load_ocr_document(path: str | Path) -> OcrDocument:
    return parse_ocr_document(Path(path).read_bytes())


def read_manifest(path: str | Path) -> list[Patient]:
    patients = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"manifest line {lineno}: {exc}") from exc
            where = f"manifest line {lineno}"
            label = row.get("label")
            if label is not None and label not in LABELS:
                raise SchemaError(f"{where}: unknown label {label!r}")
            size = row.get("index_lesion_size_mm")
            patients.append(
                Patient(
                    patient_id=_require(row, "patient_id", str, where),
                    site_id=_require(row, "site_id", str, where),
                    label=label,
                    index_lesion_size_mm=None if size is None else float(size),
                    doc_paths=list(_require(row, "doc_paths", list, where)),
                )
            )
    return patients


def write_manifest(path: str | Path, patients: Iterable[Patient]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in patients:
            fh.write(json.dumps(p.to_json(), sort_keys=True) + "\n")


def load_patient_documents(patient: Patient, root: str | Path) -> list[OcrDocument]:
    """Load a patient's documents; relative doc paths resolve against ``root``."""
    root = Path(root)
    return [load_ocr_document(root / p) for p in patient.doc_paths]


# ---------------------------------------------------------------------------
# Tokens and keyword matching


def tokenize(text: str) -> list[str]:
    return [m.group().lower() for m in _TOKEN_RE.finditer(text)]


def tokenize_with_spans(text: str) -> list[tuple[str, int, int]]:
    """Like :func:`tokenize` but also returns character offsets."""
    return [(m.group().lower(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def document_tokens(doc: OcrDocument) -> list[str]:
    """All tokens of a document, block by block."""
    out: list[str] = []
    for block in doc.blocks:
        out.extend(tokenize(block.text))
    return out


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit costs."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def fuzzy_keyword_match(token: str, keywords: Sequence[str] = SECTION_KEYWORDS) -> str | None:
    return _fuzzy_match(token, tuple(keywords))


@lru_cache(maxsize=65536)
def _fuzzy_match(token: str, keywords: tuple[str, ...]) -> str | None:
    for kw in keywords:
        if len(kw) >= 5:
            if abs(len(kw) - len(token)) <= 1 and edit_distance(token, kw) <= 1:
                return kw
        elif token == kw:
            return kw
    return None


# ---------------------------------------------------------------------------
# Sections, patients, segments


def extract_diagnosis_sections(
    doc: OcrDocument,
    keywords: Sequence[str] = SECTION_KEYWORDS,
    max_blocks: int = MAX_SECTION_BLOCKS,
    max_words: int = MAX_SECTION_WORDS,
) -> list[ExtractedSection]:
    """Keep text around keyword hits.

    A section starts at a block containing a keyword and extends over at most
    ``max_blocks`` following blocks, stopping once ``max_words`` tokens past
    the end of the match block have been taken. Hits inside an earlier
    section are folded into it.
    """
    block_tokens = [tokenize(b.text) for b in doc.blocks]
    sections: list[ExtractedSection] = []
    covered_until = -1
    for i, toks in enumerate(block_tokens):
        if i <= covered_until:
            continue
        keyword = next((kw for t in toks if (kw := fuzzy_keyword_match(t, keywords))), None)
        if keyword is None:
            continue
        tokens = list(toks)
        indices = [i]
        budget = max_words
        last = min(len(block_tokens) - 1, i + max_blocks)
        for j in range(i + 1, last + 1):
            if budget <= 0:
                break
            take = block_tokens[j][:budget]
            budget -= len(take)
            tokens.extend(take)
            indices.append(j)
        if not tokens:
            continue
        sections.append(
            ExtractedSection(
                tokens=tokens,
                source_block_indices=indices,
                matched_keyword=keyword,
                match_block_index=i,
            )
        )
        covered_until = indices[-1]
    return sections


def concatenate_patient_text(docs: Sequence[OcrDocument], **section_kwargs) -> list[str]:
    per_doc = []
    for doc in docs:
        toks = [t for s in extract_diagnosis_sections(doc, **section_kwargs) for t in s.tokens]
        if toks:
            per_doc.append(toks)
    out: list[str] = []
    for k, toks in enumerate(per_doc):
        if k:
            out.append(DOCSEP)
        out.extend(toks)
    return out


def segment_tokens(
    tokens: Sequence[str],
    max_len: int = DEFAULT_MAX_SEGMENT_LEN,
    overlap: int = DEFAULT_OVERLAP,
    patient_id: str = "",
) -> list[Segment]:
    if overlap < 0 or max_len <= overlap:
        raise InvalidConfig(f"need max_len > overlap >= 0, got {max_len=} {overlap=}")
    step = max_len - overlap
    segments = []
    start = 0
    n = len(tokens)
    while start < n:
        segments.append(Segment(patient_id, list(tokens[start : start + max_len]), start))
        if start + max_len >= n:
            break
        start += step
    return segments


def patient_segments(
    docs: Sequence[OcrDocument],
    patient_id: str,
    max_len: int = DEFAULT_MAX_SEGMENT_LEN,
    overlap: int = DEFAULT_OVERLAP,
) -> list[Segment]:
    """Segments for one patient; never empty (no sections gives one empty segment)."""
    segs = segment_tokens(concatenate_patient_text(docs), max_len, overlap, patient_id)
    return segs or [Segment(patient_id, [], 0)]
