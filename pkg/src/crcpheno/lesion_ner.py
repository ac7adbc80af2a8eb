"""Lesion size tagging, entity reconstruction and size normalization.

The tagger makes an independent in/out decision per token with an averaged
perceptron over a window of lexical features. Entities are maximal runs of
positive tokens; their text is parsed into millimeters.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .errors import LengthMismatch, NoPositiveExamples, SchemaError

FEATURE_TEMPLATE_VERSION = 1
SCHEMA_VERSION = 1
LARGE_LESION_MM = 10.0

UNIT_WORDS = frozenset({"mm", "cm", "millimeter", "millimeters", "centimeter", "centimeters"})
_NUMERIC_RE = re.compile(r"^\d+(?:[.:]\d+)?$")

_NUM = r"\d+(?:\.\d+)?"
_UNIT = r"(mm|cm)(?![a-z])"
_DIMS_RE = re.compile(rf"({_NUM}(?:\s*[x×*]\s*{_NUM})+)\s*{_UNIT}")
_RANGE_RE = re.compile(rf"({_NUM})\s*(?:-|–|to)\s*({_NUM})\s*{_UNIT}")
_SINGLE_RE = re.compile(rf"({_NUM})\s*{_UNIT}")
_COLON_DECIMAL_RE = re.compile(r"(?<![\d.:])(\d+):(\d+)(?![\d.:])")


@dataclass
class TokenLabels:
    doc_id: str
    tokens: list[str]
    labels: list[int]

    def __post_init__(self):
        if len(self.tokens) != len(self.labels):
            raise LengthMismatch(
                f"{self.doc_id}: {len(self.tokens)} tokens but {len(self.labels)} labels"
            )

    def to_json(self) -> dict:
        return {"doc_id": self.doc_id, "tokens": list(self.tokens), "labels": list(self.labels)}


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    raw_text: str
    size_mm: float | None


class Tagger(Protocol):
    def tag(self, tokens: Sequence[str]) -> list[int]: ...


# ---------------------------------------------------------------------------
# Features


def is_numeric(token: str) -> bool:
    return bool(_NUMERIC_RE.match(token))


def token_shape(token: str) -> str:
    if is_numeric(token):
        return "num"
    if token.isalpha():
        return "alpha"
    if any(c.isdigit() for c in token) and any(c.isalpha() for c in token):
        return "mixed"
    if any(c.isdigit() for c in token):
        return "digits"
    return "punct"


def featurize_token(tokens: Sequence[str], i: int) -> list[str]:
    def at(j: int) -> str:
        if j < 0:
            return "<s>"
        if j >= len(tokens):
            return "</s>"
        return tokens[j].lower()

    cur, prev, nxt = at(i), at(i - 1), at(i + 1)
    cur_num, prev_num, next_num = is_numeric(cur), is_numeric(prev), is_numeric(nxt)
    next_unit, prev_unit = nxt in UNIT_WORDS, prev in UNIT_WORDS
    feats = [
        "bias",
        f"w0={cur}",
        f"w-1={prev}",
        f"w+1={nxt}",
        f"w-2={at(i - 2)}",
        f"w+2={at(i + 2)}",
        f"shape={token_shape(cur)}",
        f"shape-1={token_shape(prev) if i > 0 else '<s>'}",
        f"shape+1={token_shape(nxt) if i + 1 < len(tokens) else '</s>'}",
    ]
    if cur in UNIT_WORDS:
        feats.append("is_unit")
        if prev_num:
            feats.append("is_unit&prev_numeric")
    if cur_num:
        feats.append("is_numeric")
        if ":" in cur:
            feats.append("numeric_has_colon")
        if next_unit:
            feats.append("is_numeric&next_unit")
        if at(i + 2) in UNIT_WORDS:
            feats.append("is_numeric&next2_unit")
    if next_unit:
        feats.append("next_unit")
    if prev_unit:
        feats.append("prev_unit")
    if prev_num and next_num:
        feats.append("between_numerics")
    return feats


# ---------------------------------------------------------------------------
# Averaged perceptron


@dataclass
class TaggerModel:
    weights: dict[str, float]
    template_version: int = FEATURE_TEMPLATE_VERSION
    seed: int = 0
    epochs: int = 5

    def score(self, feats: Iterable[str]) -> float:
        w = self.weights
        return sum(w.get(f, 0.0) for f in feats)

    def tag(self, tokens: Sequence[str]) -> list[int]:
        return tag(self, tokens)


def train_tagger(annotated: Sequence[TokenLabels], epochs: int = 5, seed: int = 0) -> TaggerModel:
    """Averaged perceptron over per-token binary decisions.

    Documents are visited in a seeded order each epoch; averaging uses the
    usual lazy timestamp bookkeeping so the cost per update is proportional
    to the number of active features.
    """
    if not any(any(a.labels) for a in annotated):
        raise NoPositiveExamples("annotations contain no positive token")
    examples = [
        [(featurize_token(a.tokens, i), 1 if y else -1) for i, y in enumerate(a.labels)]
        for a in annotated
    ]
    weights: dict[str, float] = {}
    totals: dict[str, float] = {}
    stamps: dict[str, int] = {}
    step = 0
    rng = np.random.default_rng(seed)
    for _ in range(epochs):
        for d in rng.permutation(len(examples)):
            for feats, y in examples[d]:
                step += 1
                s = sum(weights.get(f, 0.0) for f in feats)
                if (1 if s > 0 else -1) == y:
                    continue
                for f in feats:
                    w = weights.get(f, 0.0)
                    totals[f] = totals.get(f, 0.0) + (step - stamps.get(f, 0)) * w
                    stamps[f] = step
                    weights[f] = w + y
    step += 1
    averaged = {}
    for f, w in weights.items():
        total = totals.get(f, 0.0) + (step - stamps.get(f, 0)) * w
        avg = total / step
        if avg != 0.0:
            averaged[f] = avg
    return TaggerModel(weights=dict(sorted(averaged.items())), seed=seed, epochs=epochs)


def tag(model: TaggerModel, tokens: Sequence[str]) -> list[int]:
    return [1 if model.score(featurize_token(tokens, i)) > 0 else 0 for i in range(len(tokens))]


# ---------------------------------------------------------------------------
# Entities and sizes


def label_runs(labels: Sequence[int]) -> list[tuple[int, int]]:
    """Maximal runs of positive labels as half-open ``(start, end)`` pairs."""
    runs = []
    start = None
    for i, y in enumerate(labels):
        if y and start is None:
            start = i
        elif not y and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(labels)))
    return runs


def reconstruct_entities(tokens: Sequence[str], labels: Sequence[int]) -> list[EntitySpan]:
    if len(tokens) != len(labels):
        raise LengthMismatch(f"{len(tokens)} tokens but {len(labels)} labels")
    spans = []
    for start, end in label_runs(labels):
        raw = " ".join(tokens[start:end])
        spans.append(EntitySpan(start, end, raw, parse_size(raw)))
    return spans


def repair_ocr_digits(text: str) -> str:
    """'0:2cm' -> '0.2cm'."""
    return _COLON_DECIMAL_RE.sub(r"\1.\2", text)


def _to_mm(number: str, unit: str) -> float:
    value = Decimal(number)
    if unit == "cm":
        value *= 10
    return float(value)


def parse_size(raw_text: str) -> float | None:
    """Size in millimeters, or ``None`` when no ``number unit`` pattern is found.

    Ranges and multi-dimension measurements report their largest extent.
    """
    text = repair_ocr_digits(raw_text.lower())
    m = _DIMS_RE.search(text)
    if m:
        numbers = re.findall(_NUM, m.group(1))
        return _to_mm(str(max(Decimal(n) for n in numbers)), m.group(2))
    m = _RANGE_RE.search(text)
    if m:
        return _to_mm(str(max(Decimal(m.group(1)), Decimal(m.group(2)))), m.group(3))
    m = _SINGLE_RE.search(text)
    if m:
        return _to_mm(m.group(1), m.group(2))
    return None


def patient_lesion_size(spans: Iterable[EntitySpan]) -> float:
    return max((s.size_mm for s in spans if s.size_mm is not None), default=0.0)


def binarize_size(size_mm: float) -> int:
    return int(size_mm >= LARGE_LESION_MM)


# ---------------------------------------------------------------------------
# IO


def read_annotations(path: str | Path) -> list[TokenLabels]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            row = json.loads(line)
            try:
                out.append(TokenLabels(row["doc_id"], list(row["tokens"]), [int(v) for v in row["labels"]]))
            except KeyError as exc:
                raise SchemaError(f"annotation line {lineno}: missing field {exc}") from exc
    return out


def write_annotations(path: str | Path, annotations: Iterable[TokenLabels]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for a in annotations:
            fh.write(json.dumps(a.to_json()) + "\n")


def tagger_to_json(model: TaggerModel) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "averaged_perceptron_tagger",
        "template_version": model.template_version,
        "seed": model.seed,
        "epochs": model.epochs,
        "weights": model.weights,
    }


def tagger_from_json(obj: dict) -> TaggerModel:
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported tagger schema_version {obj.get('schema_version')!r}")
    if obj.get("template_version") != FEATURE_TEMPLATE_VERSION:
        raise SchemaError("tagger was trained with a different feature template")
    return TaggerModel(
        weights={k: float(v) for k, v in obj["weights"].items()},
        template_version=obj["template_version"],
        seed=int(obj["seed"]),
        epochs=int(obj["epochs"]),
    )


def save_tagger(model: TaggerModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(tagger_to_json(model), sort_keys=True), encoding="utf-8")


def load_tagger(path: str | Path) -> TaggerModel:
    return tagger_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
