"""Colorectal cancer status from structured lesion attributes.

Status is decided per lesion by the first matching rule in severity order
(CRC, then AA, then NAA, then NEG); a patient takes the most severe status
over their lesions.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from enum import IntEnum
from typing import Iterable, Sequence

ADVANCED_SIZE_MM = 10.0

LESION_TYPES = ("adenoma", "ssa_p", "hp", "tsa", "carcinoma")
LOCATIONS = ("sigmoid", "rectum", "other", "unknown")
STAGES = ("I", "II", "III", "IV")


class CancerStatus(IntEnum):
    NEG = 0
    NAA = 1
    AA = 2
    CRC = 3


@dataclass(frozen=True)
class Lesion:
    lesion_type: str
    size_mm: float | None = None
    villous: bool = False
    high_grade_dysplasia: bool = False
    carcinoma_in_situ: bool = False
    cytological_dysplasia: bool = False
    location: str = "unknown"
    stage: str | None = None

    def __post_init__(self):
        if self.lesion_type not in LESION_TYPES:
            raise ValueError(f"unknown lesion_type {self.lesion_type!r}")
        if self.location not in LOCATIONS:
            raise ValueError(f"unknown location {self.location!r}")
        if self.stage is not None:
            if self.lesion_type != "carcinoma":
                raise ValueError("stage is only valid for carcinoma")
            if self.stage not in STAGES:
                raise ValueError(f"unknown stage {self.stage!r}")
        if self.size_mm is not None and not self.size_mm >= 0:
            raise ValueError(f"size_mm must be non-negative, got {self.size_mm}")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "Lesion":
        return cls(**obj)


@dataclass(frozen=True)
class LesionVerdict:
    status: CancerStatus
    rule_id: str
    covered: bool = True


def _is_large(lesion: Lesion) -> bool:
    # unknown size is treated as < 1.0 cm
    return lesion.size_mm is not None and lesion.size_mm >= ADVANCED_SIZE_MM


def classify_lesion(lesion: Lesion) -> LesionVerdict:
    t = lesion.lesion_type
    if t == "carcinoma":
        return LesionVerdict(CancerStatus.CRC, "crc_any_stage")
    if t == "adenoma" and (lesion.carcinoma_in_situ or lesion.high_grade_dysplasia):
        return LesionVerdict(CancerStatus.AA, "aa_adenoma_cis_or_hgd")
    if t == "adenoma" and lesion.villous:
        return LesionVerdict(CancerStatus.AA, "aa_adenoma_villous")
    if t == "adenoma" and _is_large(lesion):
        return LesionVerdict(CancerStatus.AA, "aa_adenoma_ge_10mm")
    if t in ("ssa_p", "hp") and _is_large(lesion):
        return LesionVerdict(CancerStatus.AA, "aa_serrated_ge_10mm")
    if t == "tsa":
        return LesionVerdict(CancerStatus.AA, "aa_tsa_any_size")
    if t == "adenoma":
        return LesionVerdict(CancerStatus.NAA, "naa_adenoma_lt_10mm")
    if t == "hp":
        return LesionVerdict(CancerStatus.NEG, "neg_hp_lt_10mm")
    if t == "ssa_p" and not lesion.cytological_dysplasia:
        if lesion.location in ("sigmoid", "rectum", "unknown"):
            # the negative criterion names small SSA/P only outside sigmoid/rectum
            return LesionVerdict(CancerStatus.NEG, "neg_ssap_lt_10mm_location_ambiguous")
        return LesionVerdict(CancerStatus.NEG, "neg_ssap_lt_10mm")
    return LesionVerdict(CancerStatus.NEG, "uncovered", covered=False)


def classify_patient(lesions: Iterable[Lesion]) -> CancerStatus:
    return max((classify_lesion(l).status for l in lesions), default=CancerStatus.NEG)


def select_index_lesion(lesions: Sequence[Lesion]) -> Lesion | None:
    """Most severe lesion; ties go to the larger size, then to the earlier lesion."""
    best = None
    best_key = None
    for lesion in lesions:
        size = lesion.size_mm if lesion.size_mm is not None else float("-inf")
        key = (classify_lesion(lesion).status, size)
        if best_key is None or key > best_key:
            best, best_key = lesion, key
    return best


def index_lesion_size(lesions: Sequence[Lesion]) -> float:
    lesion = select_index_lesion(lesions)
    if lesion is None or lesion.size_mm is None:
        return 0.0
    return float(lesion.size_mm)


def index_lesion_size_unknown(lesions: Sequence[Lesion]) -> bool:
    """True when an index lesion exists but its size is missing (size reported as 0)."""
    lesion = select_index_lesion(lesions)
    return lesion is not None and lesion.size_mm is None


def read_lesions_jsonl(path) -> list[list[Lesion]]:
    """One JSON array of lesions per line."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append([Lesion.from_json(o) for o in json.loads(line)])
    return out


def write_lesions_jsonl(path, lesion_lists: Iterable[Sequence[Lesion]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lesions in lesion_lists:
            fh.write(json.dumps([l.to_json() for l in lesions], sort_keys=True) + "\n")
