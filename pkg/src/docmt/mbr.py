"""Minimum-Bayes-risk selection over a candidate set with pairwise BLEU."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .bleu import BleuConfig, sentence_bleu
from .core import SchemaError


class Origin(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    SAMPLED = "sampled"


@dataclass(frozen=True)
class Candidate:
    text: str
    origin: Origin = Origin.SAMPLED
    sample_index: Optional[int] = None

    def __post_init__(self):
        if (self.sample_index is not None) != (self.origin is Origin.SAMPLED):
            raise SchemaError("sample_index present iff origin is sampled")

    @classmethod
    def from_record(cls, record: dict) -> "Candidate":
        return cls(
            text=record["text"],
            origin=Origin(record.get("origin", "sampled")),
            sample_index=record.get("sample_index"),
        )

    def to_record(self) -> dict:
        rec = {"text": self.text, "origin": self.origin.value}
        if self.sample_index is not None:
            rec["sample_index"] = self.sample_index
        return rec


@dataclass(frozen=True)
class CandidateSet:
    segment_id: str
    candidates: tuple[Candidate, ...]
    meta: Optional[dict] = None

    def __post_init__(self):
        if not self.candidates:
            raise SchemaError(f"candidate set {self.segment_id!r} is empty")
        det = [i for i, c in enumerate(self.candidates)
               if c.origin is Origin.DETERMINISTIC]
        if len(det) > 1:
            raise SchemaError("at most one deterministic candidate allowed")
        if det and det[0] != 0:
            raise SchemaError("deterministic candidate must be at index 0")
        indices = [c.sample_index for c in self.candidates
                   if c.origin is Origin.SAMPLED]
        if len(indices) != len(set(indices)):
            raise SchemaError("sample_index must be unique among sampled candidates")

    @classmethod
    def from_record(cls, record: dict) -> "CandidateSet":
        if "segment_id" not in record:
            raise SchemaError("candidate-set record missing 'segment_id'")
        if "candidates" not in record:
            raise SchemaError("candidate-set record missing 'candidates'")
        return cls(
            segment_id=str(record["segment_id"]),
            candidates=tuple(Candidate.from_record(c) for c in record["candidates"]),
            meta=record.get("meta"),
        )

    def to_record(self) -> dict:
        rec = {
            "segment_id": self.segment_id,
            "candidates": [c.to_record() for c in self.candidates],
        }
        if self.meta:
            rec["meta"] = self.meta
        return rec


@dataclass(frozen=True)
class MbrResult:
    segment_id: str
    selected_index: int
    selected_text: str
    expected_utilities: tuple[float, ...]
    utility_matrix: Optional[tuple[tuple[float, ...], ...]] = None

    def to_record(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "selected_index": self.selected_index,
            "selected_text": self.selected_text,
            "expected_utilities": list(self.expected_utilities),
        }


def mbr_select(candidate_set: CandidateSet,
               bleu_config: BleuConfig = BleuConfig(),
               keep_matrix: bool = False) -> MbrResult:
    """Pick the candidate with the highest mean pairwise BLEU against the
    other candidates (candidate under evaluation is always the hypothesis,
    self-similarity excluded). Ties break toward the lowest index, which
    privileges the deterministic candidate at index 0. A singleton set gets
    expected utility 1.0 by convention.
    """
    cands = candidate_set.candidates
    n = len(cands)
    if n == 1:
        return MbrResult(
            segment_id=candidate_set.segment_id,
            selected_index=0,
            selected_text=cands[0].text,
            expected_utilities=(1.0,),
            utility_matrix=((1.0,),) if keep_matrix else None,
        )
    matrix = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i == j:
                matrix[i][j] = 1.0
                continue
            matrix[i][j] = sentence_bleu(cands[i].text, [cands[j].text],
                                         bleu_config).score
    utilities = tuple(
        sum(matrix[i][j] for j in range(n) if j != i) / (n - 1) for i in range(n)
    )
    best = max(range(n), key=lambda i: (utilities[i], -i))
    return MbrResult(
        segment_id=candidate_set.segment_id,
        selected_index=best,
        selected_text=cands[best].text,
        expected_utilities=utilities,
        utility_matrix=tuple(tuple(row) for row in matrix) if keep_matrix else None,
    )


def mbr_batch(sets: Iterable[CandidateSet],
              bleu_config: BleuConfig = BleuConfig(),
              parallelism: int = 1) -> Iterator[MbrResult]:
    """Order-preserving parallel map of mbr_select over candidate sets."""
    if parallelism < 1:
        raise SchemaError("parallelism must be >= 1")
    if parallelism == 1:
        for cs in sets:
            yield _select_with_context(cs, bleu_config)
        return
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        yield from pool.map(lambda cs: _select_with_context(cs, bleu_config), sets)


def _select_with_context(cs: CandidateSet, bleu_config: BleuConfig) -> MbrResult:
    try:
        return mbr_select(cs, bleu_config)
    except Exception as exc:
        raise SchemaError(f"MBR selection failed for segment {cs.segment_id!r}: {exc}") from exc
