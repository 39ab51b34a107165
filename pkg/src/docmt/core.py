"""Shared domain types, tokenization primitives, and JSONL I/O."""

from __future__ import annotations

import enum
import json
import os
import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, TypeVar

T = TypeVar("T")


class DocmtError(Exception):
    """Base class for all library errors."""


class JsonlError(DocmtError):
    """Malformed JSONL line; carries path, 1-based line number, and content."""

    def __init__(self, path, line_no: int, content: str, reason: str):
        self.path = str(path)
        self.line_no = line_no
        self.content = content
        super().__init__(f"{path}:{line_no}: {reason}: {content!r}")


class SchemaError(DocmtError):
    """A record is missing a required field or violates a type invariant."""


class AlignmentError(DocmtError):
    """Hypothesis and reference files do not share the expected segment ids."""


class CollectionError(DocmtError):
    """Candidate collection against the serving endpoint failed."""


# CJK Unified Ideographs, Extension A, and CJK punctuation.
_CJK_RANGES = ((0x4E00, 0x9FFF), (0x3400, 0x4DBF), (0x3000, 0x303F))


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in _CJK_RANGES)


class Scheme(str, enum.Enum):
    WHITESPACE = "whitespace"
    CJK_CHAR = "cjk_char"
    MIXED = "mixed"


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    scheme: Scheme

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(text: str, scheme: Scheme = Scheme.MIXED) -> TokenSequence:
    """Split text under the given scheme.

    Whitespace: split on runs of whitespace. CjkChar: every character is a
    token except whitespace, which is dropped. Mixed: CJK characters become
    single-character tokens, everything else splits on whitespace.
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.WHITESPACE:
        toks = text.split()
    elif scheme is Scheme.CJK_CHAR:
        toks = [ch for ch in text if not ch.isspace()]
    else:
        toks = []
        buf: list[str] = []
        for ch in text:
            if ch.isspace():
                if buf:
                    toks.append("".join(buf))
                    buf = []
            elif is_cjk(ch):
                if buf:
                    toks.append("".join(buf))
                    buf = []
                toks.append(ch)
            else:
                buf.append(ch)
        if buf:
            toks.append("".join(buf))
    return TokenSequence(tokens=tuple(toks), scheme=scheme)


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


class TrackKind(str, enum.Enum):
    TRACK1_WEBDOC = "track1"
    TRACK2_ARXIV = "track2"


class SubTask(str, enum.Enum):
    OCR = "ocr"
    MT = "mt"


@dataclass(frozen=True)
class Track:
    kind: TrackKind
    sub_task: SubTask

    def __post_init__(self):
        if self.kind is TrackKind.TRACK2_ARXIV and self.sub_task is not SubTask.MT:
            raise SchemaError("track2 only has an MT sub-task")


@dataclass(frozen=True)
class Segment:
    """One row of a track's dataset: source text, optional reference
    translation, optional document-image reference."""

    id: str
    source_text: str = ""
    reference_translation: Optional[str] = None
    image_ref: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise SchemaError("segment id must be non-empty")
        if not self.source_text and not self.image_ref:
            raise SchemaError(
                f"segment {self.id!r}: at least one of source_text/image_ref required"
            )

    @classmethod
    def from_record(cls, record: dict) -> "Segment":
        if "id" not in record:
            raise SchemaError("segment record missing required field 'id'")
        ref = record.get("reference_translation")
        return cls(
            id=str(record["id"]),
            source_text=nfc(record.get("source_text", "") or ""),
            reference_translation=nfc(ref) if ref is not None else None,
            image_ref=record.get("image_ref"),
        )

    def to_record(self) -> dict:
        rec = {"id": self.id, "source_text": self.source_text}
        if self.reference_translation is not None:
            rec["reference_translation"] = self.reference_translation
        if self.image_ref is not None:
            rec["image_ref"] = self.image_ref
        return rec


def iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    """Yield (1-based line number, parsed record) for each non-empty line."""
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped.strip():
                continue
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise JsonlError(path, line_no, stripped, f"invalid JSON ({exc.msg})")
            if not isinstance(record, dict):
                raise JsonlError(path, line_no, stripped, "expected a JSON object")
            yield line_no, record


def read_jsonl(path, schema: Optional[Callable[[dict], T]] = None) -> Iterator[T]:
    """Stream records from a JSONL file, optionally through a schema parser.

    Schema violations are re-raised with the offending line number attached.
    """
    for line_no, record in iter_jsonl(path):
        if schema is None:
            yield record  # type: ignore[misc]
        else:
            try:
                yield schema(record)
            except SchemaError as exc:
                raise SchemaError(f"{path}:{line_no}: {exc}") from exc


def write_jsonl(records: Iterable, path, encode: Optional[Callable] = None) -> int:
    """Write one record per line, UTF-8, no BOM. Returns the record count."""
    parent = os.path.dirname(os.fspath(path))
    if parent:
        os.makedirs(parent, exist_ok=True)
    count = 0
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for record in records:
                if encode is not None:
                    record = encode(record)
                elif hasattr(record, "to_record"):
                    record = record.to_record()
                fh.write(json.dumps(record, ensure_ascii=False))
                fh.write("\n")
                count += 1
    except OSError as exc:
        raise DocmtError(f"cannot write {path}: {exc}") from exc
    return count
