"""Per-track/split/sub-task corpus scoring and report rendering."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from .bleu import BleuConfig, Smoothing, corpus_bleu
from .core import AlignmentError, SchemaError, Segment, SubTask, TrackKind, read_jsonl

# Corpus evaluation defaults to unsmoothed BLEU; floor smoothing is for
# sentence-level utility scoring.
EVAL_BLEU = BleuConfig(smoothing=Smoothing.NONE)

# Column layout: track1 has all four sub-columns, track2 only MT.
COLUMNS = (
    (TrackKind.TRACK1_WEBDOC, "valid", SubTask.OCR),
    (TrackKind.TRACK1_WEBDOC, "valid", SubTask.MT),
    (TrackKind.TRACK1_WEBDOC, "test", SubTask.OCR),
    (TrackKind.TRACK1_WEBDOC, "test", SubTask.MT),
    (TrackKind.TRACK2_ARXIV, "valid", SubTask.MT),
    (TrackKind.TRACK2_ARXIV, "test", SubTask.MT),
)


def config_fingerprint(config: BleuConfig) -> str:
    canonical = json.dumps({
        "max_order": config.max_order,
        "smoothing": config.smoothing.value,
        "epsilon": config.epsilon,
        "tokenization": config.tokenization.value,
    }, sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _cell_key(track: TrackKind, split: str, sub_task: SubTask) -> str:
    return f"{track.value}/{split}/{sub_task.value}"


@dataclass(frozen=True)
class EvalRow:
    system_label: str
    cells: dict = field(default_factory=dict)  # cell key -> BLEU percent or None

    def __post_init__(self):
        for key, value in self.cells.items():
            if value is not None and not 0 <= value <= 100:
                raise SchemaError(f"cell {key} out of range: {value}")
            track = key.split("/", 1)[0]
            if track == TrackKind.TRACK2_ARXIV.value and not key.endswith("/mt"):
                raise SchemaError(f"track2 only has MT cells, got {key}")


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[EvalRow, ...]
    config_fingerprint: str


def _hyp_text(record: dict) -> str:
    for key in ("text", "selected_text", "output_text"):
        if key in record:
            return record[key]
    raise SchemaError("hypothesis record has no text/selected_text/output_text")


def _hyp_id(record: dict) -> str:
    for key in ("id", "segment_id"):
        if key in record:
            return str(record[key])
    raise SchemaError("hypothesis record has no id/segment_id")


def score_subtask(hyp_path, ref_path, sub_task: SubTask,
                  config: BleuConfig = EVAL_BLEU,
                  allow_partial: bool = False,
                  diagnostics_path=None) -> float:
    """Corpus BLEU x 100 over hypothesis/reference pairs joined by id.

    OCR scores recognized text against source ground truth; MT scores
    translation against the reference translation. Unmatched ids are an
    error unless allow_partial is set, in which case they are listed in a
    diagnostics sidecar and excluded.
    """
    sub_task = SubTask(sub_task)
    hypotheses: dict[str, str] = {}
    for record in read_jsonl(hyp_path):
        hypotheses[_hyp_id(record)] = _hyp_text(record)
    references: dict[str, str] = {}
    for segment in read_jsonl(ref_path, schema=Segment.from_record):
        if sub_task is SubTask.OCR:
            references[segment.id] = segment.source_text
        else:
            if segment.reference_translation is None:
                raise SchemaError(
                    f"segment {segment.id!r} has no reference_translation for MT scoring")
            references[segment.id] = segment.reference_translation
    shared = [sid for sid in hypotheses if sid in references]
    missing = sorted(set(hypotheses) ^ set(references))
    if missing and not allow_partial:
        preview = ", ".join(missing[:10])
        raise AlignmentError(
            f"{len(missing)} unmatched segment ids between {hyp_path} and "
            f"{ref_path} (first 10: {preview})")
    if missing and diagnostics_path is not None:
        with open(diagnostics_path, "w", encoding="utf-8") as fh:
            json.dump({"unmatched_ids": missing}, fh, ensure_ascii=False, indent=2)
    if not shared:
        raise AlignmentError(f"no shared segment ids between {hyp_path} and {ref_path}")
    # Sort so scoring is invariant to file line order.
    pairs = [(hypotheses[sid], [references[sid]]) for sid in sorted(shared)]
    return corpus_bleu(pairs, config).score * 100.0


def _fmt(value: Optional[float]) -> str:
    return "/" if value is None else f"{value:.2f}"


def render_report(report: EvalReport, fmt: str = "markdown") -> str:
    """Serialize a report; absent cells render as "/"."""
    headers = [f"{'Valid' if split == 'valid' else 'Test'}-{st.value.upper()}"
               for _, split, st in COLUMNS]
    if fmt == "markdown":
        group = ["track1" if t is TrackKind.TRACK1_WEBDOC else "track2"
                 for t, _, _ in COLUMNS]
        lines = [
            "| | " + " | ".join(group) + " |",
            "| Model | " + " | ".join(headers) + " |",
            "| --- |" + " --- |" * len(COLUMNS),
        ]
        for row in report.rows:
            cells = [_fmt(row.cells.get(_cell_key(*col))) for col in COLUMNS]
            lines.append(f"| {row.system_label} | " + " | ".join(cells) + " |")
        lines.append(f"")
        lines.append(f"config fingerprint: {report.config_fingerprint}")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        lines = ["Model," + ",".join(headers)]
        for row in report.rows:
            cells = [_fmt(row.cells.get(_cell_key(*col))) for col in COLUMNS]
            lines.append(",".join([row.system_label] + cells))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        payload = {
            "config_fingerprint": report.config_fingerprint,
            "rows": [
                {
                    "system_label": row.system_label,
                    "cells": {
                        _cell_key(*col): (
                            None if row.cells.get(_cell_key(*col)) is None
                            else round(row.cells[_cell_key(*col)], 2))
                        for col in COLUMNS
                    },
                }
                for row in report.rows
            ],
        }
        return json.dumps(payload, ensure_ascii=False, indent=2) + "\n"
    raise SchemaError(f"unknown report format {fmt!r}")


def parse_report(text: str) -> EvalReport:
    """Inverse of render_report for the JSON format."""
    payload = json.loads(text)
    rows = tuple(
        EvalRow(system_label=r["system_label"], cells=dict(r["cells"]))
        for r in payload["rows"]
    )
    return EvalReport(rows=rows, config_fingerprint=payload["config_fingerprint"])
