"""Training-data assembly: multi-task mixtures and two-stage
recognize-then-translate conversations."""

from __future__ import annotations

import enum
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional

from .core import SchemaError, Segment, SubTask, Track, TrackKind


class TaskKind(str, enum.Enum):
    OCR_ONLY = "ocr_only"
    MT_ONLY = "mt_only"
    PCOT_CHAINED = "pcot_chained"
    END_TO_END = "end_to_end"


# Stable order used for seeded draws; reordering would change realized draws.
TASK_ORDER = (TaskKind.OCR_ONLY, TaskKind.MT_ONLY,
              TaskKind.PCOT_CHAINED, TaskKind.END_TO_END)

_REQUIRED_FIELDS = {
    TaskKind.OCR_ONLY: ("source_text",),
    TaskKind.MT_ONLY: ("source_text", "reference_translation"),
    TaskKind.PCOT_CHAINED: ("source_text", "reference_translation"),
    TaskKind.END_TO_END: ("image_ref", "reference_translation"),
}

DEFAULT_TEMPLATES = {
    TaskKind.OCR_ONLY: "Recognize all text in the document image.",
    TaskKind.MT_ONLY: "Translate the following text into Chinese:\n{source_text}",
    "pcot_translate": "Now translate the recognized text into Chinese.",
    TaskKind.END_TO_END: "Translate all text in the document image into Chinese.",
}

# Placeholders each template must contain.
_REQUIRED_PLACEHOLDERS = {TaskKind.MT_ONLY: ("{source_text}",)}


@dataclass(frozen=True)
class PromptTemplates:
    """Prompt strings per task; PCOT reuses the recognition prompt for its
    first stage and adds a translate prompt for the second."""

    ocr: str = DEFAULT_TEMPLATES[TaskKind.OCR_ONLY]
    mt: str = DEFAULT_TEMPLATES[TaskKind.MT_ONLY]
    pcot_translate: str = DEFAULT_TEMPLATES["pcot_translate"]
    end_to_end: str = DEFAULT_TEMPLATES[TaskKind.END_TO_END]

    def __post_init__(self):
        if "{source_text}" not in self.mt:
            raise SchemaError("mt template must contain the {source_text} placeholder")
        for name in ("ocr", "pcot_translate", "end_to_end"):
            if not getattr(self, name).strip():
                raise SchemaError(f"{name} template must be non-empty")

    @classmethod
    def from_dict(cls, data: dict) -> "PromptTemplates":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise SchemaError(f"unknown template keys: {sorted(unknown)}")
        return cls(**data)


class Role(str, enum.Enum):
    USER = "user"
    ASSISTANT = "assistant"


@dataclass(frozen=True)
class Turn:
    role: Role
    content: str


@dataclass(frozen=True)
class TrainingExample:
    example_id: str
    turns: tuple[Turn, ...]
    task: TaskKind
    track: Track
    image_ref: Optional[str] = None

    def __post_init__(self):
        if len(self.turns) < 2 or len(self.turns) % 2 != 0:
            raise SchemaError(
                f"example {self.example_id!r}: turns must be even and >= 2"
            )
        for i, turn in enumerate(self.turns):
            expected = Role.USER if i % 2 == 0 else Role.ASSISTANT
            if turn.role is not expected:
                raise SchemaError(
                    f"example {self.example_id!r}: turn {i} must be {expected.value}"
                )
            if turn.role is Role.ASSISTANT and not turn.content:
                raise SchemaError(
                    f"example {self.example_id!r}: assistant turn {i} is empty"
                )
        if self.task is TaskKind.PCOT_CHAINED and len(self.turns) != 4:
            raise SchemaError(
                f"example {self.example_id!r}: chained examples need exactly 4 turns"
            )

    @classmethod
    def from_record(cls, record: dict) -> "TrainingExample":
        for key in ("example_id", "turns", "task", "track"):
            if key not in record:
                raise SchemaError(f"training-example record missing {key!r}")
        track = record["track"]
        return cls(
            example_id=str(record["example_id"]),
            turns=tuple(Turn(Role(t["role"]), t["content"]) for t in record["turns"]),
            task=TaskKind(record["task"]),
            track=Track(TrackKind(track["kind"]), SubTask(track["sub_task"])),
            image_ref=record.get("image_ref"),
        )

    def to_record(self) -> dict:
        rec = {
            "example_id": self.example_id,
            "turns": [{"role": t.role.value, "content": t.content} for t in self.turns],
            "task": self.task.value,
            "track": {"kind": self.track.kind.value,
                      "sub_task": self.track.sub_task.value},
        }
        if self.image_ref is not None:
            rec["image_ref"] = self.image_ref
        return rec


@dataclass(frozen=True)
class MixtureSpec:
    weights: Mapping[TaskKind, float]
    seed: int = 0
    templates: PromptTemplates = PromptTemplates()

    def __post_init__(self):
        weights = {TaskKind(k): float(v) for k, v in self.weights.items()}
        if any(v < 0 for v in weights.values()):
            raise SchemaError("mixture weights must be non-negative")
        if not any(v > 0 for v in weights.values()):
            raise SchemaError("at least one mixture weight must be positive")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureSpec":
        return cls(
            weights={TaskKind(k): v for k, v in data["weights"].items()},
            seed=int(data.get("seed", 0)),
            templates=PromptTemplates.from_dict(data.get("templates", {})),
        )


def feasible(segment: Segment, task: TaskKind) -> bool:
    return all(getattr(segment, f) for f in _REQUIRED_FIELDS[task])


def build_example(segment: Segment, task: TaskKind,
                  templates: PromptTemplates = PromptTemplates(),
                  track: Track = Track(TrackKind.TRACK1_WEBDOC, SubTask.MT)) -> TrainingExample:
    """Build one conversation example for a segment under the given task.

    Chained examples carry four turns: recognize prompt, recognized text,
    translate prompt, translation.
    """
    for fld in _REQUIRED_FIELDS[task]:
        if not getattr(segment, fld):
            raise SchemaError(
                f"segment {segment.id!r}: task {task.value} requires field {fld!r}"
            )
    if task is TaskKind.OCR_ONLY:
        turns = (Turn(Role.USER, templates.ocr),
                 Turn(Role.ASSISTANT, segment.source_text))
    elif task is TaskKind.MT_ONLY:
        turns = (Turn(Role.USER, templates.mt.format(source_text=segment.source_text)),
                 Turn(Role.ASSISTANT, segment.reference_translation))
    elif task is TaskKind.PCOT_CHAINED:
        turns = (Turn(Role.USER, templates.ocr),
                 Turn(Role.ASSISTANT, segment.source_text),
                 Turn(Role.USER, templates.pcot_translate),
                 Turn(Role.ASSISTANT, segment.reference_translation))
    else:
        turns = (Turn(Role.USER, templates.end_to_end),
                 Turn(Role.ASSISTANT, segment.reference_translation))
    return TrainingExample(
        example_id=f"{segment.id}:{task.value}",
        turns=turns,
        task=task,
        track=track,
        image_ref=segment.image_ref,
    )


@dataclass
class MixtureSummary:
    counts: Counter = field(default_factory=Counter)
    skipped: int = 0
    total: int = 0

    def to_record(self) -> dict:
        return {
            "total": self.total,
            "skipped": self.skipped,
            "counts": {k.value: v for k, v in sorted(self.counts.items())},
        }


def build_mixture(segments: Iterable[Segment], spec: MixtureSpec, track: Track,
                  summary: Optional[MixtureSummary] = None) -> Iterator[TrainingExample]:
    """Assign each segment a task by seeded draw from the mixture weights,
    renormalized over the tasks the segment's fields can satisfy.

    Exactly one uniform is consumed per segment that has at least one
    feasible weighted task; infeasible segments are skipped and counted.
    Identical seed and input order reproduce identical output.
    """
    rng = random.Random(spec.seed)
    if summary is None:
        summary = MixtureSummary()
    for segment in segments:
        summary.total += 1
        kinds = [k for k in TASK_ORDER
                 if spec.weights.get(k, 0.0) > 0 and feasible(segment, k)]
        if not kinds:
            summary.skipped += 1
            continue
        total_weight = sum(spec.weights[k] for k in kinds)
        draw = rng.random() * total_weight
        cumulative = 0.0
        chosen = kinds[-1]
        for k in kinds:
            cumulative += spec.weights[k]
            if draw < cumulative:
                chosen = k
                break
        summary.counts[chosen] += 1
        yield build_example(segment, chosen, spec.templates, track)


def dataset_stats(examples_by_split: Mapping[str, Iterable[TrainingExample]]) -> dict:
    """Exact per-track, per-task counts for each split, single streaming pass."""
    tracks: dict = {}
    total = 0
    for split, examples in examples_by_split.items():
        for ex in examples:
            total += 1
            track_stats = tracks.setdefault(ex.track.kind.value, {})
            split_stats = track_stats.setdefault(split, {"count": 0, "tasks": {}})
            split_stats["count"] += 1
            task_counts = split_stats["tasks"]
            task_counts[ex.task.value] = task_counts.get(ex.task.value, 0) + 1
    return {"tracks": tracks, "total": total}
