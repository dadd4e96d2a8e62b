"""ARAT task catalog.

The catalog is a versioned JSON document holding the 19 task definitions:
per-task segment sequences, the recommended camera view per segment slot,
and the clinician-authored definition text per segment kind. It is loaded
once, validated strictly, and then immutable, so it is safe to share across
concurrent readers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import NotFound, ValidationFailure

CATALOG_SCHEMA_VERSION = 1

TASK_RANGE = range(1, 20)
GROSS_TASKS = frozenset({17, 18, 19})


class SegmentKind:
    """The six-segment vocabulary that composes every ARAT task."""

    IP = "IP"
    T = "T"
    MTR = "MTR"
    PR = "PR"
    GIP = "GIP"
    GT = "GT"

    ALL = ("IP", "T", "MTR", "PR", "GIP", "GT")
    GROSS = frozenset({"GIP", "GT"})

    @classmethod
    def validate(cls, kind: str) -> str:
        if kind not in cls.ALL:
            raise ValidationFailure("unknown_segment_kind", f"unknown segment kind {kind!r}")
        return kind


class CameraView:
    """The four capture views around the ARAT table."""

    IPSILATERAL = "Ipsilateral"
    CONTRALATERAL = "Contralateral"
    TRANSVERSE = "Transverse"
    BACK = "Back"

    ALL = ("Ipsilateral", "Contralateral", "Transverse", "Back")

    @classmethod
    def validate(cls, view: str) -> str:
        if view not in cls.ALL:
            raise ValidationFailure("unknown_view", f"unknown camera view {view!r}")
        return view


# Zoom metadata per view. The contralateral camera is framed with a 2.5x
# zoom on the hand and object; the others are unzoomed.
DEFAULT_VIEW_ZOOM: dict[str, float] = {
    CameraView.IPSILATERAL: 1.0,
    CameraView.CONTRALATERAL: 2.5,
    CameraView.TRANSVERSE: 1.0,
    CameraView.BACK: 1.0,
}

_SLOT_NAME = re.compile(r"^([A-Z]+)(\d*)$")


@dataclass(frozen=True)
class SegmentSlot:
    """One typed segment position within a task sequence, e.g. MTR2."""

    kind: str
    occurrence: int = 1

    def __post_init__(self):
        SegmentKind.validate(self.kind)
        if self.occurrence < 1:
            raise ValidationFailure("bad_occurrence", "occurrence must be >= 1")

    @property
    def display_name(self) -> str:
        if self.occurrence == 1:
            return self.kind
        return f"{self.kind}{self.occurrence}"

    @classmethod
    def parse(cls, name: str) -> "SegmentSlot":
        m = _SLOT_NAME.match(name.strip())
        if not m:
            raise ValidationFailure("unknown_segment", f"cannot parse segment name {name!r}")
        kind, digits = m.group(1), m.group(2)
        occurrence = int(digits) if digits else 1
        return cls(SegmentKind.validate(kind), occurrence)

    def __str__(self) -> str:
        return self.display_name


@dataclass(frozen=True)
class TaskDefinition:
    task_number: int
    subgroup: str
    title: str
    sequence: tuple[SegmentSlot, ...]
    recommended_views: dict[SegmentSlot, str]
    reference_urls: tuple[str, ...] = ()

    def slot(self, name: str) -> SegmentSlot:
        """Resolve a display name like 'MTR2' to this task's slot."""
        wanted = SegmentSlot.parse(name)
        if wanted not in self.sequence:
            raise NotFound(
                "slot_not_in_task",
                f"segment {wanted.display_name} is not part of task {self.task_number}",
            )
        return wanted


@dataclass(frozen=True)
class Catalog:
    schema_version: int
    tasks: dict[int, TaskDefinition]
    definitions: dict[str, str]
    view_zoom: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_VIEW_ZOOM))

    def task(self, task_number: int) -> TaskDefinition:
        if task_number not in self.tasks:
            raise NotFound("task_out_of_range", f"task {task_number} out of range 1-19")
        return self.tasks[task_number]

    def expected_sequence(self, task_number: int) -> list[SegmentSlot]:
        return list(self.task(task_number).sequence)

    def recommended_view(self, task_number: int, slot: SegmentSlot) -> str:
        task = self.task(task_number)
        if slot not in task.recommended_views:
            raise NotFound(
                "slot_not_in_task",
                f"segment {slot.display_name} is not part of task {task_number}",
            )
        return task.recommended_views[slot]

    def definition(self, kind: str) -> str:
        SegmentKind.validate(kind)
        return self.definitions[kind]

    def to_document(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "view_zoom": dict(self.view_zoom),
            "definitions": dict(self.definitions),
            "tasks": [
                {
                    "task_number": t.task_number,
                    "subgroup": t.subgroup,
                    "title": t.title,
                    "segments": [
                        {
                            "kind": s.kind,
                            "occurrence": s.occurrence,
                            "view": t.recommended_views[s],
                        }
                        for s in t.sequence
                    ],
                    **({"reference_urls": list(t.reference_urls)} if t.reference_urls else {}),
                }
                for t in sorted(self.tasks.values(), key=lambda t: t.task_number)
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_document(), indent=2)


def _parse_task(entry: dict) -> TaskDefinition:
    try:
        number = int(entry["task_number"])
    except (KeyError, TypeError, ValueError):
        raise ValidationFailure("bad_task_entry", f"task entry missing a usable task_number: {entry!r}")
    if number not in TASK_RANGE:
        raise ValidationFailure("task_out_of_range", f"task {number} out of range 1-19")

    segments = entry.get("segments") or []
    if not segments:
        raise ValidationFailure("empty_sequence", f"task {number} has an empty segment sequence")

    sequence: list[SegmentSlot] = []
    views: dict[SegmentSlot, str] = {}
    for seg in segments:
        slot = SegmentSlot(SegmentKind.validate(seg["kind"]), int(seg.get("occurrence", 1)))
        if "view" not in seg:
            raise ValidationFailure(
                "missing_view", f"task {number} segment {slot.display_name} has no recommended view"
            )
        if slot in views:
            raise ValidationFailure(
                "duplicate_slot", f"task {number} lists segment {slot.display_name} twice"
            )
        sequence.append(slot)
        views[slot] = CameraView.validate(seg["view"])

    # occurrence indices per kind must run 1..n in sequence order
    seen: dict[str, int] = {}
    for slot in sequence:
        expected = seen.get(slot.kind, 0) + 1
        if slot.occurrence != expected:
            raise ValidationFailure(
                "bad_occurrence_order",
                f"task {number}: {slot.kind} occurrence {slot.occurrence} where {expected} expected",
            )
        seen[slot.kind] = expected

    kinds = {s.kind for s in sequence}
    if number in GROSS_TASKS:
        if kinds - SegmentKind.GROSS:
            raise ValidationFailure(
                "subgroup_violation", f"task {number} may only contain GIP/GT segments"
            )
        if "GIP" not in kinds or "GT" not in kinds:
            raise ValidationFailure(
                "missing_required_segment", f"task {number} needs at least one GIP and one GT"
            )
    else:
        if kinds & SegmentKind.GROSS:
            raise ValidationFailure(
                "subgroup_violation", f"task {number} may not contain GIP/GT segments"
            )
        if "IP" not in kinds or "T" not in kinds:
            raise ValidationFailure(
                "missing_required_segment", f"task {number} needs at least one IP and one T"
            )

    return TaskDefinition(
        task_number=number,
        subgroup=str(entry.get("subgroup", "")),
        title=str(entry.get("title", "")),
        sequence=tuple(sequence),
        recommended_views=views,
        reference_urls=tuple(entry.get("reference_urls", ())),
    )


def parse_catalog(document: dict) -> Catalog:
    """Validate a parsed catalog document and build the immutable Catalog."""
    version = document.get("schema_version")
    if version != CATALOG_SCHEMA_VERSION:
        raise ValidationFailure(
            "unsupported_schema_version",
            f"catalog schema_version {version!r} is not supported (expected {CATALOG_SCHEMA_VERSION})",
        )

    tasks: dict[int, TaskDefinition] = {}
    for entry in document.get("tasks", []):
        task = _parse_task(entry)
        if task.task_number in tasks:
            raise ValidationFailure("duplicate_task", f"duplicate task {task.task_number}")
        tasks[task.task_number] = task
    missing = [n for n in TASK_RANGE if n not in tasks]
    if missing:
        raise ValidationFailure("incomplete_catalog", f"catalog missing tasks {missing}")

    raw_defs = document.get("definitions", {})
    definitions: dict[str, str] = {}
    for kind in SegmentKind.ALL:
        text = str(raw_defs.get(kind, "") or "").strip()
        if not text:
            raise ValidationFailure("missing_definition", f"no definition text for segment kind {kind}")
        definitions[kind] = text

    view_zoom = dict(DEFAULT_VIEW_ZOOM)
    for view, zoom in (document.get("view_zoom") or {}).items():
        CameraView.validate(view)
        zoom = float(zoom)
        if zoom <= 0:
            raise ValidationFailure("bad_zoom", f"zoom for {view} must be positive")
        view_zoom[view] = zoom

    return Catalog(
        schema_version=CATALOG_SCHEMA_VERSION,
        tasks=tasks,
        definitions=definitions,
        view_zoom=view_zoom,
    )


def load_catalog(path: str | Path) -> Catalog:
    """Load and validate a catalog JSON file. Rejects partial catalogs."""
    try:
        document = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationFailure("bad_catalog_json", f"catalog is not valid JSON: {exc}")
    return parse_catalog(document)


def default_catalog_path() -> Path:
    return Path(str(resources.files("aratlab").joinpath("data/default_catalog.json")))


def load_default_catalog() -> Catalog:
    return load_catalog(default_catalog_path())
