"""Append-only event log of annotator actions.

Every click a segmentor or rater makes becomes one immutable event row;
corrections are new events, never edits. The flat export reproduces the
legacy tabular format (one row per frame-bearing confirmation step, unset
frames exported as the sentinel 0) while the internal model keeps unset
fields as real absence, because frame 0 is a legal frame index.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .catalog import Catalog, CameraView, SegmentSlot
from .db import Database
from .errors import NotFound, ValidationFailure

HANDS = ("left", "right")

IMPORT_ACTOR = "legacy-import"

FLAT_CSV_HEADER = (
    "Patient Id,Hand,Task number,Segment name,Camera name,"
    "Segment start frame,Segment end frame"
)


class EventAction:
    SELECT_CAMERA = "SelectCamera"
    SET_START_FRAME = "SetStartFrame"
    SET_END_FRAME = "SetEndFrame"
    CORRECT_START_FRAME = "CorrectStartFrame"
    CORRECT_END_FRAME = "CorrectEndFrame"
    CONFIRM_SEGMENT = "ConfirmSegment"
    PLAYBACK_CHECK = "PlaybackCheck"
    SUBMIT_TASK = "SubmitTask"
    FEEDBACK_NOTE = "FeedbackNote"

    ALL = (
        "SelectCamera",
        "SetStartFrame",
        "SetEndFrame",
        "CorrectStartFrame",
        "CorrectEndFrame",
        "ConfirmSegment",
        "PlaybackCheck",
        "SubmitTask",
        "FeedbackNote",
    )
    FRAME_ACTIONS = frozenset(
        {"SetStartFrame", "SetEndFrame", "CorrectStartFrame", "CorrectEndFrame"}
    )
    START_ACTIONS = frozenset({"SetStartFrame", "CorrectStartFrame"})
    END_ACTIONS = frozenset({"SetEndFrame", "CorrectEndFrame"})
    CAMERA_ACTIONS = FRAME_ACTIONS | {"SelectCamera"}


@dataclass(frozen=True)
class AnnotationEvent:
    """One timestamped annotator action within a (actor, patient, hand, task)
    stream."""

    timestamp_ms: int
    actor_id: str
    patient_id: int
    hand: str
    task_number: int
    slot: SegmentSlot
    action: str
    camera: str | None = None
    frame_value: int | None = None
    text: str | None = None
    event_id: int | None = None

    @property
    def stream_key(self) -> tuple:
        return (self.actor_id, self.patient_id, self.hand, self.task_number)

    @property
    def video_key(self) -> tuple:
        return (self.patient_id, self.hand, self.task_number)

    def validate(self) -> None:
        if self.hand not in HANDS:
            raise ValidationFailure("invalid_hand", f"hand must be one of {HANDS}, got {self.hand!r}")
        if self.action not in EventAction.ALL:
            raise ValidationFailure("unknown_action", f"unknown action {self.action!r}")
        if not self.actor_id:
            raise ValidationFailure("missing_actor", "actor_id is required")
        if not isinstance(self.timestamp_ms, int):
            raise ValidationFailure("bad_timestamp", "timestamp_ms must be integer milliseconds")

        is_frame = self.action in EventAction.FRAME_ACTIONS
        if is_frame:
            if self.frame_value is None:
                raise ValidationFailure("frame_required", f"{self.action} requires frame_value")
            if not isinstance(self.frame_value, int) or self.frame_value < 0:
                raise ValidationFailure("bad_frame", "frame_value must be a non-negative integer")
        elif self.frame_value is not None:
            raise ValidationFailure("frame_not_allowed", f"{self.action} must not carry frame_value")

        if self.action in EventAction.CAMERA_ACTIONS:
            if self.camera is None:
                raise ValidationFailure("camera_required", f"{self.action} requires the active camera")
            CameraView.validate(self.camera)
        elif self.camera is not None:
            raise ValidationFailure("camera_not_allowed", f"{self.action} must not carry camera")

        if self.action == EventAction.FEEDBACK_NOTE:
            if not (self.text or "").strip():
                raise ValidationFailure("text_required", "FeedbackNote requires non-empty text")
        elif self.text is not None:
            raise ValidationFailure("text_not_allowed", f"{self.action} must not carry text")

    def to_json_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "timestamp_ms": self.timestamp_ms,
            "actor_id": self.actor_id,
            "patient_id": self.patient_id,
            "hand": self.hand,
            "task_number": self.task_number,
            "segment": self.slot.display_name,
            "action": self.action,
            "camera": self.camera,
            "frame_value": self.frame_value,
            "text": self.text,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "AnnotationEvent":
        try:
            return cls(
                timestamp_ms=int(data["timestamp_ms"]),
                actor_id=str(data["actor_id"]),
                patient_id=int(data["patient_id"]),
                hand=str(data["hand"]),
                task_number=int(data["task_number"]),
                slot=SegmentSlot.parse(str(data["segment"])),
                action=str(data["action"]),
                camera=data.get("camera"),
                frame_value=None if data.get("frame_value") is None else int(data["frame_value"]),
                text=data.get("text"),
                event_id=None if data.get("event_id") is None else int(data["event_id"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationFailure("bad_event_json", f"cannot parse event: {exc}")


@dataclass(frozen=True)
class FlatRow:
    """One legacy-format table row: a frame-bearing confirmation step."""

    patient_id: int
    hand: str
    task_number: int
    segment_name: str
    camera_name: str
    start_frame: int
    end_frame: int

    def as_csv_fields(self) -> list[str]:
        return [
            str(self.patient_id),
            self.hand,
            str(self.task_number),
            self.segment_name,
            self.camera_name,
            str(self.start_frame),
            str(self.end_frame),
        ]


class EventStore:
    """Append-only store over the shared database, validated against a catalog."""

    def __init__(self, db: Database, catalog: Catalog):
        self.db = db
        self.catalog = catalog

    # -- write path ---------------------------------------------------------

    def append(self, event: AnnotationEvent) -> int:
        with self.db.lock:
            event_id = self._append_no_commit(event)
            self.db.commit()
            return event_id

    def append_many(self, events: Iterable[AnnotationEvent]) -> list[int]:
        """Append a batch atomically; either all events land or none do."""
        with self.db.lock:
            try:
                ids = [self._append_no_commit(e) for e in events]
                self.db.commit()
            except Exception:
                self.db.rollback()
                raise
            return ids

    def _append_no_commit(self, event: AnnotationEvent) -> int:
        event.validate()
        try:
            task = self.catalog.task(event.task_number)
        except NotFound:
            raise ValidationFailure("unknown_task", f"task {event.task_number} is not in the catalog")
        if event.slot not in task.sequence:
            raise ValidationFailure(
                "slot_not_in_task",
                f"segment {event.slot.display_name} is not part of task {event.task_number}",
            )

        if event.action in EventAction.FRAME_ACTIONS:
            self._check_input_order(event)

        cur = self.db.execute(
            "INSERT INTO events (timestamp_ms, actor_id, patient_id, hand, task_number,"
            " segment, action, camera, frame_value, text) VALUES (?,?,?,?,?,?,?,?,?,?)",
            (
                event.timestamp_ms,
                event.actor_id,
                event.patient_id,
                event.hand,
                event.task_number,
                event.slot.display_name,
                event.action,
                event.camera,
                event.frame_value,
                event.text,
            ),
        )
        return int(cur.lastrowid)

    def _check_input_order(self, event: AnnotationEvent) -> None:
        """First input per (stream, slot, field) must be Set*, later ones Correct*."""
        set_action = (
            EventAction.SET_START_FRAME
            if event.action in EventAction.START_ACTIONS
            else EventAction.SET_END_FRAME
        )
        row = self.db.query_one(
            "SELECT 1 FROM events WHERE actor_id=? AND patient_id=? AND hand=?"
            " AND task_number=? AND segment=? AND action=? LIMIT 1",
            (
                event.actor_id,
                event.patient_id,
                event.hand,
                event.task_number,
                event.slot.display_name,
                set_action,
            ),
        )
        has_set = row is not None
        if event.action.startswith("Correct") and not has_set:
            raise ValidationFailure(
                "correction_without_input",
                f"{event.action} on {event.slot.display_name} has no prior {set_action}",
            )
        if event.action.startswith("Set") and has_set:
            raise ValidationFailure(
                "duplicate_initial_input",
                f"{event.slot.display_name} already has a {set_action}; use {event.action.replace('Set', 'Correct')}",
            )

    # -- read path ----------------------------------------------------------

    def count(self) -> int:
        return int(self.db.query_one("SELECT COUNT(*) AS n FROM events")["n"])

    def last_event_id(self) -> int:
        row = self.db.query_one("SELECT MAX(event_id) AS m FROM events")
        return int(row["m"] or 0)

    def list_events(
        self,
        patient: int | None = None,
        hand: str | None = None,
        task: int | None = None,
        actor: str | None = None,
        since_ms: int | None = None,
        until_ms: int | None = None,
        after_event_id: int | None = None,
    ) -> list[AnnotationEvent]:
        """Events matching every provided filter, in append order."""
        clauses, params = [], []
        for column, value in (
            ("patient_id", patient),
            ("hand", hand),
            ("task_number", task),
            ("actor_id", actor),
        ):
            if value is not None:
                clauses.append(f"{column} = ?")
                params.append(value)
        if since_ms is not None:
            clauses.append("timestamp_ms >= ?")
            params.append(since_ms)
        if until_ms is not None:
            clauses.append("timestamp_ms <= ?")
            params.append(until_ms)
        if after_event_id is not None:
            clauses.append("event_id > ?")
            params.append(after_event_id)
        where = f" WHERE {' AND '.join(clauses)}" if clauses else ""
        rows = self.db.query(f"SELECT * FROM events{where} ORDER BY event_id", tuple(params))
        return [self._row_to_event(r) for r in rows]

    @staticmethod
    def _row_to_event(row) -> AnnotationEvent:
        return AnnotationEvent(
            event_id=row["event_id"],
            timestamp_ms=row["timestamp_ms"],
            actor_id=row["actor_id"],
            patient_id=row["patient_id"],
            hand=row["hand"],
            task_number=row["task_number"],
            slot=SegmentSlot.parse(row["segment"]),
            action=row["action"],
            camera=row["camera"],
            frame_value=row["frame_value"],
            text=row["text"],
        )

    # -- flat (legacy) format ------------------------------------------------

    def export_flat(
        self,
        patient: int | None = None,
        hand: str | None = None,
        task: int | None = None,
        actor: str | None = None,
    ) -> list[FlatRow]:
        events = self.list_events(patient=patient, hand=hand, task=task, actor=actor)
        return flatten_events(events)

    def import_flat(self, rows: Sequence[FlatRow]) -> int:
        """Synthesize the minimal event stream that reproduces ``rows`` on export."""
        events = synthesize_events(rows, self.catalog)
        self.append_many(events)
        return len(events)


def flatten_events(events: Sequence[AnnotationEvent]) -> list[FlatRow]:
    """Reduce an event sequence to flat rows, one per frame-bearing confirm.

    Steps are tracked per (actor, patient, hand, task) stream; the emitted
    rows are merged back into global append order so interleaved streams
    export chronologically.
    """
    # per stream, per slot: current frames, whether the step has new frame
    # input, and the camera of the step's last frame event
    state: dict[tuple, dict[SegmentSlot, dict]] = {}
    emitted: list[tuple[int, FlatRow]] = []

    for position, event in enumerate(events):
        slots = state.setdefault(event.stream_key, {})
        cur = slots.setdefault(
            event.slot, {"start": None, "end": None, "dirty": False, "camera": None}
        )
        if event.action in EventAction.FRAME_ACTIONS:
            field = "start" if event.action in EventAction.START_ACTIONS else "end"
            cur[field] = event.frame_value
            cur["dirty"] = True
            cur["camera"] = event.camera
        elif event.action == EventAction.CONFIRM_SEGMENT and cur["dirty"]:
            order = event.event_id if event.event_id is not None else position
            emitted.append(
                (
                    order,
                    FlatRow(
                        patient_id=event.patient_id,
                        hand=event.hand,
                        task_number=event.task_number,
                        segment_name=event.slot.display_name,
                        camera_name=cur["camera"],
                        start_frame=cur["start"] if cur["start"] is not None else 0,
                        end_frame=cur["end"] if cur["end"] is not None else 0,
                    ),
                )
            )
            cur["dirty"] = False

    emitted.sort(key=lambda pair: pair[0])
    return [row for _, row in emitted]


def synthesize_events(rows: Sequence[FlatRow], catalog: Catalog) -> list[AnnotationEvent]:
    """Build a minimal valid event stream whose flat export equals ``rows``.

    The 0 sentinel is read as "unset". A field can never return to unset once
    a row showed it set, and a row identical to the already-synthesized state
    still needs one frame event, which becomes a same-value correction.
    """
    state: dict[tuple, dict[SegmentSlot, dict]] = {}
    events: list[AnnotationEvent] = []
    clock_ms = 0

    def emit(row: FlatRow, action: str, slot: SegmentSlot, frame: int | None) -> None:
        nonlocal clock_ms
        clock_ms += 1000
        events.append(
            AnnotationEvent(
                timestamp_ms=clock_ms,
                actor_id=IMPORT_ACTOR,
                patient_id=row.patient_id,
                hand=row.hand,
                task_number=row.task_number,
                slot=slot,
                action=action,
                camera=row.camera_name if action != EventAction.CONFIRM_SEGMENT else None,
                frame_value=frame,
            )
        )

    for index, row in enumerate(rows):
        if row.hand not in HANDS:
            raise ValidationFailure("invalid_hand", f"row {index}: bad hand {row.hand!r}")
        if row.start_frame < 0 or row.end_frame < 0:
            raise ValidationFailure("bad_frame", f"row {index}: negative frame")
        try:
            task = catalog.task(row.task_number)
        except NotFound:
            raise ValidationFailure("unknown_task", f"row {index}: task {row.task_number} not in catalog")
        slot = task.slot(row.segment_name)
        CameraView.validate(row.camera_name)

        video = (row.patient_id, row.hand, row.task_number)
        cur = state.setdefault(video, {}).setdefault(slot, {"start": None, "end": None})

        changed = False
        for field, target in (("start", row.start_frame), ("end", row.end_frame)):
            target_value = target if target != 0 else None
            if target_value is None:
                if cur[field] is not None:
                    raise ValidationFailure(
                        "unproducible_rows",
                        f"row {index}: {row.segment_name} {field} frame returns to unset;"
                        " no event stream can produce that",
                    )
                continue
            if cur[field] != target_value:
                first_input = cur[field] is None
                if field == "start":
                    action = EventAction.SET_START_FRAME if first_input else EventAction.CORRECT_START_FRAME
                else:
                    action = EventAction.SET_END_FRAME if first_input else EventAction.CORRECT_END_FRAME
                emit(row, action, slot, target_value)
                cur[field] = target_value
                changed = True

        if not changed:
            # identical repeat row: re-enter an already-set field unchanged
            if cur["end"] is not None:
                emit(row, EventAction.CORRECT_END_FRAME, slot, cur["end"])
            elif cur["start"] is not None:
                emit(row, EventAction.CORRECT_START_FRAME, slot, cur["start"])
            else:
                raise ValidationFailure(
                    "malformed_row",
                    f"row {index}: both frames unset; no confirmation step can produce it",
                )
        emit(row, EventAction.CONFIRM_SEGMENT, slot, None)

    return events


# -- CSV / JSONL serialization ------------------------------------------------


def write_flat_csv(rows: Sequence[FlatRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(FLAT_CSV_HEADER.split(","))
    for row in rows:
        writer.writerow(row.as_csv_fields())
    return buf.getvalue()


def read_flat_csv(text: str) -> list[FlatRow]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationFailure("bad_csv", "flat CSV is empty; expected a header row")
    if header != FLAT_CSV_HEADER.split(","):
        raise ValidationFailure("bad_csv", f"unexpected flat CSV header: {','.join(header)!r}")
    rows = []
    for fields in reader:
        if not fields:
            continue
        if len(fields) != 7:
            raise ValidationFailure("bad_csv", f"flat CSV row needs 7 fields, got {len(fields)}")
        try:
            rows.append(
                FlatRow(
                    patient_id=int(fields[0]),
                    hand=fields[1],
                    task_number=int(fields[2]),
                    segment_name=fields[3],
                    camera_name=fields[4],
                    start_frame=int(fields[5]),
                    end_frame=int(fields[6]),
                )
            )
        except ValueError as exc:
            raise ValidationFailure("bad_csv", f"unparseable flat CSV row {fields!r}: {exc}")
    return rows


def write_events_jsonl(events: Sequence[AnnotationEvent]) -> str:
    return "".join(json.dumps(e.to_json_dict(), separators=(",", ":")) + "\n" for e in events)


def read_events_jsonl(text: str) -> list[AnnotationEvent]:
    events = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValidationFailure("bad_jsonl", f"line {line_number}: {exc}")
        events.append(AnnotationEvent.from_json_dict(data))
    return events


def load_flat_csv(path: str | Path) -> list[FlatRow]:
    return read_flat_csv(Path(path).read_text())


def load_events_jsonl(path: str | Path) -> list[AnnotationEvent]:
    return read_events_jsonl(Path(path).read_text())
