"""Pure segmentation logic: fold event streams into current segment state,
detect overlaps, validate submissions and compute trimmed playback bounds.

Everything here is a deterministic function over immutable inputs, safe for
concurrent use without coordination.

Boundary convention: one frame may be both the OUT of segment k and the IN of
segment k+1 (e.g. a finger-flexion frame closing IP and opening T), so two
segments sharing exactly that frame do not overlap. Gaps between segments are
legal and only reported as a non-blocking diagnostic.
"""

from __future__ import annotations

from dataclasses import dataclass

from .catalog import SegmentSlot
from .errors import ValidationFailure
from .events import AnnotationEvent, EventAction

DEFAULT_FPS = 30.0


@dataclass
class SegmentRecord:
    """Current folded state of one segment slot."""

    slot: SegmentSlot
    start_frame: int | None = None
    end_frame: int | None = None
    camera_start: str | None = None
    camera_end: str | None = None
    confirmed: bool = False

    @property
    def frames_set(self) -> bool:
        return self.start_frame is not None and self.end_frame is not None


@dataclass(frozen=True)
class OverlapWarning:
    earlier_slot: SegmentSlot
    later_slot: SegmentSlot
    overlap_frames: int


@dataclass(frozen=True)
class GapReport:
    """Informational: frames between the OUT of one segment and the IN of the next."""

    earlier_slot: SegmentSlot
    later_slot: SegmentSlot
    gap_frames: int


@dataclass(frozen=True)
class SubmissionError:
    code: str
    message: str
    slots: tuple[str, ...] = ()


def fold_state(
    events: list[AnnotationEvent], sequence: list[SegmentSlot]
) -> list[SegmentRecord]:
    """Left-fold a single stream into one record per expected slot.

    Last write wins per frame field; a slot counts as confirmed once any
    ConfirmSegment event for it has been seen.
    """
    records = {slot: SegmentRecord(slot) for slot in sequence}
    for event in events:
        apply_event(records, event)
    return [records[slot] for slot in sequence]


def apply_event(records: dict[SegmentSlot, SegmentRecord], event: AnnotationEvent) -> None:
    """Apply one event in place; the incremental form of :func:`fold_state`."""
    if event.slot not in records:
        raise ValidationFailure(
            "slot_not_in_sequence",
            f"event references segment {event.slot.display_name} absent from the expected sequence",
        )
    record = records[event.slot]
    if event.action in EventAction.START_ACTIONS:
        record.start_frame = event.frame_value
        record.camera_start = event.camera
    elif event.action in EventAction.END_ACTIONS:
        record.end_frame = event.frame_value
        record.camera_end = event.camera
    elif event.action == EventAction.CONFIRM_SEGMENT:
        record.confirmed = True


def detect_overlaps(records: list[SegmentRecord]) -> list[OverlapWarning]:
    """Warnings for every pair of frame-complete records whose intervals
    strictly intersect; a shared boundary frame is not an overlap."""
    warnings = []
    complete = [r for r in records if r.frames_set]
    for i, earlier in enumerate(complete):
        for later in complete[i + 1 :]:
            if min(earlier.end_frame, later.end_frame) > max(earlier.start_frame, later.start_frame):
                warnings.append(
                    OverlapWarning(
                        earlier_slot=earlier.slot,
                        later_slot=later.slot,
                        overlap_frames=earlier.end_frame - later.start_frame,
                    )
                )
    return warnings


def find_gaps(records: list[SegmentRecord]) -> list[GapReport]:
    """Non-blocking diagnostic: gaps between consecutive frame-complete segments."""
    gaps = []
    complete = [r for r in records if r.frames_set]
    for earlier, later in zip(complete, complete[1:]):
        if later.start_frame > earlier.end_frame:
            gaps.append(
                GapReport(
                    earlier_slot=earlier.slot,
                    later_slot=later.slot,
                    gap_frames=later.start_frame - earlier.end_frame,
                )
            )
    return gaps


def validate_submission(
    records: list[SegmentRecord], sequence: list[SegmentSlot]
) -> list[SubmissionError]:
    """Every violated submission rule, never short-circuited. Empty list = Ok.

    Rules: every expected slot confirmed; every confirmed record has both
    frames with end > start; no overlapping intervals.
    """
    errors: list[SubmissionError] = []
    by_slot = {r.slot: r for r in records}

    for slot in sequence:
        record = by_slot.get(slot)
        if record is None or not record.confirmed:
            errors.append(
                SubmissionError(
                    code="unconfirmed_segment",
                    message=f"unconfirmed segment {slot.display_name}",
                    slots=(slot.display_name,),
                )
            )

    for record in records:
        if not record.confirmed:
            continue
        name = record.slot.display_name
        if not record.frames_set:
            errors.append(
                SubmissionError(
                    code="missing_frames",
                    message=f"segment {name} is confirmed but lacks IN/OUT frames",
                    slots=(name,),
                )
            )
        elif record.end_frame <= record.start_frame:
            errors.append(
                SubmissionError(
                    code="zero_length_segment",
                    message=f"segment {name} ends at or before its start "
                    f"({record.start_frame}..{record.end_frame})",
                    slots=(name,),
                )
            )

    for overlap in detect_overlaps(records):
        errors.append(
            SubmissionError(
                code="overlapping_segments",
                message=f"segments {overlap.earlier_slot.display_name} and "
                f"{overlap.later_slot.display_name} overlap by {overlap.overlap_frames} frames",
                slots=(overlap.earlier_slot.display_name, overlap.later_slot.display_name),
            )
        )
    return errors


def trim_bounds(record: SegmentRecord, fps: float = DEFAULT_FPS) -> tuple[float, float]:
    """Playback window for a segment in seconds, rounded to milliseconds."""
    if fps <= 0:
        raise ValidationFailure("bad_fps", "fps must be positive")
    if not record.frames_set:
        raise ValidationFailure(
            "missing_frames",
            f"segment {record.slot.display_name} has no complete IN/OUT frames to trim",
        )
    return (round(record.start_frame / fps, 3), round(record.end_frame / fps, 3))
