"""Pydantic request/response models for the HTTP API."""

from __future__ import annotations

from pydantic import BaseModel, Field


class EventIn(BaseModel):
    timestamp_ms: int
    actor_id: str | None = None  # filled from X-Actor-Token when auth is enabled
    patient_id: int
    hand: str
    task_number: int
    segment: str = Field(description="segment display name, e.g. IP or MTR2")
    action: str
    camera: str | None = None
    frame_value: int | None = None
    text: str | None = None


class EventOut(BaseModel):
    event_id: int
    timestamp_ms: int
    actor_id: str
    patient_id: int
    hand: str
    task_number: int
    segment: str
    action: str
    camera: str | None = None
    frame_value: int | None = None
    text: str | None = None


class AppendResponse(BaseModel):
    event_ids: list[int]


class SegmentRecordOut(BaseModel):
    segment: str
    kind: str
    start_frame: int | None
    end_frame: int | None
    camera_start: str | None
    camera_end: str | None
    confirmed: bool
    trim_seconds: tuple[float, float] | None = None


class OverlapOut(BaseModel):
    earlier: str
    later: str
    overlap_frames: int


class GapOut(BaseModel):
    earlier: str
    later: str
    gap_frames: int


class SubmissionErrorOut(BaseModel):
    code: str
    message: str
    segments: list[str]


class SegmentsResponse(BaseModel):
    patient_id: int
    hand: str
    task_number: int
    records: list[SegmentRecordOut]
    overlaps: list[OverlapOut]
    gaps: list[GapOut]
    errors: list[SubmissionErrorOut]
    submitted: bool
    valid: bool
    locked_by: str | None = None


class TaskSegmentOut(BaseModel):
    name: str
    kind: str
    occurrence: int
    view: str


class TaskOut(BaseModel):
    task_number: int
    subgroup: str
    title: str
    segments: list[TaskSegmentOut]
    definitions: dict[str, str]
    reference_urls: list[str] = []


class VideoIn(BaseModel):
    patient_id: int
    hand: str
    task_number: int
    view: str
    path: str
    fps: float = 30.0
    resolution: str = "3840x2160"
    usable: bool = True


class VideoOut(BaseModel):
    view: str
    path: str
    fps: float
    resolution: str
    usable: bool


class AssignIn(BaseModel):
    patient_id: int
    hand: str
    task_number: int
    pool: list[str]
    k: int | None = None


class AssignmentOut(BaseModel):
    assignment_id: int
    patient_id: int
    hand: str
    task_number: int
    rater_id: str
    status: str


class RatingIn(BaseModel):
    assignment_id: int
    task_score: int
    answers: dict = {}
    segmentation_problem: str | None = None


class FeedbackIn(BaseModel):
    assignment_id: int
    text: str


class VideoStateOut(BaseModel):
    patient_id: int
    hand: str
    task_number: int
    submitted: bool
    segmentation_valid: bool
    flagged: bool
    ratable: bool


class ProgressOut(BaseModel):
    videos_total: int
    videos_segmented: int
    videos_fully_rated: int
    videos_flagged: int
    percent_rated: float
    percent_flagged: float
    empty: bool


class SessionIn(BaseModel):
    patient_id: int
    hand: str
    date: str | None = None


class SessionOut(BaseModel):
    session_id: int
    patient_id: int
    hand: str
    session_date: str
    phase: str
    calibration_ref: str | None
    camera_status: dict[str, str]


class CalibrateIn(BaseModel):
    artifact_ref: str


class CameraCheckIn(BaseModel):
    view: str
    ok: bool


class StartTaskIn(BaseModel):
    task_number: int
    at_ms: int


class StopTaskIn(BaseModel):
    at_ms: int


class PreliminaryIn(BaseModel):
    task_number: int
    score: int
    note: str | None = None


class RecordingOut(BaseModel):
    recording_id: int
    session_id: int
    task_number: int
    started_at_ms: int
    stopped_at_ms: int | None
    timer_seconds: float | None
    preliminary_score: int | None
    problem_note: str | None
    video_refs: dict[str, VideoOut]
    active: bool


class HealthOut(BaseModel):
    store: str
    events: int
    catalog: str


class ErrorOut(BaseModel):
    machine_code: str
    message: str
