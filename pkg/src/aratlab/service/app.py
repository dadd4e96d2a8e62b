"""HTTP API over the shared annotation database.

The interface is the one common surface for the capture tablet, the
segmentation UI, the rating UI and the analytics consumers: reads are GETs,
every annotator action is a POST, and all writes delegate to the domain
services over one store.

Stream serialization: one segmentor works a (patient, hand, task) video at a
time. The first actor to post an event takes the stream; others get 409
until a SubmitTask releases it. Locks are in-process state, which is enough
for the single-service deployments this targets.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .. import analytics
from ..capture import CaptureService, TaskRecording
from ..catalog import Catalog, load_catalog, load_default_catalog
from ..db import Database
from ..errors import Conflict, DomainError, ValidationFailure
from ..events import AnnotationEvent, EventAction, EventStore
from ..rating import (
    RatingRecord,
    RatingService,
    load_default_rating_form,
    load_rating_form,
)
from ..segmentation import (
    apply_event,
    detect_overlaps,
    find_gaps,
    fold_state,
    trim_bounds,
    validate_submission,
)
from . import schemas


class UnauthorizedError(DomainError):
    http_status = 401

    def __init__(self):
        super().__init__("unauthorized", "missing or unknown X-Actor-Token")


@dataclass
class ServiceConfig:
    data_path: str = ":memory:"  # sqlite file; ':memory:' for ephemeral use
    catalog_path: str | Path | None = None
    rating_form_path: str | Path | None = None
    tokens: dict[str, str] | None = None  # X-Actor-Token value -> actor id
    raters_per_video: int = 2
    fps: float = 30.0
    videos_root: str = "videos"
    cors_origins: tuple[str, ...] = ("*",)  # the browser UI runs on its own origin


@dataclass
class AppState:
    config: ServiceConfig
    db: Database
    catalog: Catalog
    store: EventStore
    rating: RatingService
    capture: CaptureService
    stream_locks: dict[tuple, str] = field(default_factory=dict)


def _build_state(config: ServiceConfig) -> AppState:
    catalog = (
        load_catalog(config.catalog_path) if config.catalog_path else load_default_catalog()
    )
    form = (
        load_rating_form(config.rating_form_path)
        if config.rating_form_path
        else load_default_rating_form()
    )
    db = Database(config.data_path)
    store = EventStore(db, catalog)
    rating = RatingService(db, store, catalog, form, raters_per_video=config.raters_per_video)
    capture = CaptureService(db)
    return AppState(
        config=config, db=db, catalog=catalog, store=store, rating=rating, capture=capture
    )


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    state = _build_state(config or ServiceConfig())
    app = FastAPI(title="aratlab", version="0.1.0")
    app.state.domain = state
    if state.config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(state.config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(DomainError)
    async def domain_error_handler(_request: Request, exc: DomainError):
        return JSONResponse(
            status_code=exc.http_status,
            content={"machine_code": exc.machine_code, "message": exc.message},
        )

    @app.exception_handler(RequestValidationError)
    async def request_error_handler(_request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"machine_code": "bad_request", "message": str(exc.errors()[:3])},
        )

    def current_actor(x_actor_token: str | None = Header(default=None)) -> str | None:
        """Resolve the acting identity from the static token map.

        When no token map is configured the deployment runs open (trusted
        bodies); otherwise mutating endpoints require a known token.
        """
        if state.config.tokens is None:
            return None
        if x_actor_token is None or x_actor_token not in state.config.tokens:
            raise UnauthorizedError()
        return state.config.tokens[x_actor_token]

    # -- health ---------------------------------------------------------------

    @app.get("/healthz", response_model=schemas.HealthOut)
    def healthz():
        ok = state.db.healthy()
        body = {
            "store": "ok" if ok else "failed",
            "events": state.store.count() if ok else 0,
            "catalog": f"v{state.catalog.schema_version}",
        }
        return JSONResponse(status_code=200 if ok else 503, content=body)

    # -- catalog ---------------------------------------------------------------

    def _task_out(task_number: int) -> dict:
        task = state.catalog.task(task_number)
        kinds = {slot.kind for slot in task.sequence}
        return {
            "task_number": task.task_number,
            "subgroup": task.subgroup,
            "title": task.title,
            "segments": [
                {
                    "name": slot.display_name,
                    "kind": slot.kind,
                    "occurrence": slot.occurrence,
                    "view": task.recommended_views[slot],
                }
                for slot in task.sequence
            ],
            "definitions": {kind: state.catalog.definitions[kind] for kind in sorted(kinds)},
            "reference_urls": list(task.reference_urls),
        }

    @app.get("/catalog/tasks")
    def catalog_tasks():
        return [_task_out(n) for n in sorted(state.catalog.tasks)]

    @app.get("/catalog/tasks/{task_number}", response_model=schemas.TaskOut)
    def catalog_task(task_number: int):
        return _task_out(task_number)

    @app.get("/catalog/definitions")
    def catalog_definitions():
        return dict(state.catalog.definitions)

    # -- events and segmentation -------------------------------------------------

    def _event_from_body(body: schemas.EventIn, token_actor: str | None) -> AnnotationEvent:
        actor = token_actor or body.actor_id
        if not actor:
            raise ValidationFailure("missing_actor", "no actor identity (token or actor_id)")
        if token_actor and body.actor_id and body.actor_id != token_actor:
            raise ValidationFailure(
                "actor_mismatch", "body actor_id does not match the authenticated actor"
            )
        task = state.catalog.task(body.task_number)
        return AnnotationEvent(
            timestamp_ms=body.timestamp_ms,
            actor_id=actor,
            patient_id=body.patient_id,
            hand=body.hand,
            task_number=body.task_number,
            slot=task.slot(body.segment),
            action=body.action,
            camera=body.camera,
            frame_value=body.frame_value,
            text=body.text,
        )

    def _check_stream_locks(events: list[AnnotationEvent]) -> None:
        """Enforce one active annotator per (patient, hand, task) stream."""
        for event in events:
            key = event.video_key
            holder = state.stream_locks.get(key)
            if holder is not None and holder != event.actor_id:
                raise Conflict(
                    "stream_locked",
                    f"video ({key[0]}, {key[1]}, task {key[2]}) is being annotated by {holder}",
                )

    def _update_stream_locks(events: list[AnnotationEvent]) -> None:
        for event in events:
            if event.action == EventAction.SUBMIT_TASK:
                state.stream_locks.pop(event.video_key, None)
            else:
                state.stream_locks[event.video_key] = event.actor_id

    def _guard_confirms(events: list[AnnotationEvent]) -> None:
        """Reject confirmations that would accept a zero-length segment."""
        by_video: dict[tuple, list[AnnotationEvent]] = {}
        for event in events:
            by_video.setdefault(event.video_key, []).append(event)
        for (patient_id, hand, task_number), batch in by_video.items():
            sequence = state.catalog.expected_sequence(task_number)
            existing = state.store.list_events(patient=patient_id, hand=hand, task=task_number)
            records = {r.slot: r for r in fold_state(existing, sequence)}
            for event in batch:
                apply_event(records, event)
                if event.action == EventAction.CONFIRM_SEGMENT:
                    record = records[event.slot]
                    if (
                        record.start_frame is not None
                        and record.end_frame is not None
                        and record.end_frame <= record.start_frame
                    ):
                        raise ValidationFailure(
                            "zero_length_segment",
                            f"cannot confirm segment {event.slot.display_name}: "
                            f"frames {record.start_frame}..{record.end_frame} have no length",
                        )

    @app.post("/events", response_model=schemas.AppendResponse)
    def post_events(
        body: schemas.EventIn | list[schemas.EventIn],
        actor: str | None = Depends(current_actor),
    ):
        bodies = body if isinstance(body, list) else [body]
        if not bodies:
            raise ValidationFailure("empty_batch", "no events in request")
        events = [_event_from_body(b, actor) for b in bodies]
        with state.db.lock:
            _check_stream_locks(events)
            _guard_confirms(events)
            event_ids = state.store.append_many(events)
            _update_stream_locks(events)
        return {"event_ids": event_ids}

    @app.get("/events", response_model=list[schemas.EventOut])
    def get_events(
        patient: int | None = None,
        hand: str | None = None,
        task: int | None = None,
        actor: str | None = None,
        since_ms: int | None = None,
        until_ms: int | None = None,
    ):
        events = state.store.list_events(
            patient=patient, hand=hand, task=task, actor=actor, since_ms=since_ms, until_ms=until_ms
        )
        return [e.to_json_dict() for e in events]

    @app.get("/segments", response_model=schemas.SegmentsResponse)
    def get_segments(
        patient: int, hand: str, task: int, actor: str | None = None
    ):
        sequence = state.catalog.expected_sequence(task)
        events = state.store.list_events(patient=patient, hand=hand, task=task, actor=actor)
        records = fold_state(events, sequence)
        errors = validate_submission(records, sequence)
        submitted = any(e.action == EventAction.SUBMIT_TASK for e in events)
        fps = _video_fps(patient, hand, task)

        def record_out(record) -> dict:
            trim = None
            if record.frames_set and record.end_frame > record.start_frame:
                trim = trim_bounds(record, fps)
            return {
                "segment": record.slot.display_name,
                "kind": record.slot.kind,
                "start_frame": record.start_frame,
                "end_frame": record.end_frame,
                "camera_start": record.camera_start,
                "camera_end": record.camera_end,
                "confirmed": record.confirmed,
                "trim_seconds": trim,
            }

        return {
            "patient_id": patient,
            "hand": hand,
            "task_number": task,
            "records": [record_out(r) for r in records],
            "overlaps": [
                {
                    "earlier": o.earlier_slot.display_name,
                    "later": o.later_slot.display_name,
                    "overlap_frames": o.overlap_frames,
                }
                for o in detect_overlaps(records)
            ],
            "gaps": [
                {
                    "earlier": g.earlier_slot.display_name,
                    "later": g.later_slot.display_name,
                    "gap_frames": g.gap_frames,
                }
                for g in find_gaps(records)
            ],
            "errors": [
                {"code": e.code, "message": e.message, "segments": list(e.slots)} for e in errors
            ],
            "submitted": submitted,
            "valid": submitted and not errors,
            "locked_by": state.stream_locks.get((patient, hand, task)),
        }

    def _video_fps(patient: int, hand: str, task: int) -> float:
        videos = state.capture.list_videos(patient, task, hand=hand)
        return videos[0].fps if videos else state.config.fps

    # -- video metadata ------------------------------------------------------------

    @app.get("/patients/{patient_id}/tasks/{task_number}/videos",
             response_model=list[schemas.VideoOut])
    def get_videos(patient_id: int, task_number: int, hand: str | None = None):
        state.catalog.task(task_number)
        return [vars(v) for v in state.capture.list_videos(patient_id, task_number, hand=hand)]

    @app.post("/videos")
    def post_videos(
        body: schemas.VideoIn | list[schemas.VideoIn],
        actor: str | None = Depends(current_actor),
    ):
        bodies = body if isinstance(body, list) else [body]
        count = state.capture.register_videos([b.model_dump() for b in bodies])
        return {"registered": count}

    # -- rating workflow --------------------------------------------------------------

    def _assignment_out(assignment) -> dict:
        return {
            "assignment_id": assignment.assignment_id,
            "patient_id": assignment.patient_id,
            "hand": assignment.hand,
            "task_number": assignment.task_number,
            "rater_id": assignment.rater_id,
            "status": assignment.status,
        }

    @app.post("/assignments", response_model=list[schemas.AssignmentOut])
    def post_assignments(body: schemas.AssignIn, actor: str | None = Depends(current_actor)):
        created = state.rating.assign_raters(
            body.patient_id, body.hand, body.task_number, body.pool, k=body.k
        )
        return [_assignment_out(a) for a in created]

    @app.get("/assignments", response_model=list[schemas.AssignmentOut])
    def get_assignments(rater: str | None = None, status: str | None = None, queue: bool = False):
        if queue:
            assignments = state.rating.ratable_queue(rater=rater)
        else:
            assignments = state.rating.list_assignments(rater=rater, status=status)
        return [_assignment_out(a) for a in assignments]

    @app.post("/ratings", response_model=schemas.AssignmentOut)
    def post_rating(body: schemas.RatingIn, actor: str | None = Depends(current_actor)):
        assignment = state.rating.get_assignment(body.assignment_id)
        if actor is not None and actor != assignment.rater_id:
            raise Conflict(
                "wrong_rater", f"assignment {assignment.assignment_id} belongs to {assignment.rater_id}"
            )
        record = RatingRecord(
            assignment_id=body.assignment_id,
            task_score=body.task_score,
            answers=body.answers,
            segmentation_problem=body.segmentation_problem,
        )
        return _assignment_out(state.rating.submit_rating(record))

    @app.get("/ratings/progress", response_model=schemas.ProgressOut)
    def ratings_progress():
        return vars(state.rating.progress_report())

    @app.post("/feedback", response_model=schemas.VideoStateOut)
    def post_feedback(body: schemas.FeedbackIn, actor: str | None = Depends(current_actor)):
        video_state = state.rating.flag_problem(body.assignment_id, body.text)
        return vars(video_state)

    @app.get("/videos/{patient_id}/{hand}/{task_number}/state",
             response_model=schemas.VideoStateOut)
    def get_video_state(patient_id: int, hand: str, task_number: int):
        return vars(state.rating.video_state(patient_id, hand, task_number))

    # -- capture sessions ----------------------------------------------------------------

    def _session_out(session) -> dict:
        return {
            "session_id": session.session_id,
            "patient_id": session.patient_id,
            "hand": session.hand,
            "session_date": session.session_date,
            "phase": session.phase,
            "calibration_ref": session.calibration_ref,
            "camera_status": session.camera_status,
        }

    def _recording_out(recording: TaskRecording) -> dict:
        return {
            "recording_id": recording.recording_id,
            "session_id": recording.session_id,
            "task_number": recording.task_number,
            "started_at_ms": recording.started_at_ms,
            "stopped_at_ms": recording.stopped_at_ms,
            "timer_seconds": recording.timer_seconds,
            "preliminary_score": recording.preliminary_score,
            "problem_note": recording.problem_note,
            "video_refs": {view: vars(ref) for view, ref in recording.video_refs.items()},
            "active": recording.active,
        }

    @app.post("/sessions", response_model=schemas.SessionOut)
    def post_session(body: schemas.SessionIn, actor: str | None = Depends(current_actor)):
        session = state.capture.begin_session(body.patient_id, body.hand, body.date)
        return _session_out(session)

    @app.get("/sessions/{session_id}", response_model=schemas.SessionOut)
    def get_session(session_id: int):
        return _session_out(state.capture.get_session(session_id))

    @app.get("/sessions/{session_id}/recordings", response_model=list[schemas.RecordingOut])
    def get_recordings(session_id: int):
        state.capture.get_session(session_id)
        return [_recording_out(r) for r in state.capture.list_recordings(session_id)]

    @app.post("/sessions/{session_id}/calibrate", response_model=schemas.SessionOut)
    def post_calibrate(
        session_id: int, body: schemas.CalibrateIn, actor: str | None = Depends(current_actor)
    ):
        return _session_out(state.capture.mark_calibrated(session_id, body.artifact_ref))

    @app.post("/sessions/{session_id}/camera-check", response_model=schemas.SessionOut)
    def post_camera_check(
        session_id: int, body: schemas.CameraCheckIn, actor: str | None = Depends(current_actor)
    ):
        return _session_out(state.capture.check_camera(session_id, body.view, body.ok))

    @app.post("/sessions/{session_id}/start-task", response_model=schemas.RecordingOut)
    def post_start_task(
        session_id: int, body: schemas.StartTaskIn, actor: str | None = Depends(current_actor)
    ):
        return _recording_out(state.capture.start_task(session_id, body.task_number, body.at_ms))

    @app.post("/sessions/{session_id}/stop-task", response_model=schemas.RecordingOut)
    def post_stop_task(
        session_id: int, body: schemas.StopTaskIn, actor: str | None = Depends(current_actor)
    ):
        return _recording_out(state.capture.stop_task(session_id, body.at_ms))

    @app.post("/sessions/{session_id}/preliminary", response_model=schemas.RecordingOut)
    def post_preliminary(
        session_id: int, body: schemas.PreliminaryIn, actor: str | None = Depends(current_actor)
    ):
        return _recording_out(
            state.capture.record_preliminary(session_id, body.task_number, body.score, body.note)
        )

    @app.post("/sessions/{session_id}/close", response_model=schemas.SessionOut)
    def post_close(session_id: int, actor: str | None = Depends(current_actor)):
        return _session_out(state.capture.close_session(session_id))

    # -- analytics -------------------------------------------------------------------------

    @app.get("/analytics/durations")
    def analytics_durations(actor: str | None = None):
        events = state.store.list_events(actor=actor)
        report = analytics.build_report(events, state.catalog)
        return {
            "durations": report["durations"],
            "completion_series": report["completion_series"],
        }

    @app.get("/analytics/view-usage")
    def analytics_view_usage(actor: str | None = None):
        events = state.store.list_events(actor=actor)
        report = analytics.build_report(events, state.catalog)
        return {
            "view_usage": report["view_usage"],
            "view_usage_summary": report["view_usage_summary"],
        }

    @app.get("/analytics/switch-stats")
    def analytics_switch_stats(actor: str | None = None):
        events = state.store.list_events(actor=actor)
        report = analytics.build_report(events, state.catalog)
        return {
            "switch_stats": report["switch_stats"],
            "overall_switch_fraction": report["overall_switch_fraction"],
        }

    @app.get("/analytics/report")
    def analytics_report():
        return analytics.build_report(state.store.list_events(), state.catalog)

    return app
