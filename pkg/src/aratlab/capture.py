"""Clinic-side capture workflow.

Models the tablet flow the clinician walks through: daily camera calibration,
a per-session camera check, then task administration with start/stop
recording buttons that drive the task timer. The calibration algorithm
itself is external; here it is an opaque, dated artifact reference that
later sessions on the same day inherit.

No camera drivers or encoding live here: a pluggable rig stub supplies the
four per-view video metadata records when a recording stops.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import date as _date
from pathlib import Path
from typing import Callable

from .catalog import CameraView, TASK_RANGE
from .db import Database
from .errors import Conflict, NotFound, ValidationFailure
from .events import HANDS

PHASE_NEEDS_CALIBRATION = "NeedsCalibration"
PHASE_CAMERA_CHECK = "CameraCheck"
PHASE_ADMINISTRATION = "Administration"
PHASE_CLOSED = "Closed"

CAMERA_UNCHECKED = "unchecked"
CAMERA_OK = "ok"
CAMERA_FAILED = "failed"

DEFAULT_FPS = 30.0
DEFAULT_RESOLUTION = "3840x2160"

_FILENAME = re.compile(
    r"^(?P<patient>\d+)_(?P<hand>left|right)_task(?P<task>\d{2})_(?P<view>[A-Za-z]+)\.(?P<ext>\w+)$"
)


@dataclass(frozen=True)
class VideoRef:
    view: str
    path: str
    fps: float
    resolution: str
    usable: bool = True


@dataclass(frozen=True)
class TaskRecording:
    recording_id: int
    session_id: int
    task_number: int
    started_at_ms: int
    stopped_at_ms: int | None
    timer_seconds: float | None
    preliminary_score: int | None
    problem_note: str | None
    video_refs: dict[str, VideoRef]
    active: bool


@dataclass(frozen=True)
class CaptureSession:
    session_id: int
    patient_id: int
    hand: str
    session_date: str
    phase: str
    calibration_ref: str | None
    camera_status: dict[str, str]


RigStub = Callable[[int, str, int], dict[str, VideoRef]]


def path_convention_rig(
    videos_root: str = "videos",
    fps: float = DEFAULT_FPS,
    resolution: str = DEFAULT_RESOLUTION,
) -> RigStub:
    """Default rig stub: derive the four per-view files from the naming
    convention ``<patient>_<hand>_task<NN>_<view>.mp4``."""

    def rig(patient_id: int, hand: str, task_number: int) -> dict[str, VideoRef]:
        return {
            view: VideoRef(
                view=view,
                path=f"{videos_root}/{patient_id}_{hand}_task{task_number:02d}_{view}.mp4",
                fps=fps,
                resolution=resolution,
                usable=True,
            )
            for view in CameraView.ALL
        }

    return rig


def parse_video_filename(name: str) -> dict:
    """Parse the bulk-import naming convention into a metadata record."""
    m = _FILENAME.match(Path(name).name)
    if not m:
        raise ValidationFailure(
            "bad_filename",
            f"{name!r} does not match <patient>_<hand>_task<NN>_<view>.<ext>",
        )
    view = CameraView.validate(m.group("view").capitalize())
    return {
        "patient_id": int(m.group("patient")),
        "hand": m.group("hand"),
        "task_number": int(m.group("task")),
        "view": view,
        "path": name,
        "fps": DEFAULT_FPS,
        "resolution": DEFAULT_RESOLUTION,
        "usable": True,
    }


class CaptureService:
    def __init__(self, db: Database, rig: RigStub | None = None):
        self.db = db
        self.rig = rig or path_convention_rig()

    # -- session lifecycle ----------------------------------------------------

    def begin_session(
        self, patient_id: int, hand: str, session_date: str | None = None
    ) -> CaptureSession:
        if hand not in HANDS:
            raise ValidationFailure("invalid_hand", f"hand must be one of {HANDS}")
        session_date = session_date or _date.today().isoformat()

        # calibration done earlier the same day carries over
        inherited = self.db.query_one(
            "SELECT calibration_ref FROM sessions WHERE session_date=?"
            " AND calibration_ref IS NOT NULL ORDER BY session_id DESC LIMIT 1",
            (session_date,),
        )
        calibration_ref = inherited["calibration_ref"] if inherited else None
        phase = PHASE_CAMERA_CHECK if calibration_ref else PHASE_NEEDS_CALIBRATION
        camera_status = {view: CAMERA_UNCHECKED for view in CameraView.ALL}

        with self.db.lock:
            cur = self.db.execute(
                "INSERT INTO sessions (patient_id, hand, session_date, phase,"
                " calibration_ref, camera_status_json) VALUES (?,?,?,?,?,?)",
                (patient_id, hand, session_date, phase, calibration_ref, json.dumps(camera_status)),
            )
            self.db.commit()
            return self.get_session(int(cur.lastrowid))

    def get_session(self, session_id: int) -> CaptureSession:
        row = self.db.query_one("SELECT * FROM sessions WHERE session_id=?", (session_id,))
        if row is None:
            raise NotFound("unknown_session", f"session {session_id} does not exist")
        return CaptureSession(
            session_id=row["session_id"],
            patient_id=row["patient_id"],
            hand=row["hand"],
            session_date=row["session_date"],
            phase=row["phase"],
            calibration_ref=row["calibration_ref"],
            camera_status=json.loads(row["camera_status_json"]),
        )

    def _update_session(self, session_id: int, **columns) -> CaptureSession:
        sets = ", ".join(f"{c}=?" for c in columns)
        self.db.execute(
            f"UPDATE sessions SET {sets} WHERE session_id=?",
            (*columns.values(), session_id),
        )
        self.db.commit()
        return self.get_session(session_id)

    def mark_calibrated(self, session_id: int, artifact_ref: str) -> CaptureSession:
        if not (artifact_ref or "").strip():
            raise ValidationFailure("bad_calibration_ref", "calibration artifact reference required")
        with self.db.lock:
            session = self.get_session(session_id)
            if session.phase not in (PHASE_NEEDS_CALIBRATION, PHASE_CAMERA_CHECK):
                raise Conflict(
                    "bad_phase",
                    f"cannot calibrate in phase {session.phase}; calibration happens before administration",
                )
            return self._update_session(
                session_id, calibration_ref=artifact_ref, phase=PHASE_CAMERA_CHECK
            )

    def check_camera(self, session_id: int, view: str, ok: bool) -> CaptureSession:
        CameraView.validate(view)
        with self.db.lock:
            session = self.get_session(session_id)
            if session.phase == PHASE_NEEDS_CALIBRATION:
                raise Conflict("calibration_required", "calibrate the cameras first")
            if session.phase == PHASE_CLOSED:
                raise Conflict("session_closed", "session is closed")

            status = dict(session.camera_status)
            status[view] = CAMERA_OK if ok else CAMERA_FAILED

            phase = session.phase
            all_ok = all(s == CAMERA_OK for s in status.values())
            if all_ok and session.calibration_ref:
                phase = PHASE_ADMINISTRATION
            elif not ok and session.phase == PHASE_ADMINISTRATION:
                # camera failure mid-session drops back to the check screen
                phase = PHASE_CAMERA_CHECK
            return self._update_session(
                session_id, camera_status_json=json.dumps(status), phase=phase
            )

    def close_session(self, session_id: int) -> CaptureSession:
        with self.db.lock:
            session = self.get_session(session_id)
            if self._active_recording(session.session_id) is not None:
                raise Conflict("recording_in_progress", "stop the active recording first")
            return self._update_session(session_id, phase=PHASE_CLOSED)

    # -- task recordings --------------------------------------------------------

    def _row_to_recording(self, row) -> TaskRecording:
        refs = {}
        if row["video_refs_json"]:
            refs = {
                view: VideoRef(**data) for view, data in json.loads(row["video_refs_json"]).items()
            }
        return TaskRecording(
            recording_id=row["recording_id"],
            session_id=row["session_id"],
            task_number=row["task_number"],
            started_at_ms=row["started_at_ms"],
            stopped_at_ms=row["stopped_at_ms"],
            timer_seconds=row["timer_seconds"],
            preliminary_score=row["preliminary_score"],
            problem_note=row["problem_note"],
            video_refs=refs,
            active=bool(row["active"]),
        )

    def _active_recording(self, session_id: int):
        return self.db.query_one(
            "SELECT * FROM recordings WHERE session_id=? AND stopped_at_ms IS NULL",
            (session_id,),
        )

    def start_task(self, session_id: int, task_number: int, at_ms: int) -> TaskRecording:
        with self.db.lock:
            session = self.get_session(session_id)
            if session.phase != PHASE_ADMINISTRATION:
                raise Conflict(
                    "bad_phase", f"recording requires the administration phase, session is in {session.phase}"
                )
            if task_number not in TASK_RANGE:
                raise ValidationFailure("task_out_of_range", f"task {task_number} out of range 1-19")
            if self._active_recording(session_id) is not None:
                raise Conflict("recording_in_progress", "another recording is already running")

            # a retake supersedes earlier takes of the same task
            self.db.execute(
                "UPDATE recordings SET active=0 WHERE session_id=? AND task_number=?",
                (session_id, task_number),
            )
            cur = self.db.execute(
                "INSERT INTO recordings (session_id, task_number, started_at_ms, active)"
                " VALUES (?,?,?,1)",
                (session_id, task_number, at_ms),
            )
            self.db.commit()
            return self._row_to_recording(
                self.db.query_one("SELECT * FROM recordings WHERE recording_id=?", (cur.lastrowid,))
            )

    def stop_task(self, session_id: int, at_ms: int) -> TaskRecording:
        with self.db.lock:
            session = self.get_session(session_id)
            row = self._active_recording(session_id)
            if row is None:
                raise Conflict("no_active_recording", "no recording is running")
            if at_ms <= row["started_at_ms"]:
                raise ValidationFailure(
                    "bad_timestamps", "stop time must be after start time"
                )
            timer_seconds = (at_ms - row["started_at_ms"]) / 1000.0
            refs = self.rig(session.patient_id, session.hand, row["task_number"])
            self.db.execute(
                "UPDATE recordings SET stopped_at_ms=?, timer_seconds=?, video_refs_json=?"
                " WHERE recording_id=?",
                (
                    at_ms,
                    timer_seconds,
                    json.dumps({view: vars(ref) for view, ref in refs.items()}),
                    row["recording_id"],
                ),
            )
            self.db.commit()
            self.register_videos(
                [
                    {
                        "patient_id": session.patient_id,
                        "hand": session.hand,
                        "task_number": row["task_number"],
                        "view": ref.view,
                        "path": ref.path,
                        "fps": ref.fps,
                        "resolution": ref.resolution,
                        "usable": ref.usable,
                    }
                    for ref in refs.values()
                ]
            )
            return self._row_to_recording(
                self.db.query_one(
                    "SELECT * FROM recordings WHERE recording_id=?", (row["recording_id"],)
                )
            )

    def record_preliminary(
        self, session_id: int, task_number: int, score: int, note: str | None = None
    ) -> TaskRecording:
        with self.db.lock:
            self.get_session(session_id)
            if not isinstance(score, int) or isinstance(score, bool) or not (0 <= score <= 3):
                raise ValidationFailure("score_out_of_range", f"score must be 0-3, got {score!r}")
            row = self.db.query_one(
                "SELECT * FROM recordings WHERE session_id=? AND task_number=? AND active=1"
                " AND stopped_at_ms IS NOT NULL",
                (session_id, task_number),
            )
            if row is None:
                raise Conflict(
                    "no_recording_for_task",
                    f"task {task_number} has no completed recording in this session",
                )
            self.db.execute(
                "UPDATE recordings SET preliminary_score=?, problem_note=? WHERE recording_id=?",
                (score, note, row["recording_id"]),
            )
            self.db.commit()
            return self._row_to_recording(
                self.db.query_one(
                    "SELECT * FROM recordings WHERE recording_id=?", (row["recording_id"],)
                )
            )

    def list_recordings(self, session_id: int) -> list[TaskRecording]:
        rows = self.db.query(
            "SELECT * FROM recordings WHERE session_id=? ORDER BY recording_id", (session_id,)
        )
        return [self._row_to_recording(r) for r in rows]

    # -- video metadata registry --------------------------------------------------

    def register_videos(self, records: list[dict]) -> int:
        """Upsert video metadata records, e.g. from capture or bulk import."""
        count = 0
        with self.db.lock:
            for record in records:
                try:
                    patient_id = int(record["patient_id"])
                    hand = record["hand"]
                    task_number = int(record["task_number"])
                    view = CameraView.validate(record["view"])
                    path = str(record["path"])
                    fps = float(record.get("fps", DEFAULT_FPS))
                    resolution = str(record.get("resolution", DEFAULT_RESOLUTION))
                    usable = bool(record.get("usable", True))
                except (KeyError, TypeError, ValueError) as exc:
                    raise ValidationFailure("bad_video_record", f"bad video metadata {record!r}: {exc}")
                if hand not in HANDS:
                    raise ValidationFailure("invalid_hand", f"bad hand in video metadata {record!r}")
                if task_number not in TASK_RANGE:
                    raise ValidationFailure("task_out_of_range", f"task {task_number} out of range 1-19")
                if fps <= 0:
                    raise ValidationFailure("bad_fps", "fps must be positive")
                self.db.execute(
                    "INSERT INTO videos (patient_id, hand, task_number, view, path, fps,"
                    " resolution, usable) VALUES (?,?,?,?,?,?,?,?)"
                    " ON CONFLICT(patient_id, hand, task_number, view) DO UPDATE SET"
                    " path=excluded.path, fps=excluded.fps, resolution=excluded.resolution,"
                    " usable=excluded.usable",
                    (patient_id, hand, task_number, view, path, fps, resolution, int(usable)),
                )
                count += 1
            self.db.commit()
        return count

    def list_videos(
        self, patient_id: int, task_number: int, hand: str | None = None
    ) -> list[VideoRef]:
        clauses = "patient_id=? AND task_number=?"
        params: list = [patient_id, task_number]
        if hand is not None:
            clauses += " AND hand=?"
            params.append(hand)
        rows = self.db.query(f"SELECT * FROM videos WHERE {clauses} ORDER BY view", tuple(params))
        return [
            VideoRef(
                view=r["view"],
                path=r["path"],
                fps=r["fps"],
                resolution=r["resolution"],
                usable=bool(r["usable"]),
            )
            for r in rows
        ]
