"""Dual-rater rating workflow.

Each segmented task video is rated by a configurable number of distinct
clinicians (two by default). Raters can flag a bad segmentation instead of
rating it; the flag pulls the video out of the ratable queue, voids its
pending assignments, and the video only returns once a corrected
segmentation has been resubmitted and passes validation again.

The rating questionnaire is configuration data (a versioned JSON form), not
code: deployments tune the questions without touching the service.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .catalog import Catalog, SegmentKind, TaskDefinition
from .db import Database
from .errors import Conflict, NotFound, ValidationFailure
from .events import AnnotationEvent, EventAction, EventStore
from .segmentation import fold_state, validate_submission

FORM_SCHEMA_VERSION = 1
TASK_SCORE_MIN, TASK_SCORE_MAX = 0, 3
DEFAULT_RATERS_PER_VIDEO = 2

ANSWER_TYPES = ("ordinal", "boolean", "text")


@dataclass(frozen=True)
class RatingQuestion:
    id: str
    applies_to: tuple[str, ...] | str  # "task" or a tuple of segment kinds
    prompt: str
    answer_type: str

    @property
    def task_level(self) -> bool:
        return self.applies_to == "task"

    @property
    def required(self) -> bool:
        return self.answer_type != "text"

    def applies_to_task(self, task: TaskDefinition) -> bool:
        if self.task_level:
            return True
        kinds = {slot.kind for slot in task.sequence}
        return bool(kinds & set(self.applies_to))


@dataclass(frozen=True)
class RatingForm:
    version: str
    questions: tuple[RatingQuestion, ...]

    def applicable_questions(self, task: TaskDefinition) -> list[RatingQuestion]:
        return [q for q in self.questions if q.applies_to_task(task)]

    def question(self, question_id: str) -> RatingQuestion:
        for q in self.questions:
            if q.id == question_id:
                return q
        raise ValidationFailure("unknown_question", f"question {question_id!r} is not in the form")


def parse_rating_form(document: dict) -> RatingForm:
    if document.get("schema_version") != FORM_SCHEMA_VERSION:
        raise ValidationFailure(
            "unsupported_schema_version",
            f"rating form schema_version {document.get('schema_version')!r} not supported",
        )
    questions = []
    seen_ids = set()
    for raw in document.get("questions", []):
        qid = str(raw.get("id", "")).strip()
        if not qid:
            raise ValidationFailure("bad_form", "question without id")
        if qid in seen_ids:
            raise ValidationFailure("bad_form", f"duplicate question id {qid!r}")
        seen_ids.add(qid)
        answer_type = raw.get("answer_type")
        if answer_type not in ANSWER_TYPES:
            raise ValidationFailure("bad_form", f"question {qid}: bad answer_type {answer_type!r}")
        applies = raw.get("applies_to", "task")
        if applies != "task":
            applies = tuple(SegmentKind.validate(k) for k in applies)
        questions.append(
            RatingQuestion(
                id=qid,
                applies_to=applies,
                prompt=str(raw.get("prompt", "")),
                answer_type=answer_type,
            )
        )
    if not any(q.task_level and q.answer_type == "ordinal" for q in questions):
        raise ValidationFailure("bad_form", "form needs at least one task-level ordinal question")
    return RatingForm(version=str(document.get("version", "v?")), questions=tuple(questions))


def load_rating_form(path: str | Path) -> RatingForm:
    try:
        document = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationFailure("bad_form", f"rating form is not valid JSON: {exc}")
    return parse_rating_form(document)


def default_rating_form_path() -> Path:
    return Path(str(resources.files("aratlab").joinpath("data/default_rating_form.json")))


def load_default_rating_form() -> RatingForm:
    return load_rating_form(default_rating_form_path())


@dataclass(frozen=True)
class RatingAssignment:
    assignment_id: int
    patient_id: int
    hand: str
    task_number: int
    rater_id: str
    status: str  # pending | completed | voided
    created_at_ms: int


@dataclass(frozen=True)
class RatingRecord:
    assignment_id: int
    task_score: int
    answers: dict
    segmentation_problem: str | None = None


@dataclass(frozen=True)
class VideoState:
    patient_id: int
    hand: str
    task_number: int
    submitted: bool
    segmentation_valid: bool
    flagged: bool
    ratable: bool


@dataclass(frozen=True)
class ProgressReport:
    videos_total: int
    videos_segmented: int
    videos_fully_rated: int
    videos_flagged: int
    percent_rated: float
    percent_flagged: float
    empty: bool


def _now_ms() -> int:
    return int(time.time() * 1000)


class RatingService:
    def __init__(
        self,
        db: Database,
        store: EventStore,
        catalog: Catalog,
        form: RatingForm,
        raters_per_video: int = DEFAULT_RATERS_PER_VIDEO,
    ):
        self.db = db
        self.store = store
        self.catalog = catalog
        self.form = form
        self.raters_per_video = raters_per_video

    # -- segmentation-facing state -------------------------------------------

    def video_state(self, patient_id: int, hand: str, task_number: int) -> VideoState:
        """Where one task video stands in the segment-then-rate lifecycle.

        The video's segmentation is the merged event record for
        (patient, hand, task) in append order; in live operation only one
        segmentor works a video at a time (stream lock), and later correction
        events simply override earlier state.
        """
        events = self.store.list_events(patient=patient_id, hand=hand, task=task_number)
        submitted = any(e.action == EventAction.SUBMIT_TASK for e in events)
        sequence = self.catalog.expected_sequence(task_number)
        records = fold_state(events, sequence)
        valid = submitted and not validate_submission(records, sequence)

        flag = self.db.query_one(
            "SELECT as_of_event FROM flags WHERE patient_id=? AND hand=? AND task_number=?"
            " ORDER BY flag_id DESC LIMIT 1",
            (patient_id, hand, task_number),
        )
        flagged = False
        if flag is not None:
            resubmitted = any(
                e.action == EventAction.SUBMIT_TASK and e.event_id > flag["as_of_event"]
                for e in events
            )
            flagged = not resubmitted
        return VideoState(
            patient_id=patient_id,
            hand=hand,
            task_number=task_number,
            submitted=submitted,
            segmentation_valid=valid,
            flagged=flagged,
            ratable=valid and not flagged,
        )

    # -- assignments ----------------------------------------------------------

    def _assignments_for_video(self, patient_id: int, hand: str, task_number: int):
        return self.db.query(
            "SELECT * FROM assignments WHERE patient_id=? AND hand=? AND task_number=?"
            " ORDER BY assignment_id",
            (patient_id, hand, task_number),
        )

    def _rater_loads(self, pool: list[str]) -> dict[str, int]:
        loads = {rater: 0 for rater in pool}
        for row in self.db.query(
            "SELECT rater_id, COUNT(*) AS n FROM assignments"
            " WHERE status != 'voided' GROUP BY rater_id"
        ):
            if row["rater_id"] in loads:
                loads[row["rater_id"]] = row["n"]
        return loads

    def assign_raters(
        self,
        patient_id: int,
        hand: str,
        task_number: int,
        pool: list[str],
        k: int | None = None,
    ) -> list[RatingAssignment]:
        """Create assignments for one video, least-loaded raters first.

        With ``k`` omitted, tops the video up to the configured target count.
        Raters already holding a live (pending or completed) assignment for
        this video are never assigned again.
        """
        with self.db.lock:
            state = self.video_state(patient_id, hand, task_number)
            if not state.submitted or not state.segmentation_valid:
                raise Conflict(
                    "segmentation_not_ready",
                    f"video ({patient_id}, {hand}, task {task_number}) has no valid submitted segmentation",
                )
            if state.flagged:
                raise Conflict(
                    "needs_correction",
                    f"video ({patient_id}, {hand}, task {task_number}) is flagged for segmentation correction",
                )

            existing = [r for r in self._assignments_for_video(patient_id, hand, task_number)
                        if r["status"] != "voided"]
            if k is None:
                k = self.raters_per_video - len(existing)
                if k <= 0:
                    raise Conflict(
                        "already_assigned",
                        f"video already has {len(existing)} live assignments",
                    )
            if k < 1:
                raise ValidationFailure("bad_assignment_count", "k must be >= 1")

            taken = {r["rater_id"] for r in existing}
            eligible = sorted(set(pool) - taken)
            if len(eligible) < k:
                raise ValidationFailure(
                    "insufficient_raters",
                    f"need {k} distinct raters, only {len(eligible)} eligible in pool",
                )

            loads = self._rater_loads(eligible)
            chosen = sorted(eligible, key=lambda rater: (loads[rater], rater))[:k]

            created = []
            now = _now_ms()
            for rater in chosen:
                cur = self.db.execute(
                    "INSERT INTO assignments (patient_id, hand, task_number, rater_id,"
                    " status, created_at_ms) VALUES (?,?,?,?, 'pending', ?)",
                    (patient_id, hand, task_number, rater, now),
                )
                created.append(
                    RatingAssignment(
                        assignment_id=int(cur.lastrowid),
                        patient_id=patient_id,
                        hand=hand,
                        task_number=task_number,
                        rater_id=rater,
                        status="pending",
                        created_at_ms=now,
                    )
                )
            self.db.commit()
            return created

    def get_assignment(self, assignment_id: int) -> RatingAssignment:
        row = self.db.query_one(
            "SELECT * FROM assignments WHERE assignment_id=?", (assignment_id,)
        )
        if row is None:
            raise NotFound("unknown_assignment", f"assignment {assignment_id} does not exist")
        return RatingAssignment(
            assignment_id=row["assignment_id"],
            patient_id=row["patient_id"],
            hand=row["hand"],
            task_number=row["task_number"],
            rater_id=row["rater_id"],
            status=row["status"],
            created_at_ms=row["created_at_ms"],
        )

    def list_assignments(
        self, rater: str | None = None, status: str | None = None
    ) -> list[RatingAssignment]:
        clauses, params = [], []
        if rater is not None:
            clauses.append("rater_id=?")
            params.append(rater)
        if status is not None:
            clauses.append("status=?")
            params.append(status)
        where = f" WHERE {' AND '.join(clauses)}" if clauses else ""
        rows = self.db.query(
            f"SELECT * FROM assignments{where} ORDER BY assignment_id", tuple(params)
        )
        return [
            RatingAssignment(
                assignment_id=r["assignment_id"],
                patient_id=r["patient_id"],
                hand=r["hand"],
                task_number=r["task_number"],
                rater_id=r["rater_id"],
                status=r["status"],
                created_at_ms=r["created_at_ms"],
            )
            for r in rows
        ]

    def ratable_queue(self, rater: str | None = None) -> list[RatingAssignment]:
        """Pending assignments whose video is currently ratable."""
        pending = self.list_assignments(rater=rater, status="pending")
        return [
            a
            for a in pending
            if self.video_state(a.patient_id, a.hand, a.task_number).ratable
        ]

    # -- rating submission ----------------------------------------------------

    def _validate_answers(self, task: TaskDefinition, answers: dict) -> None:
        applicable = {q.id: q for q in self.form.applicable_questions(task)}
        for qid in answers:
            question = self.form.question(qid)  # raises unknown_question
            if qid not in applicable:
                raise ValidationFailure(
                    "question_not_applicable",
                    f"question {qid!r} does not apply to task {task.task_number}",
                )
            value = answers[qid]
            if question.answer_type == "ordinal":
                if not isinstance(value, int) or isinstance(value, bool) or not (
                    TASK_SCORE_MIN <= value <= TASK_SCORE_MAX
                ):
                    raise ValidationFailure(
                        "answer_out_of_range",
                        f"answer to {qid!r} must be an integer in "
                        f"{TASK_SCORE_MIN}-{TASK_SCORE_MAX}, got {value!r}",
                    )
            elif question.answer_type == "boolean":
                if not isinstance(value, bool):
                    raise ValidationFailure(
                        "bad_answer_type", f"answer to {qid!r} must be a boolean"
                    )
            else:
                if not isinstance(value, str):
                    raise ValidationFailure(
                        "bad_answer_type", f"answer to {qid!r} must be text"
                    )
        for qid, question in applicable.items():
            if question.required and qid not in answers:
                raise ValidationFailure("missing_answer", f"question {qid!r} requires an answer")

    def submit_rating(self, record: RatingRecord) -> RatingAssignment:
        with self.db.lock:
            assignment = self.get_assignment(record.assignment_id)
            if assignment.status == "completed":
                raise Conflict(
                    "already_completed", f"assignment {assignment.assignment_id} already completed"
                )
            if assignment.status == "voided":
                raise Conflict(
                    "assignment_voided",
                    f"assignment {assignment.assignment_id} was voided by a segmentation flag",
                )
            if not isinstance(record.task_score, int) or isinstance(record.task_score, bool) or not (
                TASK_SCORE_MIN <= record.task_score <= TASK_SCORE_MAX
            ):
                raise ValidationFailure(
                    "score_out_of_range",
                    f"task score must be in {TASK_SCORE_MIN}-{TASK_SCORE_MAX}, got {record.task_score!r}",
                )
            task = self.catalog.task(assignment.task_number)
            self._validate_answers(task, record.answers)

            self.db.execute(
                "INSERT INTO ratings (assignment_id, task_score, answers_json,"
                " problem_flag, submitted_at_ms) VALUES (?,?,?,?,?)",
                (
                    assignment.assignment_id,
                    record.task_score,
                    json.dumps(record.answers, sort_keys=True),
                    record.segmentation_problem,
                    _now_ms(),
                ),
            )
            self.db.execute(
                "UPDATE assignments SET status='completed' WHERE assignment_id=?",
                (assignment.assignment_id,),
            )
            self.db.commit()

            if record.segmentation_problem:
                self.flag_problem(assignment.assignment_id, record.segmentation_problem)
            return self.get_assignment(assignment.assignment_id)

    # -- feedback loop ---------------------------------------------------------

    def flag_problem(self, assignment_id: int, text: str) -> VideoState:
        """Flag a video's segmentation as needing correction.

        Voids the video's pending assignments and logs the rater's feedback
        into the event record. The video leaves the ratable queue until a
        corrected segmentation is resubmitted and validates cleanly.
        """
        if not (text or "").strip():
            raise ValidationFailure("text_required", "a segmentation flag needs feedback text")
        with self.db.lock:
            assignment = self.get_assignment(assignment_id)
            self.db.execute(
                "INSERT INTO flags (assignment_id, patient_id, hand, task_number, text,"
                " as_of_event, created_at_ms) VALUES (?,?,?,?,?,?,?)",
                (
                    assignment.assignment_id,
                    assignment.patient_id,
                    assignment.hand,
                    assignment.task_number,
                    text,
                    self.store.last_event_id(),
                    _now_ms(),
                ),
            )
            self.db.execute(
                "UPDATE assignments SET status='voided' WHERE patient_id=? AND hand=?"
                " AND task_number=? AND status='pending'",
                (assignment.patient_id, assignment.hand, assignment.task_number),
            )
            self.db.commit()

            # the rater's feedback joins the annotation record; slot context is
            # the task's first segment (the flag concerns the whole video)
            first_slot = self.catalog.expected_sequence(assignment.task_number)[0]
            self.store.append(
                AnnotationEvent(
                    timestamp_ms=_now_ms(),
                    actor_id=assignment.rater_id,
                    patient_id=assignment.patient_id,
                    hand=assignment.hand,
                    task_number=assignment.task_number,
                    slot=first_slot,
                    action=EventAction.FEEDBACK_NOTE,
                    text=text,
                )
            )
            return self.video_state(assignment.patient_id, assignment.hand, assignment.task_number)

    # -- reporting --------------------------------------------------------------

    def _known_videos(self) -> set[tuple[int, str, int]]:
        videos: set[tuple[int, str, int]] = set()
        for table in ("events", "assignments", "videos"):
            for row in self.db.query(
                f"SELECT DISTINCT patient_id, hand, task_number FROM {table}"
            ):
                videos.add((row["patient_id"], row["hand"], row["task_number"]))
        return videos

    def progress_report(self) -> ProgressReport:
        videos = self._known_videos()
        segmented = 0
        for patient_id, hand, task_number in videos:
            state = self.video_state(patient_id, hand, task_number)
            if state.submitted and state.segmentation_valid:
                segmented += 1

        completed_per_video: dict[tuple, int] = {}
        for row in self.db.query(
            "SELECT patient_id, hand, task_number, COUNT(*) AS n FROM assignments"
            " WHERE status='completed' GROUP BY patient_id, hand, task_number"
        ):
            completed_per_video[(row["patient_id"], row["hand"], row["task_number"])] = row["n"]
        fully_rated = sum(1 for n in completed_per_video.values() if n == self.raters_per_video)

        flagged = len(
            self.db.query("SELECT DISTINCT patient_id, hand, task_number FROM flags")
        )

        empty = segmented == 0
        percent_rated = 0.0 if empty else round(100.0 * fully_rated / segmented, 1)
        percent_flagged = 0.0 if fully_rated == 0 else round(100.0 * flagged / fully_rated, 1)
        return ProgressReport(
            videos_total=len(videos),
            videos_segmented=segmented,
            videos_fully_rated=fully_rated,
            videos_flagged=flagged,
            percent_rated=percent_rated,
            percent_flagged=percent_flagged,
            empty=empty,
        )

    def export_ratings_csv(self) -> str:
        """CSV of completed ratings: assignment, rater, task score, one column
        per question id in form order."""
        import csv as _csv
        import io as _io

        buf = _io.StringIO()
        writer = _csv.writer(buf, lineterminator="\n")
        question_ids = [q.id for q in self.form.questions]
        writer.writerow(["assignment_id", "rater_id", "task_score", *question_ids])
        rows = self.db.query(
            "SELECT r.assignment_id, a.rater_id, r.task_score, r.answers_json"
            " FROM ratings r JOIN assignments a ON a.assignment_id = r.assignment_id"
            " ORDER BY r.assignment_id"
        )
        for row in rows:
            answers = json.loads(row["answers_json"])
            writer.writerow(
                [
                    row["assignment_id"],
                    row["rater_id"],
                    row["task_score"],
                    *["" if answers.get(qid) is None else answers.get(qid) for qid in question_ids],
                ]
            )
        return buf.getvalue()
