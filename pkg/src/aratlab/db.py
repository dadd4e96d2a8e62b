"""Embedded relational store shared by the segmentation, rating and capture
services.

One SQLite file (or ``:memory:``) holds every table; a process-wide lock
serializes access so readers always see a consistent snapshot and appends are
never observed half-applied. This is desk-scale storage: one clinic, one
process, no external database server.
"""

from __future__ import annotations

import sqlite3
import threading
from pathlib import Path

_SCHEMA = """
CREATE TABLE IF NOT EXISTS events (
    event_id     INTEGER PRIMARY KEY AUTOINCREMENT,
    timestamp_ms INTEGER NOT NULL,
    actor_id     TEXT    NOT NULL,
    patient_id   INTEGER NOT NULL,
    hand         TEXT    NOT NULL,
    task_number  INTEGER NOT NULL,
    segment      TEXT    NOT NULL,
    action       TEXT    NOT NULL,
    camera       TEXT,
    frame_value  INTEGER,
    text         TEXT
);
CREATE INDEX IF NOT EXISTS idx_events_stream
    ON events (actor_id, patient_id, hand, task_number, segment);
CREATE INDEX IF NOT EXISTS idx_events_video
    ON events (patient_id, hand, task_number);

CREATE TABLE IF NOT EXISTS assignments (
    assignment_id INTEGER PRIMARY KEY AUTOINCREMENT,
    patient_id    INTEGER NOT NULL,
    hand          TEXT    NOT NULL,
    task_number   INTEGER NOT NULL,
    rater_id      TEXT    NOT NULL,
    status        TEXT    NOT NULL DEFAULT 'pending',
    created_at_ms INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_assignments_video
    ON assignments (patient_id, hand, task_number);

CREATE TABLE IF NOT EXISTS ratings (
    assignment_id   INTEGER PRIMARY KEY,
    task_score      INTEGER NOT NULL,
    answers_json    TEXT    NOT NULL,
    problem_flag    TEXT,
    submitted_at_ms INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS flags (
    flag_id       INTEGER PRIMARY KEY AUTOINCREMENT,
    assignment_id INTEGER NOT NULL,
    patient_id    INTEGER NOT NULL,
    hand          TEXT    NOT NULL,
    task_number   INTEGER NOT NULL,
    text          TEXT    NOT NULL,
    as_of_event   INTEGER NOT NULL,
    created_at_ms INTEGER NOT NULL
);

CREATE TABLE IF NOT EXISTS sessions (
    session_id         INTEGER PRIMARY KEY AUTOINCREMENT,
    patient_id         INTEGER NOT NULL,
    hand               TEXT    NOT NULL,
    session_date       TEXT    NOT NULL,
    phase              TEXT    NOT NULL,
    calibration_ref    TEXT,
    camera_status_json TEXT    NOT NULL
);

CREATE TABLE IF NOT EXISTS recordings (
    recording_id      INTEGER PRIMARY KEY AUTOINCREMENT,
    session_id        INTEGER NOT NULL,
    task_number       INTEGER NOT NULL,
    started_at_ms     INTEGER NOT NULL,
    stopped_at_ms     INTEGER,
    timer_seconds     REAL,
    preliminary_score INTEGER,
    problem_note      TEXT,
    video_refs_json   TEXT,
    active            INTEGER NOT NULL DEFAULT 1
);

CREATE TABLE IF NOT EXISTS videos (
    patient_id  INTEGER NOT NULL,
    hand        TEXT    NOT NULL,
    task_number INTEGER NOT NULL,
    view        TEXT    NOT NULL,
    path        TEXT    NOT NULL,
    fps         REAL    NOT NULL,
    resolution  TEXT    NOT NULL,
    usable      INTEGER NOT NULL DEFAULT 1,
    PRIMARY KEY (patient_id, hand, task_number, view)
);
"""


class Database:
    """Thread-safe handle on the shared SQLite store."""

    def __init__(self, path: str | Path = ":memory:"):
        self.path = str(path)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.row_factory = sqlite3.Row
        with self._lock:
            if self.path != ":memory:":
                self._conn.execute("PRAGMA journal_mode=WAL")
                self._conn.execute("PRAGMA synchronous=NORMAL")
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    @property
    def lock(self) -> threading.RLock:
        return self._lock

    def execute(self, sql: str, params: tuple = ()) -> sqlite3.Cursor:
        with self._lock:
            return self._conn.execute(sql, params)

    def commit(self) -> None:
        with self._lock:
            self._conn.commit()

    def rollback(self) -> None:
        with self._lock:
            self._conn.rollback()

    def query(self, sql: str, params: tuple = ()) -> list[sqlite3.Row]:
        with self._lock:
            return self._conn.execute(sql, params).fetchall()

    def query_one(self, sql: str, params: tuple = ()):
        with self._lock:
            return self._conn.execute(sql, params).fetchone()

    def healthy(self) -> bool:
        """True when the backing file still exists and answers queries.

        SQLite keeps serving from an open fd after the file is unlinked, so
        the existence check is what actually catches a removed data directory.
        """
        try:
            with self._lock:
                self._conn.execute("SELECT 1").fetchone()
        except sqlite3.Error:
            return False
        if self.path != ":memory:" and not Path(self.path).exists():
            return False
        return True

    def close(self) -> None:
        with self._lock:
            self._conn.close()
