from __future__ import annotations

import random

import pytest

from aratlab.catalog import Catalog, CameraView, SegmentSlot, load_default_catalog
from aratlab.db import Database
from aratlab.events import AnnotationEvent, EventAction, EventStore


@pytest.fixture(scope="session")
def catalog() -> Catalog:
    return load_default_catalog()


@pytest.fixture()
def store(catalog) -> EventStore:
    return EventStore(Database(), catalog)


def make_event(
    ts: int,
    slot: SegmentSlot | str,
    action: str,
    camera: str | None = None,
    frame: int | None = None,
    text: str | None = None,
    actor: str = "segmentor1",
    patient: int = 1,
    hand: str = "left",
    task: int = 1,
) -> AnnotationEvent:
    if isinstance(slot, str):
        slot = SegmentSlot.parse(slot)
    return AnnotationEvent(
        timestamp_ms=ts,
        actor_id=actor,
        patient_id=patient,
        hand=hand,
        task_number=task,
        slot=slot,
        action=action,
        camera=camera,
        frame_value=frame,
        text=text,
    )


def table2_events(actor: str = "segmentor1", patient: int = 1, hand: str = "left") -> list[AnnotationEvent]:
    """The worked single-segmentor scenario: IP start 75 on the ipsilateral
    view, end 92 after switching contralateral, then T 92..111, submit."""
    e = lambda ts, slot, action, camera=None, frame=None: make_event(
        ts, slot, action, camera=camera, frame=frame, actor=actor, patient=patient, hand=hand
    )
    return [
        e(1_000, "IP", EventAction.SET_START_FRAME, "Ipsilateral", 75),
        e(2_000, "IP", EventAction.CONFIRM_SEGMENT),
        e(3_000, "IP", EventAction.SELECT_CAMERA, "Contralateral"),
        e(4_000, "IP", EventAction.SET_END_FRAME, "Contralateral", 92),
        e(5_000, "IP", EventAction.CONFIRM_SEGMENT),
        e(6_000, "T", EventAction.SET_START_FRAME, "Contralateral", 92),
        e(7_000, "T", EventAction.SET_END_FRAME, "Contralateral", 111),
        e(8_000, "T", EventAction.CONFIRM_SEGMENT),
        e(9_000, "T", EventAction.SUBMIT_TASK),
    ]


TABLE2_CSV = (
    "Patient Id,Hand,Task number,Segment name,Camera name,Segment start frame,Segment end frame\n"
    "1,left,1,IP,Ipsilateral,75,0\n"
    "1,left,1,IP,Contralateral,75,92\n"
    "1,left,1,T,Contralateral,92,111\n"
)


def random_valid_stream(
    rng: random.Random,
    catalog: Catalog,
    *,
    actor: str = "segmentor1",
    patient: int = 1,
    hand: str = "left",
    task: int = 1,
    submit: bool = False,
    touch_all: bool = False,
) -> list[AnnotationEvent]:
    """A random stream obeying the UI grammar: first input is Set*, every
    frame edit happens in a single-camera step closed by a confirm, and
    confirmed segments always have positive length.

    With ``touch_all``/``submit`` the stream is submission-valid (all slots
    confirmed, non-overlapping by per-slot frame lanes).
    """
    sequence = catalog.expected_sequence(task)
    active_view = catalog.recommended_view(task, sequence[0])
    events: list[AnnotationEvent] = []
    ts = rng.randint(1, 1000) * 1000

    def emit(slot, action, camera=None, frame=None):
        nonlocal ts
        ts += rng.randint(100, 2000)
        events.append(
            make_event(ts, slot, action, camera=camera, frame=frame,
                       actor=actor, patient=patient, hand=hand, task=task)
        )

    def maybe_switch(slot):
        nonlocal active_view
        if rng.random() < 0.3:
            active_view = rng.choice([v for v in CameraView.ALL if v != active_view])
            emit(slot, EventAction.SELECT_CAMERA, camera=active_view)

    for index, slot in enumerate(sequence):
        if not touch_all and rng.random() < 0.15:
            continue
        # frame values stay >= 1: the flat legacy format reserves 0 for unset
        lane = index * 1000
        start = lane + rng.randint(1, 100)
        end = start + rng.randint(1, 800)

        maybe_switch(slot)
        emit(slot, EventAction.SET_START_FRAME, camera=active_view, frame=start)
        single_step = rng.random() < 0.5
        if single_step:
            emit(slot, EventAction.SET_END_FRAME, camera=active_view, frame=end)
        emit(slot, EventAction.CONFIRM_SEGMENT)
        if not single_step:
            maybe_switch(slot)
            emit(slot, EventAction.SET_END_FRAME, camera=active_view, frame=end)
            emit(slot, EventAction.CONFIRM_SEGMENT)

        if rng.random() < 0.4:
            # corrections always move the frame: a same-value re-entry is not
            # representable in the flat confirmation-step format
            maybe_switch(slot)
            if rng.random() < 0.5:
                new_start = min(lane + rng.randint(1, 100), end - 1)
                if new_start == start:
                    new_start = start + 1 if start + 1 < end else start - 1
                if new_start >= 1:
                    start = new_start
                    emit(slot, EventAction.CORRECT_START_FRAME, camera=active_view, frame=start)
            else:
                new_end = start + rng.randint(1, 890)
                end = new_end if new_end != end else end + 1
                emit(slot, EventAction.CORRECT_END_FRAME, camera=active_view, frame=end)
            if rng.random() < 0.3:
                emit(slot, EventAction.PLAYBACK_CHECK)
            emit(slot, EventAction.CONFIRM_SEGMENT)

    if submit:
        emit(sequence[-1], EventAction.SUBMIT_TASK)
    return events


def submitted_segmentation(
    catalog: Catalog,
    *,
    actor: str = "segmentor1",
    patient: int = 1,
    hand: str = "left",
    task: int = 17,
    base_ts: int = 1_000,
) -> list[AnnotationEvent]:
    """Smallest submission-valid stream for a task (used for bulk fixtures)."""
    events = []
    ts = base_ts
    sequence = catalog.expected_sequence(task)
    for index, slot in enumerate(sequence):
        view = catalog.recommended_view(task, slot)
        lane = index * 1000
        for action, frame in (
            (EventAction.SET_START_FRAME, lane + 10),
            (EventAction.SET_END_FRAME, lane + 160),
        ):
            events.append(make_event(ts, slot, action, camera=view, frame=frame,
                                     actor=actor, patient=patient, hand=hand, task=task))
            ts += 1000
        events.append(make_event(ts, slot, EventAction.CONFIRM_SEGMENT,
                                 actor=actor, patient=patient, hand=hand, task=task))
        ts += 1000
    events.append(make_event(ts, sequence[-1], EventAction.SUBMIT_TASK,
                             actor=actor, patient=patient, hand=hand, task=task))
    return events
