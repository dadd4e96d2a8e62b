import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aratlab.catalog import SegmentSlot
from aratlab.errors import ValidationFailure
from aratlab.events import EventAction
from aratlab.segmentation import (
    SegmentRecord,
    apply_event,
    detect_overlaps,
    find_gaps,
    fold_state,
    trim_bounds,
    validate_submission,
)

from conftest import make_event, random_valid_stream, table2_events

IP = SegmentSlot.parse("IP")
T = SegmentSlot.parse("T")
MTR = SegmentSlot.parse("MTR")
PR = SegmentSlot.parse("PR")
MTR2 = SegmentSlot.parse("MTR2")
SEQ = [IP, T, MTR, PR, MTR2]


def record(slot, start=None, end=None, confirmed=False):
    return SegmentRecord(slot=slot, start_frame=start, end_frame=end, confirmed=confirmed)


# -- fold_state ---------------------------------------------------------------


def test_fold_table2_scenario(catalog):
    records = fold_state(table2_events(), SEQ)
    ip, t, mtr, pr, mtr2 = records
    assert (ip.start_frame, ip.end_frame, ip.confirmed) == (75, 92, True)
    assert (ip.camera_start, ip.camera_end) == ("Ipsilateral", "Contralateral")
    assert (t.start_frame, t.end_frame, t.confirmed) == (92, 111, True)
    for unset in (mtr, pr, mtr2):
        assert unset.start_frame is None and unset.end_frame is None and not unset.confirmed


def test_fold_empty_stream():
    for rec in fold_state([], SEQ):
        assert rec.start_frame is None and rec.end_frame is None and not rec.confirmed


def test_fold_last_write_wins():
    events = [
        make_event(1000, "IP", EventAction.SET_END_FRAME, "Ipsilateral", 90),
        make_event(2000, "IP", EventAction.CORRECT_END_FRAME, "Contralateral", 92),
    ]
    ip = fold_state(events, SEQ)[0]
    assert ip.end_frame == 92
    assert ip.camera_end == "Contralateral"


def test_fold_rejects_unknown_slot():
    events = [make_event(1000, "GT", EventAction.CONFIRM_SEGMENT, task=17)]
    with pytest.raises(ValidationFailure) as err:
        fold_state(events, SEQ)
    assert err.value.machine_code == "slot_not_in_sequence"


def test_fold_equals_incremental_fold(catalog):
    rng = random.Random(21)
    for _ in range(50):
        task = rng.choice([1, 9, 17])
        sequence = catalog.expected_sequence(task)
        events = random_valid_stream(rng, catalog, task=task)
        whole = fold_state(events, sequence)
        incremental = {slot: SegmentRecord(slot) for slot in sequence}
        for event in events:
            apply_event(incremental, event)
        assert [vars(r) for r in whole] == [vars(incremental[s]) for s in sequence]


def test_fold_prefix_then_suffix_equals_whole(catalog):
    rng = random.Random(5)
    sequence = catalog.expected_sequence(1)
    events = random_valid_stream(rng, catalog, task=1)
    for cut in range(len(events) + 1):
        partial = {slot: SegmentRecord(slot) for slot in sequence}
        for event in events[:cut]:
            apply_event(partial, event)
        for event in events[cut:]:
            apply_event(partial, event)
        assert [vars(partial[s]) for s in sequence] == [vars(r) for r in fold_state(events, sequence)]


# -- detect_overlaps -------------------------------------------------------------


def test_shared_boundary_is_not_overlap():
    records = [record(IP, 75, 92), record(T, 92, 111)]
    assert detect_overlaps(records) == []


def test_overlap_of_three_frames():
    records = [record(IP, 75, 95), record(T, 92, 111)]
    warnings = detect_overlaps(records)
    assert len(warnings) == 1
    assert warnings[0].overlap_frames == 3
    assert warnings[0].earlier_slot == IP and warnings[0].later_slot == T


def test_single_record_no_warning():
    assert detect_overlaps([record(IP, 10, 20)]) == []


def test_unset_records_skipped():
    assert detect_overlaps([record(IP, 10, 20), record(T)]) == []


def _brute_force_overlaps(records):
    complete = [r for r in records if r.start_frame is not None and r.end_frame is not None]
    expected = set()
    for i in range(len(complete)):
        for j in range(i + 1, len(complete)):
            a, b = complete[i], complete[j]
            if min(a.end_frame, b.end_frame) > max(a.start_frame, b.start_frame):
                expected.add((a.slot.display_name, b.slot.display_name))
    return expected


def _random_records(rng, max_slots=8, frame_max=10_000):
    n = rng.randint(1, max_slots)
    occurrences = {}
    records = []
    for _ in range(n):
        kind = rng.choice(["IP", "T", "MTR", "PR"])
        occurrences[kind] = occurrences.get(kind, 0) + 1
        slot = SegmentSlot(kind, occurrences[kind])
        if rng.random() < 0.2:
            records.append(record(slot))
            continue
        a, b = rng.randint(0, frame_max), rng.randint(0, frame_max)
        lo, hi = min(a, b), max(a, b)
        if rng.random() < 0.15 and lo > 0:
            hi = lo  # force shared-boundary / zero-length shapes
        records.append(record(slot, lo, max(hi, lo + (0 if rng.random() < 0.5 else 1))))
    return records


def test_overlaps_match_brute_force_oracle():
    rng = random.Random(2024)
    for _ in range(300):
        records = _random_records(rng)
        got = {(w.earlier_slot.display_name, w.later_slot.display_name): w.overlap_frames
               for w in detect_overlaps(records)}
        assert set(got) == _brute_force_overlaps(records)
        by_name = {r.slot.display_name: r for r in records}
        for (earlier, later), frames in got.items():
            assert frames == by_name[earlier].end_frame - by_name[later].start_frame
            assert frames > 0


# -- validate_submission -----------------------------------------------------------


def test_valid_submission_ok():
    records = [
        record(IP, 0, 10, True), record(T, 10, 20, True), record(MTR, 20, 30, True),
        record(PR, 30, 40, True), record(MTR2, 40, 50, True),
    ]
    assert validate_submission(records, SEQ) == []


def test_unconfirmed_slot_reported():
    records = [
        record(IP, 0, 10, True), record(T, 10, 20, False), record(MTR, 20, 30, True),
        record(PR, 30, 40, True), record(MTR2, 40, 50, True),
    ]
    errors = validate_submission(records, SEQ)
    assert len(errors) == 1
    assert errors[0].code == "unconfirmed_segment"
    assert "T" in errors[0].message


def test_all_violations_reported_without_short_circuit():
    # overlapping IP/T plus unconfirmed PR -> exactly two errors
    records = [
        record(IP, 0, 15, True), record(T, 10, 20, True), record(MTR, 20, 30, True),
        record(PR, 30, 40, False), record(MTR2, 40, 50, True),
    ]
    errors = validate_submission(records, SEQ)
    assert sorted(e.code for e in errors) == ["overlapping_segments", "unconfirmed_segment"]


def test_zero_length_confirmed_segment_reported():
    records = [
        record(IP, 10, 10, True), record(T, 10, 20, True), record(MTR, 20, 30, True),
        record(PR, 30, 40, True), record(MTR2, 40, 50, True),
    ]
    errors = validate_submission(records, SEQ)
    assert [e.code for e in errors] == ["zero_length_segment"]


def test_ok_implies_nonoverlapping_and_confirmed():
    rng = random.Random(77)
    for _ in range(200):
        records = _random_records(rng)
        for r in records:
            r.confirmed = rng.random() < 0.8
        sequence = [r.slot for r in records]
        if validate_submission(records, sequence) == []:
            assert all(r.confirmed for r in records)
            assert detect_overlaps(records) == []
            assert all(r.end_frame > r.start_frame for r in records)


# -- gaps and trim ------------------------------------------------------------------


def test_find_gaps_reports_only_gaps():
    records = [record(IP, 0, 10, True), record(T, 15, 20, True), record(MTR, 20, 30, True)]
    gaps = find_gaps(records)
    assert len(gaps) == 1
    assert gaps[0].gap_frames == 5
    assert gaps[0].earlier_slot == IP and gaps[0].later_slot == T


def test_trim_bounds_matches_millisecond_rounding():
    assert trim_bounds(record(T, 92, 111), 30.0) == (3.067, 3.7)
    assert trim_bounds(record(IP, 0, 30), 30.0) == (0.0, 1.0)


def test_trim_bounds_requires_frames():
    with pytest.raises(ValidationFailure):
        trim_bounds(record(IP, 5, None), 30.0)
    with pytest.raises(ValidationFailure):
        trim_bounds(record(IP, 5, 10), 0.0)


@given(
    start=st.integers(min_value=0, max_value=100_000),
    delta=st.integers(min_value=1, max_value=1000),
    bump=st.integers(min_value=0, max_value=1000),
    fps=st.sampled_from([24.0, 25.0, 30.0, 60.0]),
)
@settings(max_examples=200, deadline=None)
def test_trim_bounds_monotone_in_start(start, delta, bump, fps):
    low = trim_bounds(record(IP, start, start + delta + bump), fps)
    high = trim_bounds(record(IP, start + bump, start + delta + bump), fps)
    assert high[0] >= low[0]
