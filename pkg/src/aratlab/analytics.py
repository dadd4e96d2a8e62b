"""Annotator-behavior analytics over event streams.

Computes per-segment completion times with learning-curve batching,
IQR-based outlier removal, recommended-view usage, and the camera-switch
classification table. All functions are pure over immutable event snapshots.

Definitions that the log itself does not pin down, fixed here:

* a segment's clock runs from the first event addressing its slot to its
  final ConfirmSegment; unconfirmed segments are excluded;
* a "switch" is a SelectCamera event whose view differs from the currently
  active view (as established by prior camera-bearing events); its window
  extends to the next SelectCamera event or stream end;
* switch categories are non-exclusive window memberships, so a slot's
  percentages may sum past 100;
* "total entry" for the overall switch fraction means all frame-bearing
  events (see :func:`overall_switch_fraction` to change that reading).
"""

from __future__ import annotations

import statistics
from collections import defaultdict
from dataclasses import dataclass, field

from .catalog import Catalog, SegmentSlot
from .errors import ValidationFailure
from .events import AnnotationEvent, EventAction

BATCH_SIZE_DEFAULT = 10
MIN_GROUP_FOR_IQR = 4
IQR_MULTIPLIER = 1.5


@dataclass(frozen=True)
class SegmentCompletion:
    """Time one annotator spent completing one segment instance."""

    actor_id: str
    patient_id: int
    hand: str
    task_number: int
    slot: SegmentSlot
    duration_seconds: float
    completion_index: int  # 1-based completion order within the actor's work


@dataclass(frozen=True)
class BatchMean:
    batch_index: int
    mean_seconds: float
    count: int
    partial: bool


@dataclass(frozen=True)
class SlotSwitchRow:
    """Per-segment switch classification, percentages of that slot's switches."""

    segment_name: str
    switches: int
    pct_start_input: float
    pct_end_input: float
    pct_start_correction: float
    pct_end_correction: float
    pct_checking: float


@dataclass(frozen=True)
class ViewUsage:
    actor_id: str
    kind: str
    frame_events: int
    recommended_events: int

    @property
    def pct(self) -> float:
        return 100.0 * self.recommended_events / self.frame_events if self.frame_events else 0.0


@dataclass(frozen=True)
class ViewUsageSummary:
    kind: str
    mean_pct: float
    std_pct: float
    actor_count: int

    @property
    def single_actor(self) -> bool:
        return self.actor_count < 2


def segment_durations(events: list[AnnotationEvent]) -> list[SegmentCompletion]:
    """Duration per confirmed segment instance: first touch to final confirm."""
    first_touch: dict[tuple, int] = {}
    last_confirm: dict[tuple, int] = {}
    instance_meta: dict[tuple, AnnotationEvent] = {}

    for event in events:
        key = (event.actor_id, event.patient_id, event.hand, event.task_number, event.slot)
        if key not in first_touch:
            first_touch[key] = event.timestamp_ms
            instance_meta[key] = event
        if event.action == EventAction.CONFIRM_SEGMENT:
            last_confirm[key] = event.timestamp_ms

    # completion order per actor, by final confirm time (ties by first touch)
    per_actor: dict[str, list[tuple]] = defaultdict(list)
    for key, confirmed_at in last_confirm.items():
        per_actor[key[0]].append((confirmed_at, first_touch[key], key))

    completions: list[SegmentCompletion] = []
    for actor, items in per_actor.items():
        items.sort(key=lambda item: (item[0], item[1]))  # stable on remaining ties
        for index, (confirmed_at, touched_at, key) in enumerate(items, start=1):
            event = instance_meta[key]
            completions.append(
                SegmentCompletion(
                    actor_id=actor,
                    patient_id=event.patient_id,
                    hand=event.hand,
                    task_number=event.task_number,
                    slot=event.slot,
                    duration_seconds=(confirmed_at - touched_at) / 1000.0,
                    completion_index=index,
                )
            )
    completions.sort(key=lambda c: (c.actor_id, c.completion_index))
    return completions


def _iqr_bounds(values: list[float]) -> tuple[float, float]:
    q1, _, q3 = statistics.quantiles(values, n=4, method="inclusive")
    iqr = q3 - q1
    return (q1 - IQR_MULTIPLIER * iqr, q3 + IQR_MULTIPLIER * iqr)


def filter_outliers(completions: list[SegmentCompletion]) -> list[SegmentCompletion]:
    """Remove IQR outliers per (actor, segment kind), preserving input order.

    Iterates to a fixed point within each group, so filtering is idempotent:
    a second pass never removes anything more. Groups with fewer than four
    values pass through untouched (quartiles undefined).
    """
    groups: dict[tuple[str, str], list[SegmentCompletion]] = defaultdict(list)
    for completion in completions:
        groups[(completion.actor_id, completion.slot.kind)].append(completion)

    keep: set[int] = set()
    for members in groups.values():
        surviving = list(members)
        while len(surviving) >= MIN_GROUP_FOR_IQR:
            low, high = _iqr_bounds([c.duration_seconds for c in surviving])
            inside = [c for c in surviving if low <= c.duration_seconds <= high]
            if len(inside) == len(surviving):
                break
            surviving = inside
        keep.update(id(c) for c in surviving)

    return [c for c in completions if id(c) in keep]


def batched_means(
    durations_seconds: list[float], batch_size: int = BATCH_SIZE_DEFAULT
) -> list[BatchMean]:
    """Means of consecutive non-overlapping batches in completion order.

    The caller supplies durations already ordered by completion index. The
    final short batch is included and flagged partial.
    """
    if batch_size < 1:
        raise ValidationFailure("bad_batch_size", "batch_size must be >= 1")
    batches = []
    for offset in range(0, len(durations_seconds), batch_size):
        chunk = durations_seconds[offset : offset + batch_size]
        batches.append(
            BatchMean(
                batch_index=offset // batch_size + 1,
                mean_seconds=sum(chunk) / len(chunk),
                count=len(chunk),
                partial=len(chunk) < batch_size,
            )
        )
    return batches


def recommended_view_usage(
    events: list[AnnotationEvent], catalog: Catalog
) -> tuple[list[ViewUsage], list[ViewUsageSummary]]:
    """Share of frame inputs entered on the slot's recommended view.

    Returns per-(actor, kind) usage plus the across-actor mean and sample
    standard deviation per kind (std 0 when only one actor contributed).
    """
    counts: dict[tuple[str, str], list[int]] = defaultdict(lambda: [0, 0])
    for event in events:
        if event.action not in EventAction.FRAME_ACTIONS:
            continue
        recommended = catalog.recommended_view(event.task_number, event.slot)
        pair = counts[(event.actor_id, event.slot.kind)]
        pair[0] += 1
        if event.camera == recommended:
            pair[1] += 1

    usages = [
        ViewUsage(actor_id=actor, kind=kind, frame_events=total, recommended_events=hits)
        for (actor, kind), (total, hits) in sorted(counts.items())
    ]

    by_kind: dict[str, list[float]] = defaultdict(list)
    for usage in usages:
        by_kind[usage.kind].append(usage.pct)
    summaries = [
        ViewUsageSummary(
            kind=kind,
            mean_pct=statistics.mean(pcts),
            std_pct=statistics.stdev(pcts) if len(pcts) > 1 else 0.0,
            actor_count=len(pcts),
        )
        for kind, pcts in sorted(by_kind.items())
    ]
    return usages, summaries


@dataclass
class _SwitchWindow:
    slot: SegmentSlot
    contains: set[str] = field(default_factory=set)


_CATEGORY_ACTIONS = {
    EventAction.SET_START_FRAME: "start_input",
    EventAction.SET_END_FRAME: "end_input",
    EventAction.CORRECT_START_FRAME: "start_correction",
    EventAction.CORRECT_END_FRAME: "end_correction",
    EventAction.PLAYBACK_CHECK: "checking",
}


def _scan_switch_windows(events: list[AnnotationEvent]) -> list[_SwitchWindow]:
    """Per stream: windows opened by view-changing SelectCamera events.

    A window closes at the next SelectCamera event (changing or not) or at
    stream end. Category membership is binary per window.
    """
    streams: dict[tuple, list[AnnotationEvent]] = defaultdict(list)
    for event in events:
        streams[event.stream_key].append(event)

    windows: list[_SwitchWindow] = []
    for stream in streams.values():
        active_view: str | None = None
        open_window: _SwitchWindow | None = None
        for event in stream:
            if event.action == EventAction.SELECT_CAMERA:
                open_window = None
                if active_view is not None and event.camera != active_view:
                    open_window = _SwitchWindow(slot=event.slot)
                    windows.append(open_window)
                active_view = event.camera
            else:
                if event.camera is not None:
                    active_view = event.camera
                if open_window is not None and event.action in _CATEGORY_ACTIONS:
                    open_window.contains.add(_CATEGORY_ACTIONS[event.action])
    return windows


def switch_stats(events: list[AnnotationEvent]) -> list[SlotSwitchRow]:
    """Camera-switch classification per segment display name.

    Each percentage is the share of that slot's switches whose window
    contains the category's action at least once; categories overlap.
    """
    per_slot: dict[str, list[_SwitchWindow]] = defaultdict(list)
    for window in _scan_switch_windows(events):
        per_slot[window.slot.display_name].append(window)

    rows = []
    for name, windows in sorted(per_slot.items()):
        total = len(windows)

        def pct(category: str) -> float:
            return 100.0 * sum(1 for w in windows if category in w.contains) / total

        rows.append(
            SlotSwitchRow(
                segment_name=name,
                switches=total,
                pct_start_input=pct("start_input"),
                pct_end_input=pct("end_input"),
                pct_start_correction=pct("start_correction"),
                pct_end_correction=pct("end_correction"),
                pct_checking=pct("checking"),
            )
        )
    return rows


def overall_switch_fraction(events: list[AnnotationEvent]) -> float:
    """View-changing camera switches over total frame-bearing entries.

    This is the single place encoding the "total entry" denominator; change
    it here if a different reading is ever wanted.
    """
    switches = len(_scan_switch_windows(events))
    entries = sum(1 for e in events if e.action in EventAction.FRAME_ACTIONS)
    return switches / entries if entries else 0.0


def completion_series(
    completions: list[SegmentCompletion], batch_size: int = BATCH_SIZE_DEFAULT
) -> dict[str, dict[str, list[BatchMean]]]:
    """Plot-ready batched series per actor per segment kind (learning curves)."""
    grouped: dict[str, dict[str, list[SegmentCompletion]]] = defaultdict(lambda: defaultdict(list))
    for completion in completions:
        grouped[completion.actor_id][completion.slot.kind].append(completion)

    series: dict[str, dict[str, list[BatchMean]]] = {}
    for actor, kinds in grouped.items():
        series[actor] = {}
        for kind, items in kinds.items():
            items.sort(key=lambda c: c.completion_index)
            series[actor][kind] = batched_means([c.duration_seconds for c in items], batch_size)
    return series


def build_report(events: list[AnnotationEvent], catalog: Catalog) -> dict:
    """Single combined JSON-ready analytics report."""
    completions = filter_outliers(segment_durations(events))
    usages, summaries = recommended_view_usage(events, catalog)
    return {
        "durations": [
            {
                "actor_id": c.actor_id,
                "patient_id": c.patient_id,
                "hand": c.hand,
                "task_number": c.task_number,
                "segment": c.slot.display_name,
                "completion_index": c.completion_index,
                "duration_seconds": round(c.duration_seconds, 3),
            }
            for c in completions
        ],
        "completion_series": {
            actor: {
                kind: [
                    {
                        "batch_index": b.batch_index,
                        "mean_seconds": round(b.mean_seconds, 3),
                        "count": b.count,
                        "partial": b.partial,
                    }
                    for b in batches
                ]
                for kind, batches in kinds.items()
            }
            for actor, kinds in completion_series(completions).items()
        },
        "view_usage": [
            {
                "actor_id": u.actor_id,
                "kind": u.kind,
                "frame_events": u.frame_events,
                "recommended_events": u.recommended_events,
                "pct": round(u.pct, 2),
            }
            for u in usages
        ],
        "view_usage_summary": [
            {
                "kind": s.kind,
                "mean_pct": round(s.mean_pct, 2),
                "std_pct": round(s.std_pct, 2),
                "actor_count": s.actor_count,
                "single_actor": s.single_actor,
            }
            for s in summaries
        ],
        "switch_stats": [
            {
                "segment": r.segment_name,
                "switches": r.switches,
                "pct_start_input": round(r.pct_start_input, 2),
                "pct_end_input": round(r.pct_end_input, 2),
                "pct_start_correction": round(r.pct_start_correction, 2),
                "pct_end_correction": round(r.pct_end_correction, 2),
                "pct_checking": round(r.pct_checking, 2),
            }
            for r in switch_stats(events)
        ],
        "overall_switch_fraction": round(overall_switch_fraction(events), 4),
    }
