"""Deterministic synthetic annotator streams.

Real annotator logs are not shippable, so the analytics pipeline is exercised
against generated ones. The generator produces event streams that

* pass every event-store invariant (first input is Set*, corrections follow,
  confirms close each segment, streams submit),
* realize an exponential learning curve exactly: the i-th segment an actor
  completes takes ``floor + (initial - floor) * exp(-i / decay)`` seconds,
* hit per-segment camera-switch category counts to the event, so the switch
  classification can be inverted and checked end to end.

Switch windows are kept disjoint from routine work by having the simulated
segmentor re-pin the active view (a SelectCamera that does not change the
view) when moving to the next segment after a switch; analytics ignores
non-changing selects, so only the scheduled switches are ever counted.

Identical seeds produce identical streams; per-actor generators derive their
own seeds from the master seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

from .catalog import Catalog, CameraView, SegmentSlot
from .errors import ValidationFailure
from .events import AnnotationEvent, EventAction

CATEGORIES = ("start_input", "end_input", "start_correction", "end_correction", "checking")

SEGMENT_GAP_MS = 500
SUBMIT_GAP_MS = 500


@dataclass(frozen=True)
class SwitchTarget:
    """Requested switch count and category percentages for one segment name."""

    switches: int
    pct_start_input: float = 0.0
    pct_end_input: float = 0.0
    pct_start_correction: float = 0.0
    pct_end_correction: float = 0.0
    pct_checking: float = 0.0

    def category_counts(self) -> dict[str, int]:
        pcts = {
            "start_input": self.pct_start_input,
            "end_input": self.pct_end_input,
            "start_correction": self.pct_start_correction,
            "end_correction": self.pct_end_correction,
            "checking": self.pct_checking,
        }
        counts = {}
        for category, pct in pcts.items():
            if not 0.0 <= pct <= 100.0:
                raise ValidationFailure("bad_percentage", f"{category} must be in [0, 100]")
            counts[category] = round(pct / 100.0 * self.switches)
        return counts


@dataclass
class SimulationProfile:
    actors: int = 3
    segments_per_actor: int = 100
    initial_seconds: float = 60.0
    floor_seconds: float = 20.0
    decay_segments: float = 10.0
    correction_rate: float = 0.1
    switch_propensity: dict[str, float] = field(default_factory=dict)  # per segment kind
    switch_targets: dict[str, SwitchTarget] = field(default_factory=dict)  # per display name
    tasks: tuple[int, ...] = (1,)
    hand: str = "left"
    seed: int = 0

    def validate(self) -> None:
        if self.actors < 1:
            raise ValidationFailure("bad_profile", "actors must be >= 1")
        if self.segments_per_actor < 1:
            raise ValidationFailure("bad_profile", "segments_per_actor must be >= 1")
        if self.floor_seconds <= 0:
            raise ValidationFailure("bad_profile", "floor_seconds must be positive")
        if self.initial_seconds < self.floor_seconds:
            raise ValidationFailure("bad_profile", "initial_seconds must be >= floor_seconds")
        if self.decay_segments <= 0:
            raise ValidationFailure("bad_profile", "decay_segments must be positive")
        if not 0.0 <= self.correction_rate <= 1.0:
            raise ValidationFailure("bad_profile", "correction_rate must be in [0, 1]")
        for kind, propensity in self.switch_propensity.items():
            if not 0.0 <= propensity <= 1.0:
                raise ValidationFailure("bad_profile", f"switch propensity for {kind} must be in [0, 1]")
        if self.hand not in ("left", "right"):
            raise ValidationFailure("bad_profile", "hand must be left or right")
        for name, target in self.switch_targets.items():
            if target.switches < 0:
                raise ValidationFailure("bad_profile", f"switch count for {name} must be >= 0")
            target.category_counts()

    def duration_seconds(self, completion_index: int) -> float:
        """Learning curve: time the actor's i-th completed segment takes."""
        return self.floor_seconds + (self.initial_seconds - self.floor_seconds) * math.exp(
            -completion_index / self.decay_segments
        )

    def to_dict(self) -> dict:
        return {
            "actors": self.actors,
            "segments_per_actor": self.segments_per_actor,
            "initial_seconds": self.initial_seconds,
            "floor_seconds": self.floor_seconds,
            "decay_segments": self.decay_segments,
            "correction_rate": self.correction_rate,
            "switch_propensity": dict(self.switch_propensity),
            "switch_targets": {
                name: {
                    "switches": t.switches,
                    "pct_start_input": t.pct_start_input,
                    "pct_end_input": t.pct_end_input,
                    "pct_start_correction": t.pct_start_correction,
                    "pct_end_correction": t.pct_end_correction,
                    "pct_checking": t.pct_checking,
                }
                for name, t in self.switch_targets.items()
            },
            "tasks": list(self.tasks),
            "hand": self.hand,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationProfile":
        targets = {
            name: SwitchTarget(
                switches=int(raw["switches"]),
                pct_start_input=float(raw.get("pct_start_input", 0.0)),
                pct_end_input=float(raw.get("pct_end_input", 0.0)),
                pct_start_correction=float(raw.get("pct_start_correction", 0.0)),
                pct_end_correction=float(raw.get("pct_end_correction", 0.0)),
                pct_checking=float(raw.get("pct_checking", 0.0)),
            )
            for name, raw in (data.get("switch_targets") or {}).items()
        }
        profile = cls(
            actors=int(data.get("actors", 3)),
            segments_per_actor=int(data.get("segments_per_actor", 100)),
            initial_seconds=float(data.get("initial_seconds", 60.0)),
            floor_seconds=float(data.get("floor_seconds", 20.0)),
            decay_segments=float(data.get("decay_segments", 10.0)),
            correction_rate=float(data.get("correction_rate", 0.1)),
            switch_propensity={k: float(v) for k, v in (data.get("switch_propensity") or {}).items()},
            switch_targets=targets,
            tasks=tuple(int(t) for t in data.get("tasks", (1,))),
            hand=str(data.get("hand", "left")),
            seed=int(data.get("seed", 0)),
        )
        profile.validate()
        return profile


def _spread(total: int, members: int) -> list[bool]:
    """Evenly spread ``members`` True values over ``total`` positions."""
    return [((i + 1) * members) // total > (i * members) // total for i in range(total)]


@dataclass
class _PlannedInstance:
    video_index: int
    slot: SegmentSlot
    task_number: int
    slot_index: int
    window: set[str] | None = None  # switch categories, None = no switch


class _ActorSimulator:
    def __init__(self, profile: SimulationProfile, catalog: Catalog, actor_index: int):
        self.profile = profile
        self.catalog = catalog
        self.actor_index = actor_index
        self.actor_id = f"segmentor{actor_index + 1}"
        self.rng = random.Random(f"{profile.seed}:{actor_index}")
        self.events: list[AnnotationEvent] = []
        self.clock_ms = 0
        self.completed = 0

    # -- planning ---------------------------------------------------------

    def _plan(self) -> list[_PlannedInstance]:
        instances: list[_PlannedInstance] = []
        video_index = 0
        while len(instances) < self.profile.segments_per_actor:
            task_number = self.profile.tasks[video_index % len(self.profile.tasks)]
            sequence = self.catalog.expected_sequence(task_number)
            for slot_index, slot in enumerate(sequence):
                instances.append(
                    _PlannedInstance(
                        video_index=video_index,
                        slot=slot,
                        task_number=task_number,
                        slot_index=slot_index,
                    )
                )
            video_index += 1

        self._schedule_switches(instances)
        return instances

    def _schedule_switches(self, instances: list[_PlannedInstance]) -> None:
        by_name: dict[str, list[_PlannedInstance]] = {}
        for instance in instances:
            by_name.setdefault(instance.slot.display_name, []).append(instance)

        for name, target in self.profile.switch_targets.items():
            hosts = by_name.get(name, [])
            if target.switches > len(hosts):
                raise ValidationFailure(
                    "infeasible_targets",
                    f"{name}: {target.switches} switches requested but only "
                    f"{len(hosts)} instances available for actor {self.actor_id}",
                )
            if target.switches == 0:
                continue
            counts = target.category_counts()
            membership = {c: _spread(target.switches, counts[c]) for c in CATEGORIES}
            chosen = _spread(len(hosts), target.switches)
            switch_index = 0
            for host, is_chosen in zip(hosts, chosen):
                if is_chosen:
                    host.window = {c for c in CATEGORIES if membership[c][switch_index]}
                    switch_index += 1

        # propensity-driven switches for names without explicit targets
        for name, hosts in by_name.items():
            if name in self.profile.switch_targets:
                continue
            propensity = self.profile.switch_propensity.get(hosts[0].slot.kind, 0.0)
            if propensity <= 0:
                continue
            switches = round(propensity * len(hosts))
            chosen = _spread(len(hosts), switches)
            for host, is_chosen in zip(hosts, chosen):
                if is_chosen:
                    window = {"end_input"}
                    if self.rng.random() < 0.5:
                        window.add("checking")
                    if self.rng.random() < self.profile.correction_rate:
                        window.add("end_correction")
                    host.window = window

    # -- emission ----------------------------------------------------------

    def _emit(self, staged: list, instance: _PlannedInstance, patient_id: int,
              action: str, camera: str | None = None, frame: int | None = None,
              text: str | None = None) -> None:
        staged.append(
            AnnotationEvent(
                timestamp_ms=0,  # assigned when the instance is finalized
                actor_id=self.actor_id,
                patient_id=patient_id,
                hand=self.profile.hand,
                task_number=instance.task_number,
                slot=instance.slot,
                action=action,
                camera=camera,
                frame_value=frame,
                text=text,
            )
        )

    def _finalize_instance(self, staged: list[AnnotationEvent]) -> None:
        """Stamp timestamps so first touch -> confirm spans the learning curve."""
        self.completed += 1
        duration_ms = round(self.profile.duration_seconds(self.completed) * 1000)
        span = len(staged) - 1
        for position, event in enumerate(staged):
            offset = round(position * duration_ms / span) if span else 0
            self.events.append(replace(event, timestamp_ms=self.clock_ms + offset))
        self.clock_ms += duration_ms + SEGMENT_GAP_MS

    def run(self) -> list[AnnotationEvent]:
        instances = self._plan()
        current_video = -1
        active_view: str | None = None
        window_open = False
        video_opening = False

        for instance in instances:
            patient_id = self.actor_index * 100_000 + instance.video_index + 1
            if instance.video_index != current_video:
                if current_video >= 0:
                    self._submit(instances, current_video)
                current_video = instance.video_index
                first_slot = self.catalog.expected_sequence(instance.task_number)[0]
                active_view = self.catalog.recommended_view(instance.task_number, first_slot)
                window_open = False
                video_opening = True

            base = instance.slot_index * 200
            start, end = base + 10, base + 160
            staged: list[AnnotationEvent] = []

            window = instance.window or set()
            free_correction = (
                not window and self.rng.random() < self.profile.correction_rate
            )

            if video_opening:
                # the interface loads the preferred view when a task opens
                self._emit(staged, instance, patient_id, EventAction.SELECT_CAMERA, camera=active_view)
                video_opening = False
            elif window_open:
                # re-pin the current view: closes the previous switch window
                # without counting as a switch
                self._emit(staged, instance, patient_id, EventAction.SELECT_CAMERA, camera=active_view)
                window_open = False

            # initial inputs that must not land inside the switch window
            start_initial = start + 1 if "start_correction" in window else start
            end_initial = end - 1 if ("end_correction" in window or free_correction) else end
            if "start_input" not in window:
                self._emit(staged, instance, patient_id, EventAction.SET_START_FRAME,
                           camera=active_view, frame=start_initial)
            if "end_input" not in window:
                self._emit(staged, instance, patient_id, EventAction.SET_END_FRAME,
                           camera=active_view, frame=end_initial)
            if free_correction:
                self._emit(staged, instance, patient_id, EventAction.CORRECT_END_FRAME,
                           camera=active_view, frame=end)

            if instance.window is not None:
                alternates = [v for v in CameraView.ALL if v != active_view]
                active_view = self.rng.choice(alternates)
                self._emit(staged, instance, patient_id, EventAction.SELECT_CAMERA, camera=active_view)
                window_open = True
                if "start_input" in window:
                    self._emit(staged, instance, patient_id, EventAction.SET_START_FRAME,
                               camera=active_view, frame=start_initial)
                if "end_input" in window:
                    self._emit(staged, instance, patient_id, EventAction.SET_END_FRAME,
                               camera=active_view, frame=end_initial)
                if "start_correction" in window:
                    self._emit(staged, instance, patient_id, EventAction.CORRECT_START_FRAME,
                               camera=active_view, frame=start)
                if "end_correction" in window:
                    self._emit(staged, instance, patient_id, EventAction.CORRECT_END_FRAME,
                               camera=active_view, frame=end)
                if "checking" in window:
                    self._emit(staged, instance, patient_id, EventAction.PLAYBACK_CHECK)

            self._emit(staged, instance, patient_id, EventAction.CONFIRM_SEGMENT)
            self._finalize_instance(staged)

        if current_video >= 0:
            self._submit(instances, current_video)
        return self.events

    def _submit(self, instances: list[_PlannedInstance], video_index: int) -> None:
        last = [i for i in instances if i.video_index == video_index][-1]
        patient_id = self.actor_index * 100_000 + video_index + 1
        self.events.append(
            AnnotationEvent(
                timestamp_ms=self.clock_ms,
                actor_id=self.actor_id,
                patient_id=patient_id,
                hand=self.profile.hand,
                task_number=last.task_number,
                slot=last.slot,
                action=EventAction.SUBMIT_TASK,
            )
        )
        self.clock_ms += SUBMIT_GAP_MS


def simulate_events(profile: SimulationProfile, catalog: Catalog) -> list[AnnotationEvent]:
    """Generate the full multi-actor event stream for a profile."""
    profile.validate()
    events: list[AnnotationEvent] = []
    for actor_index in range(profile.actors):
        events.extend(_ActorSimulator(profile, catalog, actor_index).run())
    return events
