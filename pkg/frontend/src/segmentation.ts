// Segmentation screen logic, kept free of DOM so the UI contract is
// testable. All table state derives from the last server response: the
// client never caches an annotation it made, it just refreshes, so a page
// reload reproduces exactly what the server folded.

import { ApiClient } from "./api.js";
import { PlayerState } from "./player.js";
import {
  CameraView,
  EventIn,
  Hand,
  SegmentsResponse,
  TaskOut,
} from "./types.js";

export interface SegmentRow {
  segment: string;
  kind: string;
  definition: string;
  recommendedView: CameraView;
  startFrame: number | null;
  endFrame: number | null;
  confirmed: boolean;
  overlapping: boolean; // highlight iff the server fold reports an overlap
  trimSeconds: [number, number] | null;
}

export interface SegmentationViewModel {
  rows: SegmentRow[];
  submitEnabled: boolean;
  submitBlockedReasons: string[];
  submitted: boolean;
  lockedBy: string | null;
  activeSegment: string | null;
  defaultView: CameraView | null;
}

export function buildViewModel(task: TaskOut, state: SegmentsResponse): SegmentationViewModel {
  const overlapping = new Set<string>();
  for (const overlap of state.overlaps) {
    overlapping.add(overlap.earlier);
    overlapping.add(overlap.later);
  }
  const byName = new Map(state.records.map((r) => [r.segment, r]));
  const rows: SegmentRow[] = task.segments.map((seg) => {
    const record = byName.get(seg.name);
    return {
      segment: seg.name,
      kind: seg.kind,
      definition: task.definitions[seg.kind] ?? "",
      recommendedView: seg.view,
      startFrame: record?.start_frame ?? null,
      endFrame: record?.end_frame ?? null,
      confirmed: record?.confirmed ?? false,
      overlapping: overlapping.has(seg.name),
      trimSeconds: record?.trim_seconds ?? null,
    };
  });

  const reasons: string[] = [];
  for (const row of rows) {
    if (!row.confirmed) reasons.push(`segment ${row.segment} is not checked off`);
  }
  for (const error of state.errors) {
    if (error.code !== "unconfirmed_segment") reasons.push(error.message);
  }

  const active = rows.find((r) => !r.confirmed) ?? null;
  return {
    rows,
    submitEnabled: reasons.length === 0 && !state.submitted,
    submitBlockedReasons: reasons,
    submitted: state.submitted,
    lockedBy: state.locked_by,
    activeSegment: active ? active.segment : null,
    defaultView: active ? active.recommendedView : null,
  };
}

export class SegmentationController {
  private state: SegmentsResponse | null = null;
  private task: TaskOut | null = null;
  private selectedSegment: string | null = null;
  activeView: CameraView | null = null;

  constructor(
    private api: ApiClient,
    private actorId: string,
    private patient: number,
    private hand: Hand,
    private taskNumber: number,
    private clock: () => number = () => Date.now(),
  ) {}

  get viewModel(): SegmentationViewModel {
    if (!this.task || !this.state) throw new Error("controller not loaded");
    return buildViewModel(this.task, this.state);
  }

  get currentSegment(): string {
    const vm = this.viewModel;
    return this.selectedSegment ?? vm.activeSegment ?? vm.rows[0].segment;
  }

  async load(): Promise<SegmentationViewModel> {
    this.task = await this.api.getTask(this.taskNumber);
    const vm = await this.refresh();
    if (this.activeView === null) this.activeView = vm.defaultView ?? "Ipsilateral";
    return vm;
  }

  async refresh(): Promise<SegmentationViewModel> {
    this.state = await this.api.getSegments(this.patient, this.hand, this.taskNumber);
    return this.viewModel;
  }

  selectSegment(segment: string): void {
    this.selectedSegment = segment;
  }

  private baseEvent(): Omit<EventIn, "segment" | "action"> {
    return {
      timestamp_ms: this.clock(),
      actor_id: this.actorId,
      patient_id: this.patient,
      hand: this.hand,
      task_number: this.taskNumber,
    };
  }

  private async post(events: EventIn[]): Promise<SegmentationViewModel> {
    await this.api.postEvents(events);
    return this.refresh();
  }

  // the IN button writes the player's current frame for the active segment
  async markIn(player: PlayerState): Promise<SegmentationViewModel> {
    const segment = this.currentSegment;
    const record = this.state!.records.find((r) => r.segment === segment);
    return this.post([
      {
        ...this.baseEvent(),
        segment,
        action: record?.start_frame == null ? "SetStartFrame" : "CorrectStartFrame",
        camera: this.activeView ?? "Ipsilateral",
        frame_value: player.currentFrame,
      },
    ]);
  }

  async markOut(player: PlayerState): Promise<SegmentationViewModel> {
    const segment = this.currentSegment;
    const record = this.state!.records.find((r) => r.segment === segment);
    return this.post([
      {
        ...this.baseEvent(),
        segment,
        action: record?.end_frame == null ? "SetEndFrame" : "CorrectEndFrame",
        camera: this.activeView ?? "Ipsilateral",
        frame_value: player.currentFrame,
      },
    ]);
  }

  async switchView(view: CameraView): Promise<SegmentationViewModel> {
    this.activeView = view;
    return this.post([
      { ...this.baseEvent(), segment: this.currentSegment, action: "SelectCamera", camera: view },
    ]);
  }

  async confirmSegment(segment: string): Promise<SegmentationViewModel> {
    return this.post([{ ...this.baseEvent(), segment, action: "ConfirmSegment" }]);
  }

  // opens the trimmed playback window and logs the cross-check
  async playbackCheck(segment: string, player: PlayerState): Promise<SegmentationViewModel> {
    const row = this.viewModel.rows.find((r) => r.segment === segment);
    if (!row || row.startFrame == null || row.endFrame == null) {
      throw new Error(`segment ${segment} has no IN/OUT window to play back`);
    }
    player.setTrimWindow({ startFrame: row.startFrame, endFrame: row.endFrame });
    return this.post([{ ...this.baseEvent(), segment, action: "PlaybackCheck" }]);
  }

  async submit(): Promise<SegmentationViewModel> {
    const vm = this.viewModel;
    if (!vm.submitEnabled) {
      throw new Error(`submit blocked: ${vm.submitBlockedReasons.join("; ")}`);
    }
    return this.post([
      { ...this.baseEvent(), segment: this.currentSegment, action: "SubmitTask" },
    ]);
  }

  async sendFeedback(text: string): Promise<SegmentationViewModel> {
    return this.post([
      { ...this.baseEvent(), segment: this.currentSegment, action: "FeedbackNote", text },
    ]);
  }
}
