// Capture administration screen logic: three-phase gating with explanatory
// reasons for disabled controls, and the task timer display.

import { ApiClient } from "./api.js";
import { CAMERA_VIEWS, Hand, RecordingOut, SessionOut } from "./types.js";

export interface CaptureViewModel {
  phase: SessionOut["phase"];
  calibrated: boolean;
  cameraStatus: Record<string, string>;
  administrationEnabled: boolean;
  gateReason: string | null; // tooltip for the disabled administration tab
  recordingTask: number | null;
  startEnabled: boolean;
  stopEnabled: boolean;
}

export function buildCaptureViewModel(
  session: SessionOut,
  activeRecording: RecordingOut | null,
): CaptureViewModel {
  const calibrated = session.calibration_ref !== null;
  const camerasOk = CAMERA_VIEWS.every((view) => session.camera_status[view] === "ok");
  let gateReason: string | null = null;
  if (!calibrated) gateReason = "calibrate the cameras first";
  else if (!camerasOk) gateReason = "all four cameras must pass the check";
  else if (session.phase === "Closed") gateReason = "session is closed";

  const admin = session.phase === "Administration";
  const recording = activeRecording && activeRecording.stopped_at_ms === null;
  return {
    phase: session.phase,
    calibrated,
    cameraStatus: { ...session.camera_status },
    administrationEnabled: admin,
    gateReason: admin ? null : gateReason,
    recordingTask: recording ? activeRecording.task_number : null,
    startEnabled: admin && !recording,
    stopEnabled: admin && !!recording,
  };
}

export function timerDisplaySeconds(recording: RecordingOut, nowMs: number): number {
  const end = recording.stopped_at_ms ?? nowMs;
  return Math.max(0, (end - recording.started_at_ms) / 1000);
}

export class CaptureController {
  session: SessionOut | null = null;
  activeRecording: RecordingOut | null = null;

  constructor(
    private api: ApiClient,
    private clock: () => number = () => Date.now(),
  ) {}

  get viewModel(): CaptureViewModel {
    if (!this.session) throw new Error("no session");
    return buildCaptureViewModel(this.session, this.activeRecording);
  }

  async begin(patient: number, hand: Hand, date?: string): Promise<CaptureViewModel> {
    this.session = await this.api.postSession(patient, hand, date);
    return this.viewModel;
  }

  async calibrate(artifactRef: string): Promise<CaptureViewModel> {
    this.session = await this.api.calibrate(this.session!.session_id, artifactRef);
    return this.viewModel;
  }

  async checkCamera(view: string, ok: boolean): Promise<CaptureViewModel> {
    this.session = await this.api.checkCamera(this.session!.session_id, view, ok);
    return this.viewModel;
  }

  async startTask(task: number): Promise<CaptureViewModel> {
    const vm = this.viewModel;
    if (!vm.startEnabled) {
      throw new Error(vm.gateReason ?? "a recording is already running");
    }
    this.activeRecording = await this.api.startTask(
      this.session!.session_id, task, this.clock(),
    );
    return this.viewModel;
  }

  async stopTask(): Promise<RecordingOut> {
    const vm = this.viewModel;
    if (!vm.stopEnabled) throw new Error("no recording is running");
    const recording = await this.api.stopTask(this.session!.session_id, this.clock());
    this.activeRecording = recording;
    return recording;
  }

  async recordPreliminary(task: number, score: number, note?: string): Promise<RecordingOut> {
    if (!Number.isInteger(score) || score < 0 || score > 3) {
      throw new Error("0-3 only");
    }
    return this.api.recordPreliminary(this.session!.session_id, task, score, note);
  }

  runningTimerSeconds(): number | null {
    if (!this.activeRecording) return null;
    return timerDisplaySeconds(this.activeRecording, this.clock());
  }
}
