// Request/response shapes of the annotation service API.

export type Hand = "left" | "right";

export type CameraView = "Ipsilateral" | "Contralateral" | "Transverse" | "Back";

export const CAMERA_VIEWS: CameraView[] = [
  "Ipsilateral",
  "Contralateral",
  "Transverse",
  "Back",
];

export type EventAction =
  | "SelectCamera"
  | "SetStartFrame"
  | "SetEndFrame"
  | "CorrectStartFrame"
  | "CorrectEndFrame"
  | "ConfirmSegment"
  | "PlaybackCheck"
  | "SubmitTask"
  | "FeedbackNote";

export interface EventIn {
  timestamp_ms: number;
  actor_id?: string;
  patient_id: number;
  hand: Hand;
  task_number: number;
  segment: string;
  action: EventAction;
  camera?: CameraView;
  frame_value?: number;
  text?: string;
}

export interface TaskSegment {
  name: string;
  kind: string;
  occurrence: number;
  view: CameraView;
}

export interface TaskOut {
  task_number: number;
  subgroup: string;
  title: string;
  segments: TaskSegment[];
  definitions: Record<string, string>;
  reference_urls: string[];
}

export interface SegmentRecordOut {
  segment: string;
  kind: string;
  start_frame: number | null;
  end_frame: number | null;
  camera_start: CameraView | null;
  camera_end: CameraView | null;
  confirmed: boolean;
  trim_seconds: [number, number] | null;
}

export interface OverlapOut {
  earlier: string;
  later: string;
  overlap_frames: number;
}

export interface SubmissionErrorOut {
  code: string;
  message: string;
  segments: string[];
}

export interface SegmentsResponse {
  patient_id: number;
  hand: Hand;
  task_number: number;
  records: SegmentRecordOut[];
  overlaps: OverlapOut[];
  gaps: { earlier: string; later: string; gap_frames: number }[];
  errors: SubmissionErrorOut[];
  submitted: boolean;
  valid: boolean;
  locked_by: string | null;
}

export interface VideoOut {
  view: CameraView;
  path: string;
  fps: number;
  resolution: string;
  usable: boolean;
}

export interface AssignmentOut {
  assignment_id: number;
  patient_id: number;
  hand: Hand;
  task_number: number;
  rater_id: string;
  status: "pending" | "completed" | "voided";
}

export interface RatingQuestion {
  id: string;
  applies_to: "task" | string[];
  prompt: string;
  answer_type: "ordinal" | "boolean" | "text";
}

export interface RatingIn {
  assignment_id: number;
  task_score: number;
  answers: Record<string, number | boolean | string>;
  segmentation_problem?: string;
}

export interface SessionOut {
  session_id: number;
  patient_id: number;
  hand: Hand;
  session_date: string;
  phase: "NeedsCalibration" | "CameraCheck" | "Administration" | "Closed";
  calibration_ref: string | null;
  camera_status: Record<string, "unchecked" | "ok" | "failed">;
}

export interface RecordingOut {
  recording_id: number;
  session_id: number;
  task_number: number;
  started_at_ms: number;
  stopped_at_ms: number | null;
  timer_seconds: number | null;
  preliminary_score: number | null;
  problem_note: string | null;
  video_refs: Record<string, VideoOut>;
  active: boolean;
}

export interface ApiErrorBody {
  machine_code: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public machineCode: string,
    message: string,
  ) {
    super(message);
  }
}
