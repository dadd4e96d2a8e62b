// Typed client over the annotation service. The only client-side
// configuration is the endpoint base (and optionally the actor token).

import {
  ApiError,
  ApiErrorBody,
  AssignmentOut,
  EventIn,
  Hand,
  RecordingOut,
  SegmentsResponse,
  SessionOut,
  TaskOut,
  VideoOut,
  RatingIn,
} from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string | null = null,
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "Content-Type": "application/json" };
    if (this.token) headers["X-Actor-Token"] = this.token;
    const response = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    const data = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const err = (data ?? {}) as Partial<ApiErrorBody>;
      throw new ApiError(
        response.status,
        err.machine_code ?? "unknown_error",
        err.message ?? `HTTP ${response.status}`,
      );
    }
    return data as T;
  }

  getTask(taskNumber: number): Promise<TaskOut> {
    return this.request("GET", `/catalog/tasks/${taskNumber}`);
  }

  getTasks(): Promise<TaskOut[]> {
    return this.request("GET", "/catalog/tasks");
  }

  postEvents(events: EventIn[]): Promise<{ event_ids: number[] }> {
    return this.request("POST", "/events", events);
  }

  getSegments(patient: number, hand: Hand, task: number): Promise<SegmentsResponse> {
    return this.request(
      "GET",
      `/segments?patient=${patient}&hand=${encodeURIComponent(hand)}&task=${task}`,
    );
  }

  getVideos(patient: number, task: number, hand: Hand): Promise<VideoOut[]> {
    return this.request(
      "GET",
      `/patients/${patient}/tasks/${task}/videos?hand=${encodeURIComponent(hand)}`,
    );
  }

  getAssignments(rater?: string, queue = false): Promise<AssignmentOut[]> {
    const params = new URLSearchParams();
    if (rater) params.set("rater", rater);
    if (queue) params.set("queue", "true");
    const suffix = params.toString() ? `?${params.toString()}` : "";
    return this.request("GET", `/assignments${suffix}`);
  }

  postRating(rating: RatingIn): Promise<AssignmentOut> {
    return this.request("POST", "/ratings", rating);
  }

  postFeedback(assignmentId: number, text: string): Promise<unknown> {
    return this.request("POST", "/feedback", { assignment_id: assignmentId, text });
  }

  postSession(patient: number, hand: Hand, date?: string): Promise<SessionOut> {
    return this.request("POST", "/sessions", { patient_id: patient, hand, date });
  }

  getSession(sessionId: number): Promise<SessionOut> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  calibrate(sessionId: number, artifactRef: string): Promise<SessionOut> {
    return this.request("POST", `/sessions/${sessionId}/calibrate`, {
      artifact_ref: artifactRef,
    });
  }

  checkCamera(sessionId: number, view: string, ok: boolean): Promise<SessionOut> {
    return this.request("POST", `/sessions/${sessionId}/camera-check`, { view, ok });
  }

  startTask(sessionId: number, task: number, atMs: number): Promise<RecordingOut> {
    return this.request("POST", `/sessions/${sessionId}/start-task`, {
      task_number: task,
      at_ms: atMs,
    });
  }

  stopTask(sessionId: number, atMs: number): Promise<RecordingOut> {
    return this.request("POST", `/sessions/${sessionId}/stop-task`, { at_ms: atMs });
  }

  recordPreliminary(
    sessionId: number,
    task: number,
    score: number,
    note?: string,
  ): Promise<RecordingOut> {
    return this.request("POST", `/sessions/${sessionId}/preliminary`, {
      task_number: task,
      score,
      note,
    });
  }
}
