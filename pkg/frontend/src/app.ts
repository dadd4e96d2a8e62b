// DOM wiring for the three screens. All annotation state lives server-side;
// these bindings render the latest view-model and forward clicks as events.

import { ApiClient } from "./api.js";
import { CaptureController, CaptureViewModel } from "./capture.js";
import { PlayerState } from "./player.js";
import { SegmentationController, SegmentationViewModel } from "./segmentation.js";
import { RatingController, RatingFormModel } from "./rating.js";
import {
  ApiError,
  AssignmentOut,
  CAMERA_VIEWS,
  CameraView,
  Hand,
  RatingQuestion,
  VideoOut,
} from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function showError(err: unknown): void {
  const banner = $("error-banner");
  banner.style.display = "block";
  banner.textContent =
    err instanceof ApiError ? `${err.machineCode}: ${err.message}` : String(err);
  setTimeout(() => (banner.style.display = "none"), 6000);
}

async function guard<T>(work: () => Promise<T>): Promise<T | undefined> {
  try {
    return await work();
  } catch (err) {
    showError(err);
    return undefined;
  }
}

// The default rating questionnaire mirrors the service's shipped form; a
// deployment replacing the form should serve its questions to the client.
export const DEFAULT_QUESTIONS: RatingQuestion[] = [
  { id: "task_quality", applies_to: "task", prompt: "Overall movement quality (0-3)", answer_type: "ordinal" },
  { id: "ip_quality", applies_to: ["IP"], prompt: "Initiation and progression (0-3)", answer_type: "ordinal" },
  { id: "t_quality", applies_to: ["T"], prompt: "Termination (0-3)", answer_type: "ordinal" },
  { id: "mtr_quality", applies_to: ["MTR"], prompt: "Manipulation and transport (0-3)", answer_type: "ordinal" },
  { id: "pr_quality", applies_to: ["PR"], prompt: "Placement and release (0-3)", answer_type: "ordinal" },
  { id: "gip_quality", applies_to: ["GIP"], prompt: "Gross initiation and progression (0-3)", answer_type: "ordinal" },
  { id: "gt_quality", applies_to: ["GT"], prompt: "Gross termination (0-3)", answer_type: "ordinal" },
  { id: "compensation_present", applies_to: "task", prompt: "Compensatory movement present?", answer_type: "boolean" },
  { id: "component_notes", applies_to: "task", prompt: "Component observations", answer_type: "text" },
];

function makeClient(): ApiClient {
  const base = ($("base-url") as HTMLInputElement).value.replace(/\/$/, "");
  return new ApiClient(base);
}

function actorId(): string {
  return ($("actor-id") as HTMLInputElement).value || "segmentor1";
}

// ---- screen switching --------------------------------------------------------

export function initNavigation(): void {
  const buttons = document.querySelectorAll<HTMLButtonElement>("header nav button");
  buttons.forEach((button) => {
    button.addEventListener("click", () => {
      buttons.forEach((b) => b.classList.toggle("active", b === button));
      document.querySelectorAll<HTMLElement>("section.screen").forEach((section) => {
        section.classList.toggle(
          "active",
          section.id === `screen-${button.dataset.screen}`,
        );
      });
    });
  });
}

// ---- segmentation screen ------------------------------------------------------

class SegmentationScreen {
  private controller: SegmentationController | null = null;
  private player: PlayerState | null = null;
  private videos: VideoOut[] = [];
  private video = $("seg-video") as HTMLVideoElement;

  bind(): void {
    $("seg-load").addEventListener("click", () => guard(() => this.load()));
    $("seg-in").addEventListener("click", () =>
      guard(async () => this.render(await this.controller!.markIn(this.player!))));
    $("seg-out").addEventListener("click", () =>
      guard(async () => this.render(await this.controller!.markOut(this.player!))));
    $("seg-step-back").addEventListener("click", () => this.step(-1));
    $("seg-step-fwd").addEventListener("click", () => this.step(1));
    $("seg-half").addEventListener("click", () => {
      if (!this.player) return;
      this.player.toggleHalfSpeed();
      this.video.playbackRate = this.player.rate || 1.0;
      if (this.player.rate !== 0) void this.video.play();
    });
    $("seg-submit").addEventListener("click", () =>
      guard(async () => this.render(await this.controller!.submit())));
    $("seg-send-feedback").addEventListener("click", () =>
      guard(async () => {
        const box = $("seg-feedback") as HTMLTextAreaElement;
        if (!box.value.trim()) throw new Error("feedback text required");
        this.render(await this.controller!.sendFeedback(box.value));
        box.value = "";
      }));
    this.video.addEventListener("timeupdate", () => {
      if (!this.player) return;
      this.player.syncFromTime(this.video.currentTime);
      $("seg-frame").textContent = String(this.player.currentFrame);
    });
  }

  private step(direction: 1 | -1): void {
    if (!this.player) return;
    this.video.pause();
    this.player.stepFrame(direction);
    this.video.currentTime = this.player.timeForCurrentFrame();
    $("seg-frame").textContent = String(this.player.currentFrame);
  }

  private async load(): Promise<void> {
    const patient = Number(($("seg-patient") as HTMLInputElement).value);
    const hand = ($("seg-hand") as HTMLSelectElement).value as Hand;
    const task = Number(($("seg-task") as HTMLInputElement).value);
    const api = makeClient();
    this.controller = new SegmentationController(api, actorId(), patient, hand, task);
    const vm = await this.controller.load();
    this.videos = await api.getVideos(patient, task, hand).catch(() => []);
    this.render(vm);
    this.loadVideoForView(this.controller.activeView ?? vm.defaultView ?? "Ipsilateral");
  }

  private loadVideoForView(view: CameraView): void {
    const meta = this.videos.find((v) => v.view === view);
    const fps = meta?.fps ?? 30;
    this.player = new PlayerState(fps, Math.max(1, Math.round((this.video.duration || 600) * fps)));
    if (meta) this.video.src = meta.path;
  }

  private render(vm: SegmentationViewModel): void {
    $("seg-lock").textContent = vm.lockedBy ? `locked by ${vm.lockedBy}` : "";
    const active = vm.rows.find((r) => r.segment === this.controller!.currentSegment);
    $("seg-definition").textContent = active
      ? `${active.segment}: ${active.definition}`
      : "";

    const tbody = $("seg-table");
    tbody.innerHTML = "";
    for (const row of vm.rows) {
      const tr = document.createElement("tr");
      if (row.overlapping) tr.classList.add("overlap");
      if (row.segment === this.controller!.currentSegment) tr.classList.add("selected");
      tr.innerHTML = `
        <td>${row.segment}</td>
        <td>${row.recommendedView}</td>
        <td>${row.startFrame ?? ""}</td>
        <td>${row.endFrame ?? ""}</td>
        <td><button data-play="${row.segment}"
              ${row.startFrame == null || row.endFrame == null ? "disabled" : ""}>▶</button></td>
        <td><input type="checkbox" data-confirm="${row.segment}"
              ${row.confirmed ? "checked disabled" : ""}></td>`;
      tr.addEventListener("click", () => {
        this.controller!.selectSegment(row.segment);
        this.render(this.controller!.viewModel);
      });
      tbody.appendChild(tr);
    }
    tbody.querySelectorAll<HTMLButtonElement>("button[data-play]").forEach((button) =>
      button.addEventListener("click", (ev) => {
        ev.stopPropagation();
        guard(async () => {
          this.render(await this.controller!.playbackCheck(button.dataset.play!, this.player!));
          this.video.currentTime = this.player!.timeForCurrentFrame();
        });
      }));
    tbody.querySelectorAll<HTMLInputElement>("input[data-confirm]").forEach((box) =>
      box.addEventListener("click", (ev) => {
        ev.stopPropagation();
        guard(async () => this.render(await this.controller!.confirmSegment(box.dataset.confirm!)));
      }));

    const submit = $("seg-submit") as HTMLButtonElement;
    submit.disabled = !vm.submitEnabled;
    $("seg-reasons").textContent = vm.submitted
      ? "submitted"
      : vm.submitBlockedReasons.join("; ");

    const views = $("seg-views");
    views.innerHTML = "";
    for (const view of CAMERA_VIEWS) {
      const button = document.createElement("button");
      button.textContent =
        view === this.controller!.activeView ? `${view} (active)` : view;
      button.addEventListener("click", () =>
        guard(async () => {
          this.render(await this.controller!.switchView(view));
          this.loadVideoForView(view);
        }));
      views.appendChild(button);
    }
  }
}

// ---- rating screen ---------------------------------------------------------------

class RatingScreen {
  private controller: RatingController | null = null;
  private form: RatingFormModel | null = null;
  private video = $("rate-video") as HTMLVideoElement;

  bind(): void {
    $("rate-load").addEventListener("click", () => guard(() => this.loadQueue()));
    $("rate-submit").addEventListener("click", () =>
      guard(async () => {
        await this.controller!.submit();
        await this.loadQueue();
      }));
    $("rate-flag").addEventListener("click", () =>
      guard(async () => {
        const text = ($("rate-flag-text") as HTMLTextAreaElement).value;
        await this.controller!.flagSegmentation(text);
        await this.loadQueue();
      }));
  }

  private async loadQueue(): Promise<void> {
    const api = makeClient();
    const rater = ($("rate-rater") as HTMLInputElement).value;
    const queue = await api.getAssignments(rater, true);
    const tbody = $("rate-queue");
    tbody.innerHTML = "";
    for (const assignment of queue) {
      const tr = document.createElement("tr");
      tr.innerHTML = `<td>${assignment.assignment_id}</td><td>${assignment.patient_id}
        (${assignment.hand})</td><td>${assignment.task_number}</td>
        <td>${assignment.status}</td><td><button>open</button></td>`;
      tr.querySelector("button")!.addEventListener("click", () =>
        guard(() => this.open(api, assignment)));
      tbody.appendChild(tr);
    }
  }

  private async open(api: ApiClient, assignment: AssignmentOut): Promise<void> {
    this.controller = new RatingController(api, DEFAULT_QUESTIONS, assignment);
    this.form = await this.controller.load();
    const task = this.controller.task!;

    $("rate-definitions").textContent = Object.entries(task.definitions)
      .map(([kind, text]) => `${kind}: ${text}`)
      .join("\n");

    // recommended view first; arrows cycle the alternatives
    const videos = await api
      .getVideos(assignment.patient_id, assignment.task_number, assignment.hand)
      .catch(() => [] as VideoOut[]);
    const recommended = task.segments[0]?.view ?? "Ipsilateral";
    const ordered = [
      ...videos.filter((v) => v.view === recommended),
      ...videos.filter((v) => v.view !== recommended),
    ];
    let cursor = 0;
    const show = () => {
      if (ordered.length > 0) this.video.src = ordered[cursor].path;
    };
    const viewBar = $("rate-views");
    viewBar.innerHTML = "";
    const back = document.createElement("button");
    back.textContent = "◀ view";
    const fwd = document.createElement("button");
    fwd.textContent = "view ▶";
    back.addEventListener("click", () => {
      cursor = (cursor - 1 + Math.max(ordered.length, 1)) % Math.max(ordered.length, 1);
      show();
    });
    fwd.addEventListener("click", () => {
      cursor = (cursor + 1) % Math.max(ordered.length, 1);
      show();
    });
    viewBar.append(back, fwd);
    // unimpaired reference clips, when the catalog provides them
    task.reference_urls.forEach((url, index) => {
      const ref = document.createElement("button");
      ref.textContent = `reference ${index + 1}`;
      ref.addEventListener("click", () => {
        this.video.src = url;
      });
      viewBar.appendChild(ref);
    });
    show();

    this.renderForm();
  }

  private renderForm(): void {
    const host = $("rate-form");
    host.innerHTML = "";
    const errors = $("rate-errors");
    const submit = $("rate-submit") as HTMLButtonElement;

    const refresh = () => {
      submit.disabled = !this.form!.complete;
    };

    const scoreLabel = document.createElement("label");
    scoreLabel.textContent = "ARAT task score (0-3)";
    const score = document.createElement("input");
    score.type = "number";
    score.min = "0";
    score.max = "3";
    score.addEventListener("change", () => {
      const err = this.form!.setTaskScore(Number(score.value));
      errors.textContent = err ? err.message : "";
      refresh();
    });
    host.append(scoreLabel, score);

    for (const question of this.form!.questions) {
      const label = document.createElement("label");
      label.textContent = question.prompt;
      host.appendChild(label);
      if (question.answer_type === "ordinal") {
        const input = document.createElement("input");
        input.type = "number";
        input.min = "0";
        input.max = "3";
        input.addEventListener("change", () => {
          const err = this.form!.setAnswer(question.id, Number(input.value));
          errors.textContent = err ? `${question.id}: ${err.message}` : "";
          refresh();
        });
        host.appendChild(input);
      } else if (question.answer_type === "boolean") {
        const input = document.createElement("input");
        input.type = "checkbox";
        const apply = () => {
          this.form!.setAnswer(question.id, input.checked);
          refresh();
        };
        input.addEventListener("change", apply);
        apply();
        host.appendChild(input);
      } else {
        const input = document.createElement("textarea");
        input.rows = 2;
        input.addEventListener("change", () => {
          this.form!.setAnswer(question.id, input.value);
          refresh();
        });
        host.appendChild(input);
      }
    }
    refresh();
  }
}

// ---- capture screen ----------------------------------------------------------------

class CaptureScreen {
  private controller: CaptureController | null = null;
  private ticker: number | null = null;

  bind(): void {
    $("cap-begin").addEventListener("click", () =>
      guard(async () => {
        this.controller = new CaptureController(makeClient());
        const patient = Number(($("cap-patient") as HTMLInputElement).value);
        const hand = ($("cap-hand") as HTMLSelectElement).value as Hand;
        this.render(await this.controller.begin(patient, hand));
      }));
    $("cap-calibrate").addEventListener("click", () =>
      guard(async () => {
        const ref = ($("cap-calib-ref") as HTMLInputElement).value || `calib-${Date.now()}`;
        this.render(await this.controller!.calibrate(ref));
      }));
    $("cap-start").addEventListener("click", () =>
      guard(async () => {
        const task = Number(($("cap-task") as HTMLInputElement).value);
        this.render(await this.controller!.startTask(task));
        this.startTicker();
      }));
    $("cap-stop").addEventListener("click", () =>
      guard(async () => {
        const recording = await this.controller!.stopTask();
        this.stopTicker();
        $("cap-timer").textContent = `${recording.timer_seconds?.toFixed(1)} s`;
        this.render(this.controller!.viewModel);
        this.appendRecordingRow(recording.task_number,
          recording.timer_seconds ?? 0, recording.preliminary_score, recording.active);
      }));
    $("cap-preliminary").addEventListener("click", () =>
      guard(async () => {
        const task = Number(($("cap-task") as HTMLInputElement).value);
        const score = Number(($("cap-score") as HTMLInputElement).value);
        const note = ($("cap-note") as HTMLInputElement).value || undefined;
        await this.controller!.recordPreliminary(task, score, note);
      }));
  }

  private startTicker(): void {
    this.stopTicker();
    this.ticker = window.setInterval(() => {
      const seconds = this.controller?.runningTimerSeconds();
      if (seconds != null) $("cap-timer").textContent = `${seconds.toFixed(1)} s`;
    }, 100);
  }

  private stopTicker(): void {
    if (this.ticker !== null) window.clearInterval(this.ticker);
    this.ticker = null;
  }

  private appendRecordingRow(
    task: number, timer: number, score: number | null, active: boolean,
  ): void {
    const tr = document.createElement("tr");
    tr.innerHTML = `<td>${task}</td><td>${timer.toFixed(1)} s</td>
      <td>${score ?? ""}</td><td>${active ? "yes" : ""}</td>`;
    $("cap-recordings").querySelector("tbody")!.appendChild(tr);
  }

  private render(vm: CaptureViewModel): void {
    $("cap-phase").textContent = vm.phase;
    $("cap-gate-reason").textContent = vm.gateReason ?? "";
    ($("cap-start") as HTMLButtonElement).disabled = !vm.startEnabled;
    ($("cap-stop") as HTMLButtonElement).disabled = !vm.stopEnabled;

    const grid = $("cap-cameras");
    grid.innerHTML = "";
    for (const view of CAMERA_VIEWS) {
      const status = vm.cameraStatus[view] ?? "unchecked";
      const div = document.createElement("div");
      div.innerHTML = `<span class="status-${status}">${view}: ${status}</span>
        <button data-view="${view}" data-ok="1">ok</button>
        <button data-view="${view}" data-ok="0">fail</button>`;
      div.querySelectorAll("button").forEach((button) =>
        button.addEventListener("click", () =>
          guard(async () =>
            this.render(
              await this.controller!.checkCamera(
                button.dataset.view!, button.dataset.ok === "1",
              ),
            ))));
      grid.appendChild(div);
    }
  }
}

export function initApp(): void {
  initNavigation();
  new SegmentationScreen().bind();
  new RatingScreen().bind();
  new CaptureScreen().bind();
}
