// Rating screen logic: form validation happens client-side before any POST,
// mirroring the server's rules (0-3 ordinals, booleans, optional text).

import { ApiClient } from "./api.js";
import { AssignmentOut, RatingIn, RatingQuestion, TaskOut } from "./types.js";

export const SCORE_MIN = 0;
export const SCORE_MAX = 3;

export interface AnswerError {
  questionId: string | "task_score";
  message: string;
}

export class RatingFormModel {
  private answers = new Map<string, number | boolean | string>();
  private taskScore: number | null = null;
  readonly questions: RatingQuestion[];

  constructor(questions: RatingQuestion[], task: TaskOut) {
    const kinds = new Set(task.segments.map((s) => s.kind));
    this.questions = questions.filter(
      (q) => q.applies_to === "task" || q.applies_to.some((kind) => kinds.has(kind)),
    );
  }

  setTaskScore(value: number): AnswerError | null {
    if (!Number.isInteger(value) || value < SCORE_MIN || value > SCORE_MAX) {
      return { questionId: "task_score", message: `${SCORE_MIN}-${SCORE_MAX} only` };
    }
    this.taskScore = value;
    return null;
  }

  setAnswer(questionId: string, value: number | boolean | string): AnswerError | null {
    const question = this.questions.find((q) => q.id === questionId);
    if (!question) {
      return { questionId, message: "question does not apply to this task" };
    }
    switch (question.answer_type) {
      case "ordinal":
        if (typeof value !== "number" || !Number.isInteger(value) ||
            value < SCORE_MIN || value > SCORE_MAX) {
          return { questionId, message: `${SCORE_MIN}-${SCORE_MAX} only` };
        }
        break;
      case "boolean":
        if (typeof value !== "boolean") return { questionId, message: "yes/no only" };
        break;
      case "text":
        if (typeof value !== "string") return { questionId, message: "text only" };
        break;
    }
    this.answers.set(questionId, value);
    return null;
  }

  validationErrors(): AnswerError[] {
    const errors: AnswerError[] = [];
    if (this.taskScore === null) {
      errors.push({ questionId: "task_score", message: "task score required" });
    }
    for (const question of this.questions) {
      if (question.answer_type !== "text" && !this.answers.has(question.id)) {
        errors.push({ questionId: question.id, message: "answer required" });
      }
    }
    return errors;
  }

  get complete(): boolean {
    return this.validationErrors().length === 0;
  }

  payload(assignmentId: number, segmentationProblem?: string): RatingIn {
    const errors = this.validationErrors();
    if (errors.length > 0) {
      throw new Error(`form incomplete: ${errors.map((e) => e.questionId).join(", ")}`);
    }
    const answers: Record<string, number | boolean | string> = {};
    for (const [key, value] of this.answers) answers[key] = value;
    return {
      assignment_id: assignmentId,
      task_score: this.taskScore as number,
      answers,
      ...(segmentationProblem ? { segmentation_problem: segmentationProblem } : {}),
    };
  }
}

export class RatingController {
  form: RatingFormModel | null = null;
  task: TaskOut | null = null;

  constructor(
    private api: ApiClient,
    private questions: RatingQuestion[],
    public assignment: AssignmentOut,
  ) {}

  async load(): Promise<RatingFormModel> {
    this.task = await this.api.getTask(this.assignment.task_number);
    this.form = new RatingFormModel(this.questions, this.task);
    return this.form;
  }

  // submit only fires when the form validates; invalid forms never POST
  async submit(): Promise<AssignmentOut> {
    if (!this.form) throw new Error("controller not loaded");
    return this.api.postRating(this.form.payload(this.assignment.assignment_id));
  }

  async flagSegmentation(text: string): Promise<void> {
    if (!text.trim()) throw new Error("flag text required");
    await this.api.postFeedback(this.assignment.assignment_id, text);
  }
}
