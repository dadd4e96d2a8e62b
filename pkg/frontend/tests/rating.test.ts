import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { RatingController, RatingFormModel } from "../src/rating";
import { DEFAULT_QUESTIONS } from "../src/app";
import { FakeServer, TASK1, TASK17 } from "./fake_server";

describe("rating form validation", () => {
  it("rejects task scores outside 0-3 client-side", () => {
    const form = new RatingFormModel(DEFAULT_QUESTIONS, TASK17);
    expect(form.setTaskScore(4)).toEqual({ questionId: "task_score", message: "0-3 only" });
    expect(form.setTaskScore(-1)).not.toBeNull();
    expect(form.setTaskScore(2.5)).not.toBeNull();
    expect(form.setTaskScore(3)).toBeNull();
  });

  it("rejects out-of-range ordinal answers and wrong types", () => {
    const form = new RatingFormModel(DEFAULT_QUESTIONS, TASK17);
    expect(form.setAnswer("task_quality", 5)).not.toBeNull();
    expect(form.setAnswer("task_quality", 2)).toBeNull();
    expect(form.setAnswer("compensation_present", 1)).not.toBeNull();
    expect(form.setAnswer("compensation_present", true)).toBeNull();
    expect(form.setAnswer("component_notes", "slow grasp")).toBeNull();
  });

  it("only shows questions that apply to the task's segment kinds", () => {
    const gross = new RatingFormModel(DEFAULT_QUESTIONS, TASK17);
    const ids = gross.questions.map((q) => q.id);
    expect(ids).toContain("gip_quality");
    expect(ids).toContain("gt_quality");
    expect(ids).not.toContain("ip_quality");
    expect(gross.setAnswer("ip_quality", 2)).not.toBeNull();

    const grasp = new RatingFormModel(DEFAULT_QUESTIONS, TASK1);
    expect(grasp.questions.map((q) => q.id)).toContain("ip_quality");
  });

  it("requires every ordinal and boolean answer before completion", () => {
    const form = new RatingFormModel(DEFAULT_QUESTIONS, TASK17);
    form.setTaskScore(2);
    form.setAnswer("task_quality", 2);
    form.setAnswer("gip_quality", 1);
    form.setAnswer("gt_quality", 1);
    expect(form.complete).toBe(false); // compensation_present still open
    form.setAnswer("compensation_present", false);
    expect(form.complete).toBe(true);
    // text question is optional
    expect(form.validationErrors()).toEqual([]);
  });

  it("never POSTs an invalid rating", async () => {
    const server = new FakeServer();
    const api = new ApiClient("http://test", null, server.fetch);
    const controller = new RatingController(api, DEFAULT_QUESTIONS, {
      assignment_id: 1, patient_id: 1, hand: "left", task_number: 17,
      rater_id: "drA", status: "pending",
    });
    const form = await controller.load();
    form.setTaskScore(3);
    await expect(controller.submit()).rejects.toThrow(/form incomplete/);
    expect(server.ratings).toHaveLength(0);

    form.setAnswer("task_quality", 2);
    form.setAnswer("gip_quality", 2);
    form.setAnswer("gt_quality", 3);
    form.setAnswer("compensation_present", false);
    const done = await controller.submit();
    expect(done.status).toBe("completed");
    expect(server.ratings).toHaveLength(1);
  });

  it("flags a segmentation problem through the feedback endpoint", async () => {
    const server = new FakeServer();
    const api = new ApiClient("http://test", null, server.fetch);
    const controller = new RatingController(api, DEFAULT_QUESTIONS, {
      assignment_id: 9, patient_id: 1, hand: "left", task_number: 17,
      rater_id: "drA", status: "pending",
    });
    await controller.load();
    await expect(controller.flagSegmentation("  ")).rejects.toThrow(/text required/);
    expect(server.flags).toHaveLength(0);
    await controller.flagSegmentation("T video is too long");
    expect(server.flags).toEqual([{ assignment_id: 9, text: "T video is too long" }]);
  });
});
