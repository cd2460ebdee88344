import { describe, expect, it } from "vitest";

import { CATEGORIES, IMAGES_PER_RUN, RATINGS_PER_CATEGORY, SURVEY_TOTAL } from "../src/categories.js";
import { Gesture, SurveyController } from "../src/survey.js";
import { FakeBackend, mulberry32 } from "./fake_backend.js";

const DEMOGRAPHICS = { age: 30, consent: true };

async function begun(backend: FakeBackend, seed = 5) {
  const controller = new SurveyController(backend, { rng: mulberry32(seed) });
  await controller.begin(DEMOGRAPHICS);
  return controller;
}

describe("full survey driver", () => {
  it("completes 100 ratings with legal category switching", async () => {
    const backend = new FakeBackend(300, 11);
    const controller = await begun(backend, 42);

    let previousCategory = controller.currentCategory;
    let ratedInRun = 0;
    let gestures = 0;
    const switchRecords: Array<{ category: number; run: number; total: number }> = [];

    while (!controller.complete) {
      expect(controller.pending).not.toBeNull();
      const category = controller.currentCategory!;
      expect(controller.counts[category]).toBeLessThan(RATINGS_PER_CATEGORY);

      const gesture: Gesture =
        gestures % 2 === 0
          ? { kind: "button", index: gestures % 5 }
          : { kind: "swipe", index: gestures % 5 };
      await controller.submitInteraction(gesture);
      gestures += 1;
      ratedInRun += 1;

      for (const c of CATEGORIES) {
        expect(controller.counts[c.id]).toBeLessThanOrEqual(RATINGS_PER_CATEGORY);
      }

      if (controller.currentCategory !== previousCategory) {
        switchRecords.push({
          category: previousCategory!,
          run: ratedInRun,
          total: controller.counts[previousCategory!],
        });
        previousCategory = controller.currentCategory;
        ratedInRun = 0;
      }
    }

    expect(gestures).toBe(SURVEY_TOTAL);
    expect(controller.totalRated).toBe(SURVEY_TOTAL);
    for (const c of CATEGORIES) {
      expect(controller.counts[c.id]).toBe(RATINGS_PER_CATEGORY);
    }
    await controller.settle();
    const stored = backend.ratings.get(controller.credentials!.session_id)!;
    expect(stored.size).toBe(SURVEY_TOTAL);

    // switches happen only at 5-image run boundaries or when a category caps
    expect(switchRecords.length).toBeGreaterThan(0);
    for (const record of switchRecords) {
      const atCap = record.total === RATINGS_PER_CATEGORY;
      const atRunBoundary = record.run === IMAGES_PER_RUN;
      expect(atCap || atRunBoundary).toBe(true);
    }
  });

  it("keeps the one-gesture-per-image invariant across 100 scripted gestures", async () => {
    const backend = new FakeBackend(300, 3);
    const controller = await begun(backend, 9);
    for (let i = 0; i < SURVEY_TOTAL; i += 1) {
      const gesture: Gesture =
        i % 3 === 0 ? { kind: "swipe", index: i % 5 } : { kind: "button", index: (i + 2) % 5 };
      await controller.submitInteraction(gesture);
    }
    const ratings = controller.gestureLog.filter((entry) => entry.action === "rating");
    expect(ratings).toHaveLength(SURVEY_TOTAL);
    const imageIds = ratings.map((entry) => entry.imageId);
    expect(new Set(imageIds).size).toBe(SURVEY_TOTAL); // one gesture consumed each image
    await controller.settle();
    const stored = backend.ratings.get(controller.credentials!.session_id)!;
    expect(new Set(imageIds)).toEqual(new Set(stored.keys()));
    // no image displayed once complete: a 101st gesture is refused
    await expect(controller.submitInteraction({ kind: "button", index: 0 })).rejects.toThrow();
  });
});

describe("category scheduling", () => {
  it("serves the only unexhausted category", () => {
    const controller = new SurveyController(new FakeBackend(10, 2), { rng: mulberry32(1) });
    for (const c of CATEGORIES) controller.counts[c.id] = RATINGS_PER_CATEGORY;
    controller.counts[5] = 19;
    expect(controller.scheduleNextCategory(true)).toBe(5);
  });

  it("stays on the current category mid-run", () => {
    const controller = new SurveyController(new FakeBackend(10, 2), { rng: mulberry32(1) });
    controller.currentCategory = 2;
    controller.counts[2] = 12;
    controller.runRated = 3;
    const switchesBefore = controller.switches.length;
    expect(controller.scheduleNextCategory()).toBe(2);
    expect(controller.switches.length).toBe(switchesBefore);
  });

  it("signals completion when every category is full", () => {
    const controller = new SurveyController(new FakeBackend(10), { rng: mulberry32(1) });
    for (const c of CATEGORIES) controller.counts[c.id] = RATINGS_PER_CATEGORY;
    expect(controller.scheduleNextCategory()).toBeNull();
    expect(controller.complete).toBe(true);
  });
});

describe("skip and undo", () => {
  it("skip then undo re-displays the image with zero backend calls", async () => {
    const backend = new FakeBackend(50, 8);
    const controller = await begun(backend);
    const shown = controller.pending!;
    const callsBefore = backend.totalCalls();

    await controller.skip();
    expect(controller.pending!.image_id).not.toBe(shown.image_id);
    const undone = await controller.undo();
    expect(undone).toBe(true);
    expect(controller.pending!.image_id).toBe(shown.image_id);
    expect(backend.totalCalls()).toBe(callsBefore); // the round trip stayed local
  });

  it("undo after a rating calls the backend and decrements the mirror", async () => {
    const backend = new FakeBackend(50, 8);
    const controller = await begun(backend);
    const shown = controller.pending!;
    await controller.submitInteraction({ kind: "button", index: 4 });
    expect(controller.totalRated).toBe(1);

    const undone = await controller.undo();
    expect(undone).toBe(true);
    expect(backend.calls["undo"]).toBe(1);
    expect(controller.totalRated).toBe(0);
    expect(controller.pending!.image_id).toBe(shown.image_id); // transparent restore

    // single-step rule: the control goes inert, and stays off the network
    const again = await controller.undo();
    expect(again).toBe(false);
    expect(backend.calls["undo"]).toBe(1);
  });

  it("undoing a skip and undoing a rating look the same to the participant", async () => {
    const backend = new FakeBackend(50, 8);
    const controller = await begun(backend);
    const first = controller.pending!;
    await controller.skip();
    await controller.undo();
    expect(controller.pending!.image_id).toBe(first.image_id);
    await controller.submitInteraction({ kind: "swipe", index: 2 });
    await controller.undo();
    expect(controller.pending!.image_id).toBe(first.image_id);
  });

  it("skips are never reported to the backend", async () => {
    const backend = new FakeBackend(8, 8);
    const controller = await begun(backend);
    const skipped = controller.pending!.image_id;
    await controller.skip();
    await controller.settle();
    expect(backend.calls["new"] ?? 0).toBe(0);
    expect(backend.ratings.get(controller.credentials!.session_id)!.has(skipped)).toBe(false);
  });
});

describe("backend reconciliation", () => {
  it("rolls back the mirror when the backend reports a duplicate", async () => {
    const backend = new FakeBackend(50, 8);
    backend.forcedFetchQueue.push(1, 2);
    const controller = await begun(backend);
    expect(controller.pending!.image_id).toBe(1);

    // another tab on the same session rates image 1 behind the UI's back
    await backend.newRating(controller.credentials!, 1, 5, 3);
    const before = controller.totalRated;
    await controller.submitInteraction({ kind: "button", index: 1 });
    await controller.settle();
    expect(controller.totalRated).toBe(before); // optimistic increment rolled back
  });

  it("snaps the mirror to the cap and reschedules on CategoryFull", async () => {
    const backend = new FakeBackend(100, 8);
    backend.forcedFetchQueue.push(1, 2);
    const controller = await begun(backend);
    const category = controller.currentCategory!;
    const creds = controller.credentials!;
    // the backend already holds 20 ratings in this category that the UI missed
    for (let i = 0; i < RATINGS_PER_CATEGORY; i += 1) {
      await backend.newRating(creds, 60 + i, category, 3);
    }
    controller.counts[category] = RATINGS_PER_CATEGORY - 1; // stale mirror
    await controller.submitInteraction({ kind: "button", index: 0 });
    await controller.settle();
    expect(controller.counts[category]).toBe(RATINGS_PER_CATEGORY);
    expect(controller.currentCategory).not.toBe(category);
  });
});
