import { describe, expect, it } from "vitest";

import { initialStaircase, staircaseUpdate, thresholdEstimate } from "../src/staircase.js";

describe("3-down/1-up staircase", () => {
  it("steps down after three consecutive correct responses", () => {
    let state = initialStaircase(50);
    state = staircaseUpdate(state, true);
    state = staircaseUpdate(state, true);
    expect(state.currentDuration).toBe(50);
    state = staircaseUpdate(state, true);
    expect(state.currentDuration).toBe(40);
    expect(state.consecutiveCorrect).toBe(0);
  });

  it("steps up on any error and clamps at the ceiling", () => {
    let state = initialStaircase(195, 10, 10, 200);
    state = staircaseUpdate(state, false);
    expect(state.currentDuration).toBe(200);
    state = staircaseUpdate(state, false);
    expect(state.currentDuration).toBe(200);
  });

  it("clamps at the floor", () => {
    let state = initialStaircase(10);
    for (const correct of [true, true, true]) state = staircaseUpdate(state, correct);
    expect(state.currentDuration).toBe(10);
  });

  it("resets the streak on errors", () => {
    let state = initialStaircase(50);
    state = staircaseUpdate(state, true);
    state = staircaseUpdate(state, true);
    state = staircaseUpdate(state, false);
    expect(state.currentDuration).toBe(60);
    expect(state.consecutiveCorrect).toBe(0);
  });

  it("estimates the second-lowest distinct duration", () => {
    const history = [50, 40, 30, 40].map((duration) => ({ duration }));
    expect(thresholdEstimate(history)).toBe(40);
    expect(thresholdEstimate([{ duration: 10 }, { duration: 20 }, { duration: 10 }])).toBe(20);
    expect(() => thresholdEstimate([{ duration: 50 }])).toThrow();
  });
});
