/** Rapid-detection block runner.
 *
 * Per trial: fixation (200 ms) -> stimulus at the staircase (or fixed)
 * duration -> pattern mask -> keypress classification with reaction time.
 * Presentation is frame-aligned through a FrameClock; the achieved duration
 * is logged next to the requested one and flagged (never discarded) when a
 * frame was dropped. Staircase mode drives the 3-down/1-up procedure from
 * logged correctness and reports the second-lowest-duration threshold.
 */

import type { FrameClock, PresentationReport } from "./timing.js";
import { presentFor } from "./timing.js";
import { initialStaircase, staircaseUpdate, thresholdEstimate } from "./staircase.js";
import type { DetectionManifest, DetectionStimulus, DetectionTrialRecord } from "./types.js";

export type DetectionResponse = "intact" | "scrambled";

export interface DetectionView {
  showFixation(): void;
  showStimulus(stimulus: DetectionStimulus, durationMs: number): void;
  showMask(maskPng: string | undefined): void;
  clear(): void;
  /** Resolve with the classification keypress; called after stimulus offset. */
  awaitResponse(): Promise<DetectionResponse>;
}

export interface DetectionTrialLog extends DetectionTrialRecord {
  requested_ms: number;
  achieved_ms: number;
  dropped_frames: boolean;
  correct: boolean;
}

export interface DetectionBlockResult {
  records: DetectionTrialRecord[];
  extended: DetectionTrialLog[];
  thresholdMs: number | null;
  accuracy: number;
}

export async function runDetectionBlock(
  manifest: DetectionManifest,
  view: DetectionView,
  clock: FrameClock,
): Promise<DetectionBlockResult> {
  const fixationMs = manifest.fixation_ms ?? 200;
  const maskMs = manifest.mask_ms ?? 100;
  let staircase = initialStaircase(manifest.initial_duration_ms ?? 50);
  const records: DetectionTrialRecord[] = [];
  const extended: DetectionTrialLog[] = [];
  let correctCount = 0;

  for (const stimulus of manifest.stimuli) {
    const duration =
      manifest.mode === "staircase"
        ? staircase.currentDuration
        : manifest.fixed_duration_ms ?? 50;

    await presentFor(clock, fixationMs, () => view.showFixation(), () => view.clear());
    const presentation: PresentationReport = await presentFor(
      clock,
      duration,
      () => view.showStimulus(stimulus, duration),
      () => view.showMask(manifest.mask_png_base64),
    );
    const maskShown = clock.now();
    await presentFor(clock, maskMs, () => undefined, () => view.clear());

    const response = await view.awaitResponse();
    const rt = clock.now() - maskShown + presentation.achieved_ms;
    const correct = (response === "intact") === stimulus.is_intact;
    correctCount += correct ? 1 : 0;

    const record: DetectionTrialRecord = {
      image_id: stimulus.image_id,
      is_intact: stimulus.is_intact,
      similarity_group: stimulus.similarity_group,
      duration_ms: duration,
      response,
      rt_ms: rt,
    };
    records.push(record);
    extended.push({
      ...record,
      requested_ms: presentation.requested_ms,
      achieved_ms: presentation.achieved_ms,
      dropped_frames: presentation.dropped_frames,
      correct,
    });
    if (manifest.mode === "staircase") {
      staircase = staircaseUpdate(staircase, correct);
    }
  }

  let thresholdMs: number | null = null;
  if (manifest.mode === "staircase") {
    try {
      thresholdMs = thresholdEstimate(staircase.history);
    } catch {
      thresholdMs = null;
    }
  }
  return {
    records,
    extended,
    thresholdMs,
    accuracy: manifest.stimuli.length ? correctCount / manifest.stimuli.length : 0,
  };
}
