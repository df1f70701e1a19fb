/** Frame-aligned presentation timing.
 *
 * Stimulus durations are realized as whole display frames: show on a frame
 * boundary, hide on the boundary closest to the requested duration. The
 * achieved duration and a dropped-frame flag are logged per presentation;
 * headless tests swap in a fake clock and assert ordering rather than
 * wall-clock accuracy.
 */

export interface FrameClock {
  /** Resolves at the next frame boundary with its timestamp (ms). */
  nextFrame(): Promise<number>;
  /** Typical frame period in ms (16.7 at 60 Hz). */
  framePeriod(): number;
  now(): number;
}

export class RafClock implements FrameClock {
  private period = 1000 / 60;
  private lastTimestamp: number | null = null;

  nextFrame(): Promise<number> {
    return new Promise((resolve) =>
      requestAnimationFrame((timestamp) => {
        if (this.lastTimestamp !== null) {
          const delta = timestamp - this.lastTimestamp;
          if (delta > 1 && delta < 100) this.period = 0.9 * this.period + 0.1 * delta;
        }
        this.lastTimestamp = timestamp;
        resolve(timestamp);
      }),
    );
  }

  framePeriod(): number {
    return this.period;
  }

  now(): number {
    return performance.now();
  }
}

/** Deterministic clock for tests: frames tick every `period` ms on demand. */
export class FakeFrameClock implements FrameClock {
  private time = 0;

  constructor(private readonly period = 1000 / 60) {}

  async nextFrame(): Promise<number> {
    this.time += this.period;
    return this.time;
  }

  framePeriod(): number {
    return this.period;
  }

  now(): number {
    return this.time;
  }
}

export interface PresentationReport {
  requested_ms: number;
  achieved_ms: number;
  dropped_frames: boolean;
}

/**
 * Run `show` at a frame boundary, wait the whole-frame realization of
 * `durationMs`, then run `hide` at the closing boundary.
 */
export async function presentFor(
  clock: FrameClock,
  durationMs: number,
  show: () => void,
  hide: () => void,
): Promise<PresentationReport> {
  const period = clock.framePeriod();
  const frames = Math.max(1, Math.round(durationMs / period));
  const onset = await clock.nextFrame();
  show();
  let offset = onset;
  for (let i = 0; i < frames; i++) {
    offset = await clock.nextFrame();
  }
  hide();
  const achieved = offset - onset;
  return {
    requested_ms: durationMs,
    achieved_ms: achieved,
    // more than one frame period away from the request: flag, never discard
    dropped_frames: Math.abs(achieved - durationMs) > period + 1,
  };
}
