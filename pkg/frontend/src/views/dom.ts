/** Browser rendering of trials, breaks and detection stimuli.
 *
 * Layout keeps the two choice images at the same rendered size with a gap of
 * one fifth of the image width between them (the 1-degree gap between
 * 5-degree images of the original setup); actual visual angle depends on
 * viewing distance, which the setup screen can only advise about.
 */

import { awaitKey, DEFAULT_KEYS, KeyBindings } from "../keys.js";
import type { BreakAction, BreakInfo, ReconstructionView, TrialAction } from "../reconstruction.js";
import type { DetectionResponse, DetectionView } from "../detection.js";
import type { DetectionStimulus, Reconstruction, TrialPayload } from "../types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function pngSrc(base64: string): string {
  return `data:image/png;base64,${base64}`;
}

export class DomReconstructionView implements ReconstructionView {
  private readonly status: HTMLElement;
  private readonly stage: HTMLElement;
  private inputLocked = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly keys: KeyBindings = DEFAULT_KEYS,
  ) {
    this.stage = el("div", "stage");
    this.status = el("div", "status");
    root.replaceChildren(this.stage, this.status);
  }

  async showTrial(trial: TrialPayload): Promise<TrialAction> {
    const targetArea = el("div", "target-area");
    if (trial.target.kind === "label") {
      targetArea.appendChild(el("div", "target-label", trial.target.text));
    } else {
      const img = el("img", "target-image");
      img.src = trial.target.url;
      targetArea.appendChild(img);
    }

    const pair = el("div", "pair");
    for (const side of ["left", "right"] as const) {
      const img = el("img", `choice ${side}`);
      img.src = pngSrc(trial[side].png_base64);
      pair.appendChild(img);
    }

    const progress = el(
      "div",
      "progress",
      `generation ${trial.generation}, trial ${trial.progress.answered + 1} of ${trial.progress.scheduled}`,
    );
    this.stage.replaceChildren(targetArea, pair, progress);

    // one in-flight request per session: input stays locked during submission
    if (this.inputLocked) throw new Error("input locked: a submission is pending");
    this.inputLocked = true;
    try {
      return await awaitKey<TrialAction>({
        [this.keys.left]: "left",
        [this.keys.right]: "right",
        [this.keys.terminate]: "terminate",
      });
    } finally {
      this.inputLocked = false;
    }
  }

  async showBreak(info: BreakInfo): Promise<BreakAction> {
    const panel = el("div", "break-panel");
    panel.appendChild(el("h2", undefined, `Generation ${info.generation} complete`));
    panel.appendChild(
      el("p", undefined, `You have answered ${info.totalAnswered} trials. Take a break.`),
    );
    const cont = el("button", "continue", "Continue (Space)");
    panel.appendChild(cont);
    let stop: HTMLButtonElement | null = null;
    if (info.canTerminate) {
      stop = el("button", "terminate", "Finish and show reconstruction (Esc)");
      panel.appendChild(stop);
    }
    this.stage.replaceChildren(panel);

    return new Promise<BreakAction>((resolve) => {
      cont.addEventListener("click", () => resolve("advance"), { once: true });
      stop?.addEventListener("click", () => resolve("terminate"), { once: true });
      const mapping: Record<string, BreakAction> = { [this.keys.continue_]: "advance" };
      if (info.canTerminate) mapping[this.keys.terminate] = "terminate";
      void awaitKey(mapping).then(resolve);
    });
  }

  showStatus(message: string): void {
    this.status.textContent = message;
  }

  showComplete(result: Reconstruction): void {
    const panel = el("div", "complete-panel");
    panel.appendChild(el("h2", undefined, "Session complete"));
    const best = el("img", "reconstruction");
    best.src = pngSrc(result.best_png_base64);
    const mean = el("img", "reconstruction");
    mean.src = pngSrc(result.mean_png_base64);
    panel.append(
      el("p", undefined, `Best-ranked image of generation ${result.generation}:`),
      best,
      el("p", undefined, "Population mean:"),
      mean,
    );
    this.stage.replaceChildren(panel);
  }
}

export class DomDetectionView implements DetectionView {
  private readonly stage: HTMLElement;
  private buffered: DetectionResponse | null = null;
  private readonly keyHandler: (event: KeyboardEvent) => void;

  constructor(
    root: HTMLElement,
    private readonly keys: KeyBindings = DEFAULT_KEYS,
  ) {
    this.stage = el("div", "stage detection");
    root.replaceChildren(this.stage);
    // responses can land while the mask is still up; buffer them
    this.keyHandler = (event) => {
      if (event.code === this.keys.intact) this.buffered = "intact";
      if (event.code === this.keys.scrambled) this.buffered = "scrambled";
    };
    window.addEventListener("keydown", this.keyHandler);
  }

  showFixation(): void {
    this.stage.replaceChildren(el("div", "fixation", "+"));
    this.buffered = null;
  }

  showStimulus(stimulus: DetectionStimulus, _durationMs: number): void {
    const img = el("img", "detection-stimulus");
    img.src = pngSrc(stimulus.png_base64);
    this.stage.replaceChildren(img);
  }

  showMask(maskPng: string | undefined): void {
    if (maskPng) {
      const img = el("img", "detection-mask");
      img.src = pngSrc(maskPng);
      this.stage.replaceChildren(img);
    } else {
      this.stage.replaceChildren(el("div", "detection-mask-blank"));
    }
  }

  clear(): void {
    this.stage.replaceChildren();
  }

  async awaitResponse(): Promise<DetectionResponse> {
    if (this.buffered !== null) {
      const response = this.buffered;
      this.buffered = null;
      return response;
    }
    return awaitKey<DetectionResponse>({
      [this.keys.intact]: "intact",
      [this.keys.scrambled]: "scrambled",
    });
  }

  dispose(): void {
    window.removeEventListener("keydown", this.keyHandler);
  }
}
