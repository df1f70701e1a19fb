/** Closed-loop surrogate test: a scripted participant drives the real
 * session loop through one full generation (250 trials), the break screen's
 * advance, and self-termination; the server log must hold 250 records with
 * roughly balanced placement, and the reconstruction handed to the view must
 * be the server-side best-win individual.
 */

import { describe, expect, it } from "vitest";

import { SessionClient } from "../src/api.js";
import type { BreakAction, BreakInfo, ReconstructionView, TrialAction } from "../src/reconstruction.js";
import { runReconstructionSession } from "../src/reconstruction.js";
import type { Reconstruction, TrialPayload } from "../src/types.js";
import { MockServer } from "./mock-server.js";

class SurrogateParticipant implements ReconstructionView {
  trialsSeen: TrialPayload[] = [];
  breaks: BreakInfo[] = [];
  statuses: string[] = [];
  completed: Reconstruction | null = null;
  private advancesLeft: number;

  constructor(advances = 1) {
    this.advancesLeft = advances;
  }

  async showTrial(trial: TrialPayload): Promise<TrialAction> {
    if (this.advancesLeft === 0) return "terminate";
    this.trialsSeen.push(trial);
    // deterministic, content-based preference
    return trial.left.png_base64 > trial.right.png_base64 ? "left" : "right";
  }

  async showBreak(info: BreakInfo): Promise<BreakAction> {
    this.breaks.push(info);
    this.advancesLeft -= 1;
    return "advance";
  }

  showStatus(message: string): void {
    this.statuses.push(message);
  }

  showComplete(result: Reconstruction): void {
    this.completed = result;
  }
}

describe("reconstruction session closed loop", () => {
  it("drives 250 trials, one advance and a terminate against the server", async () => {
    const server = new MockServer();
    const client = new SessionClient(server.transport, { attempts: 3, delayMs: 1 });
    const created = await client.createSession({
      mode: "concept-target",
      label: "street",
      seed: 11,
      min_trials_to_terminate: 250,
      config: { population: 100, views: 5 },
    });
    expect(created.scheduled).toBe(250);

    const participant = new SurrogateParticipant(1);
    const outcome = await runReconstructionSession(client, created.session_id, participant);

    const session = server.session(created.session_id);
    // one full generation answered, then the first generation-2 trial
    // triggered self-termination
    expect(participant.trialsSeen).toHaveLength(250);
    expect(session.log).toHaveLength(250);
    expect(session.log.every((record) => record.generation === 1)).toBe(true);
    expect(participant.breaks).toHaveLength(1);
    expect(session.terminated).not.toBeNull();

    // every scheduled slot answered exactly once, wins sum to trials
    const winsTotal = session.lastComplete!.wins.reduce((a, b) => a + b, 0);
    expect(winsTotal).toBe(250);

    // placement randomization: the scheduled first slot lands on the left
    // about half the time
    const leftFirst = session.log.filter((record, k) => {
      const [i] = session.lastComplete!.schedule[record.pair_index]!;
      return record.left_slot === i;
    }).length;
    expect(Math.abs(leftFirst / 250 - 0.5)).toBeLessThan(0.05);

    // the reconstruction shown to the participant is the server's best-win
    // individual of the completed generation
    const best = session.terminated!;
    expect(outcome.reconstruction.best_id).toBe(best.bestId);
    expect(outcome.reconstruction.best_wins).toBe(best.bestWins);
    expect(outcome.reconstruction.best_png_base64).toBe(
      session.lastComplete!.population[best.bestSlot]!.png,
    );
    expect(participant.completed?.best_id).toBe(best.bestId);
  });

  it("keeps concept-mode payloads free of target pixels", async () => {
    const server = new MockServer();
    const client = new SessionClient(server.transport, { attempts: 3, delayMs: 1 });
    const created = await client.createSession({
      mode: "concept-target",
      label: "street",
      seed: 3,
      config: { population: 4, views: 2 },
    });
    const trial = await client.nextTrial(created.session_id);
    expect(trial.target).toEqual({ kind: "label", text: "street" });
  });

  it("resumes at the same unanswered trial after a refresh", async () => {
    const server = new MockServer();
    const client = new SessionClient(server.transport, { attempts: 3, delayMs: 1 });
    const created = await client.createSession({
      mode: "concept-target",
      label: "street",
      seed: 5,
      config: { population: 6, views: 2 },
    });
    const first = await client.nextTrial(created.session_id);
    // the page reloads without submitting: the reissued trial is identical
    const again = await client.nextTrial(created.session_id);
    expect(again.token).toBe(first.token);
    expect(again.left.image_id).toBe(first.left.image_id);
    expect(again.right.image_id).toBe(first.right.image_id);
  });
});
