/** The reconstruction session loop: fetch trial, render pair, wait for a
 * left/right response, submit, repeat; break screens between generations;
 * self-termination once the server's minimum-trial guard allows it.
 *
 * All state lives on the server; the loop only reacts to responses, so a
 * page refresh resumes at the same unanswered trial.
 */

import { ApiRequestError, SessionClient } from "./api.js";
import type {
  Choice,
  Reconstruction,
  SessionStatus,
  TrialPayload,
} from "./types.js";

export interface BreakInfo {
  generation: number;
  totalAnswered: number;
  canTerminate: boolean;
}

export type BreakAction = "advance" | "terminate";
export type TrialAction = Choice | "terminate";

/** Rendering/interaction surface; the DOM view and test surrogates implement it. */
export interface ReconstructionView {
  /** Display the pair (and target image/label); resolve with the keypress
   * choice, or "terminate" when the participant ends the session. */
  showTrial(trial: TrialPayload): Promise<TrialAction>;
  /** Generation complete: offer a break, then continue or terminate. */
  showBreak(info: BreakInfo): Promise<BreakAction>;
  /** Transient status line (retry notices and the like). */
  showStatus(message: string): void;
  /** Session is over; present the reconstruction. */
  showComplete(result: Reconstruction): void;
}

export interface SessionOutcome {
  status: SessionStatus;
  reconstruction: Reconstruction;
  trialsAnswered: number;
}

export async function runReconstructionSession(
  client: SessionClient,
  sessionId: string,
  view: ReconstructionView,
): Promise<SessionOutcome> {
  let answered = 0;
  session: for (;;) {
    let trial: TrialPayload;
    try {
      trial = await client.nextTrial(sessionId);
    } catch (error) {
      if (error instanceof ApiRequestError && error.category === "await_advance") {
        const status = await client.status(sessionId);
        const action = await view.showBreak({
          generation: status.generation,
          totalAnswered: status.total_answered,
          canTerminate: status.total_answered >= status.min_trials_to_terminate,
        });
        if (action === "advance") {
          await client.advance(sessionId);
          continue;
        }
        await client.terminate(sessionId);
        break;
      }
      if (error instanceof ApiRequestError && error.category === "gone") {
        break; // terminated elsewhere; fall through to the reconstruction
      }
      throw error;
    }

    const action = await view.showTrial(trial);
    if (action === "terminate") {
      try {
        await client.terminate(sessionId);
        break session;
      } catch (error) {
        if (error instanceof ApiRequestError && error.category === "too_early") {
          view.showStatus(error.message);
          continue;
        }
        throw error;
      }
    }
    const ack = await client.submitChoice(sessionId, trial.token, action);
    answered += 1;
    if (ack !== "already-recorded") {
      view.showStatus(`trial ${ack.answered}/${ack.scheduled} of generation ${trial.generation}`);
    }
  }

  const [status, reconstruction] = await Promise.all([
    client.status(sessionId),
    client.reconstruction(sessionId),
  ]);
  view.showComplete(reconstruction);
  return { status, reconstruction, trialsAnswered: answered };
}
