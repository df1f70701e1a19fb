/** Entry point: read options from the query string, show the setup screen,
 * then run a reconstruction session or a detection block against the
 * session service.
 *
 * Examples:
 *   index.html?server=http://127.0.0.1:8714&mode=concept-target&label=street
 *   index.html?server=http://127.0.0.1:8714&detection=manifest.json
 */

import { fetchTransport, SessionClient } from "./api.js";
import { runDetectionBlock } from "./detection.js";
import { runReconstructionSession } from "./reconstruction.js";
import { RafClock } from "./timing.js";
import type { CreateSessionOptions, DetectionManifest, SessionMode } from "./types.js";
import { DomDetectionView, DomReconstructionView } from "./views/dom.js";

function query(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

async function setupScreen(root: HTMLElement): Promise<void> {
  const panel = document.createElement("div");
  panel.className = "setup-panel";
  panel.innerHTML = `
    <h1>noisevolve</h1>
    <p>Sit about an arm's length (~55 cm) from the screen so each image spans
       roughly five degrees of visual angle. The browser cannot verify the
       distance; this screen is guidance only.</p>
    <p>Reconstruction trials: press <b>&larr;</b> or <b>&rarr;</b> for the image
       more similar to the target. Breaks come every generation.
       Detection trials: <b>F</b> = intact scene, <b>J</b> = scrambled.</p>
    <button id="start">Start (Space)</button>`;
  root.replaceChildren(panel);
  await new Promise<void>((resolve) => {
    panel.querySelector("#start")!.addEventListener("click", () => resolve(), { once: true });
    window.addEventListener("keydown", function handler(event) {
      if (event.code === "Space") {
        window.removeEventListener("keydown", handler);
        resolve();
      }
    });
  });
}

async function runReconstruction(root: HTMLElement, client: SessionClient): Promise<void> {
  let sessionId = query("session");
  if (!sessionId) {
    const mode = (query("mode") ?? "concept-target") as SessionMode;
    const options: CreateSessionOptions = {
      mode,
      label: query("label") ?? "street",
    };
    const seed = query("seed");
    if (seed !== null) options.seed = Number(seed);
    const minTrials = query("min_trials");
    if (minTrials !== null) options.min_trials_to_terminate = Number(minTrials);
    const created = await client.createSession(options);
    sessionId = created.session_id;
    const url = new URL(window.location.href);
    url.searchParams.set("session", sessionId);
    window.history.replaceState(null, "", url); // refresh resumes this session
  }
  const view = new DomReconstructionView(root);
  await runReconstructionSession(client, sessionId, view);
}

async function runDetection(root: HTMLElement, client: SessionClient, manifestUrl: string): Promise<void> {
  const manifest = (await (await fetch(manifestUrl)).json()) as DetectionManifest;
  const view = new DomDetectionView(root);
  const clock = new RafClock();
  const result = await runDetectionBlock(manifest, view, clock);
  view.dispose();
  await client.uploadDetectionLog(manifest.name, result.records);
  const dropped = result.extended.filter((t) => t.dropped_frames).length;
  root.replaceChildren();
  const summary = document.createElement("pre");
  summary.textContent = JSON.stringify(
    {
      trials: result.records.length,
      accuracy: result.accuracy,
      threshold_ms: result.thresholdMs,
      dropped_frame_trials: dropped,
    },
    null,
    2,
  );
  root.appendChild(summary);
}

async function start(): Promise<void> {
  const root = document.getElementById("app")!;
  const server = query("server") ?? "http://127.0.0.1:8714";
  const client = new SessionClient(fetchTransport(`${server}/api/v1`));
  await setupScreen(root);
  const manifestUrl = query("detection");
  if (manifestUrl) {
    await runDetection(root, client, manifestUrl);
  } else {
    await runReconstruction(root, client);
  }
}

start().catch((error) => {
  const root = document.getElementById("app");
  if (root) {
    const message = document.createElement("div");
    message.className = "fatal";
    message.textContent = `Session failed: ${error}`;
    root.appendChild(message);
  }
  console.error(error);
});
